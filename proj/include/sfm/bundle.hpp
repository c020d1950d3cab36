#pragma once

#include <Eigen/Core>
#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "sfm/camera.hpp"

namespace sfm {

struct BAObservation {
    int camera_index = 0;
    int point_index = 0;
    Eigen::Vector2d y = Eigen::Vector2d::Zero();
    double weight = 1.0;
};

/// The filtered residual graph bundle adjustment minimizes over: cameras,
/// points, unique (camera, point) observations, and the per-camera frozen
/// parameter mask implementing the gauge (query pose plus one translation
/// coordinate of a second camera for scale).
///
/// Parameter packing used by every vector-valued API here: 8 values per
/// camera (q w,x,y,z; t x,y,z; log_f) followed by 3 per point.
struct BAProblem {
    std::vector<Camerad> cameras;
    std::vector<Eigen::Vector3d> points;
    std::vector<BAObservation> observations;
    std::vector<std::array<char, 8>> frozen;  // aligned with cameras

    int num_parameters() const {
        return 8 * static_cast<int>(cameras.size()) + 3 * static_cast<int>(points.size());
    }
    void validate() const;

    /// Freezes all 8 parameters of camera i (or just pose, leaving focal free).
    void freeze_camera(int i, bool include_focal);
    void freeze_translation_axis(int i, int axis);
};

struct LMOptions {
    int max_steps = 30;
    double lambda_init = 1e-3;
    double lambda_min = 1e-10;
    double lambda_max = 1e6;
    double rel_decrease_tol = 1e-10;  // on two consecutive accepted steps
    double gradient_tol = 1e-12;      // infinity norm
};

struct LMStepRecord {
    int step = 0;
    double lambda = 0;
    double cost = 0;
    bool accepted = false;
};

struct LMState {
    double lambda = 1e-3;
    double cost = 0;
    int step = 0;
    bool converged = false;
    std::string reason;
    double gradient_inf_norm = 0;
    int excluded_observations = 0;
    std::vector<LMStepRecord> history;
};

/// Weighted squared reprojection cost: sum of w * |P_i(x_j) - y_ij|^2.
/// Observations without a finite projection are excluded (see
/// ba_residual_stats for the count).
double ba_cost(const BAProblem& problem);

struct ResidualStats {
    double cost = 0;       // weighted, squared
    double mean_px = 0;    // mean unsquared 2D reprojection error
    double rms_px = 0;     // per-coordinate RMS, sqrt(sum|r|^2 / 2N)
    int n_used = 0;
    int n_excluded = 0;
};
ResidualStats ba_residual_stats(const BAProblem& problem);

/// Levenberg-Marquardt with Schur complement on the points: damping grows
/// tenfold on a rejected trial and shrinks tenfold on an accepted one; stops
/// on max_steps, on a relative cost decrease below rel_decrease_tol for two
/// consecutive accepted steps, or on a gradient below gradient_tol. The cost
/// never increases across accepted steps and quaternions are renormalized
/// after each accepted step. Throws SolverError when the reduced camera
/// system stays singular at maximum damping.
LMState lm_solve(BAProblem& problem, const LMOptions& options = {});

/// One damped step delta over the packed parameter vector, solved through the
/// Schur complement. Exposed so the reduced solve can be checked against a
/// dense normal-equation oracle.
Eigen::VectorXd lm_step_delta(const BAProblem& problem, double lambda);

/// Gradient of a scalar downstream loss with respect to every observation's
/// 2D coordinate, via the implicit function theorem at a converged solution:
/// solves the adjoint system (J^T J + lambda I) u = downstream_grad with the
/// same Schur elimination as the forward solve and chains dr/dy. Requires the
/// problem's gradient infinity norm to be below 1e-8 (throws ContractError
/// otherwise). `downstream_grad` is packed like the parameter vector; frozen
/// entries are ignored. The damping biases the gradient by O(lambda / |J^T J|),
/// so pass a small value at a tight optimum (min(final lambda, 1e-8) works).
std::vector<Eigen::Vector2d> lm_gradient_wrt_observations(
    const BAProblem& problem_at_optimum, double lambda,
    const Eigen::VectorXd& downstream_grad);

/// Per-step diagnostics as CSV: step,lambda,cost,accepted.
void write_lm_history_csv(const LMState& state, std::ostream& out);

}  // namespace sfm
