#include "sfm/bundle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "sfm/errors.hpp"

namespace sfm {

void BAProblem::validate() const {
    if (frozen.size() != cameras.size()) {
        throw ContractError("BAProblem: frozen mask not aligned with cameras");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& obs : observations) {
        if (obs.camera_index < 0 || obs.camera_index >= static_cast<int>(cameras.size())) {
            throw ContractError("BAProblem: camera index out of range");
        }
        if (obs.point_index < 0 || obs.point_index >= static_cast<int>(points.size())) {
            throw ContractError("BAProblem: point index out of range");
        }
        if (obs.weight < 0) throw ContractError("BAProblem: negative weight");
        if (!seen.insert({obs.camera_index, obs.point_index}).second) {
            throw ContractError("BAProblem: duplicate (camera, point) observation");
        }
    }
}

void BAProblem::freeze_camera(int i, bool include_focal) {
    for (int k = 0; k < 7; ++k) frozen[i][k] = 1;
    if (include_focal) frozen[i][7] = 1;
}

void BAProblem::freeze_translation_axis(int i, int axis) { frozen[i][4 + axis] = 1; }

double ba_cost(const BAProblem& problem) {
    double cost = 0;
    for (const auto& obs : problem.observations) {
        Projection<double> proj;
        if (!try_project(problem.cameras[obs.camera_index], problem.points[obs.point_index],
                         proj)) {
            continue;  // flagged via ba_residual_stats
        }
        cost += obs.weight * (proj.y - obs.y).squaredNorm();
    }
    return cost;
}

ResidualStats ba_residual_stats(const BAProblem& problem) {
    ResidualStats stats;
    double norm_sum = 0;
    double sq_sum = 0;
    for (const auto& obs : problem.observations) {
        Projection<double> proj;
        if (!try_project(problem.cameras[obs.camera_index], problem.points[obs.point_index],
                         proj)) {
            ++stats.n_excluded;
            continue;
        }
        const double sq = (proj.y - obs.y).squaredNorm();
        stats.cost += obs.weight * sq;
        sq_sum += sq;
        norm_sum += std::sqrt(sq);
        ++stats.n_used;
    }
    if (stats.n_used > 0) {
        stats.mean_px = norm_sum / stats.n_used;
        stats.rms_px = std::sqrt(sq_sum / (2.0 * stats.n_used));
    }
    return stats;
}

namespace {

// Weighted residuals and Jacobian blocks at the current parameters. Frozen
// camera columns are zeroed, which fixes those parameters: their normal
// equations reduce to lambda * delta = 0.
struct Linearization {
    double cost = 0;
    int n_excluded = 0;
    double gradient_inf_norm = 0;
    std::vector<Eigen::Matrix<double, 2, 8>> A;  // per observation, camera block
    std::vector<Eigen::Matrix<double, 2, 3>> B;  // per observation, point block
    std::vector<Eigen::Vector2d> r;
    Eigen::VectorXd g_cam;  // 8 per camera
    Eigen::VectorXd g_pt;   // 3 per point
    std::vector<std::vector<int>> obs_of_point;
};

Linearization linearize(const BAProblem& problem) {
    const int n_cam = static_cast<int>(problem.cameras.size());
    const int n_pt = static_cast<int>(problem.points.size());
    const int n_obs = static_cast<int>(problem.observations.size());

    Linearization lin;
    lin.A.assign(n_obs, Eigen::Matrix<double, 2, 8>::Zero());
    lin.B.assign(n_obs, Eigen::Matrix<double, 2, 3>::Zero());
    lin.r.assign(n_obs, Eigen::Vector2d::Zero());
    lin.g_cam = Eigen::VectorXd::Zero(8 * n_cam);
    lin.g_pt = Eigen::VectorXd::Zero(3 * n_pt);
    lin.obs_of_point.resize(n_pt);

    for (int k = 0; k < n_obs; ++k) {
        const BAObservation& obs = problem.observations[k];
        const Camerad& cam = problem.cameras[obs.camera_index];
        const Eigen::Vector3d& pt = problem.points[obs.point_index];

        Projection<double> proj;
        if (!try_project(cam, pt, proj) || obs.weight == 0) {
            if (obs.weight != 0) ++lin.n_excluded;
            continue;
        }
        const double sw = std::sqrt(obs.weight);
        const Eigen::Matrix<double, 2, 11> J = sw * project_jacobian(cam, pt);
        lin.r[k] = sw * (proj.y - obs.y);
        lin.cost += lin.r[k].squaredNorm();

        lin.A[k] = J.leftCols<8>();
        for (int c = 0; c < 8; ++c) {
            if (problem.frozen[obs.camera_index][c]) lin.A[k].col(c).setZero();
        }
        lin.B[k] = J.block<2, 3>(0, 8);

        lin.g_cam.segment<8>(8 * obs.camera_index) += lin.A[k].transpose() * lin.r[k];
        lin.g_pt.segment<3>(3 * obs.point_index) += lin.B[k].transpose() * lin.r[k];
        lin.obs_of_point[obs.point_index].push_back(k);
    }
    lin.gradient_inf_norm = std::max(
        lin.g_cam.size() > 0 ? lin.g_cam.cwiseAbs().maxCoeff() : 0.0,
        lin.g_pt.size() > 0 ? lin.g_pt.cwiseAbs().maxCoeff() : 0.0);
    return lin;
}

// Solves [U W; W^T V] u = rhs with U, V damped by lambda, eliminating the
// point blocks (Schur complement). Returns false when the reduced camera
// system is not solvable.
bool solve_damped(const BAProblem& problem, const Linearization& lin, double lambda,
                  const Eigen::VectorXd& rhs_cam, const Eigen::VectorXd& rhs_pt,
                  Eigen::VectorXd& u_cam, Eigen::VectorXd& u_pt) {
    const int n_cam = static_cast<int>(problem.cameras.size());
    const int n_pt = static_cast<int>(problem.points.size());

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(8 * n_cam, 8 * n_cam);
    Eigen::VectorXd reduced_rhs = rhs_cam;

    for (int k = 0; k < static_cast<int>(problem.observations.size()); ++k) {
        const int ci = problem.observations[k].camera_index;
        S.block<8, 8>(8 * ci, 8 * ci) += lin.A[k].transpose() * lin.A[k];
    }
    S.diagonal().array() += lambda;

    std::vector<Eigen::Matrix3d> V_inv(n_pt);
    std::vector<Eigen::Matrix<double, 8, 3>> W;
    for (int j = 0; j < n_pt; ++j) {
        const auto& obs_list = lin.obs_of_point[j];
        Eigen::Matrix3d V = lambda * Eigen::Matrix3d::Identity();
        W.assign(obs_list.size(), Eigen::Matrix<double, 8, 3>::Zero());
        for (size_t m = 0; m < obs_list.size(); ++m) {
            const int k = obs_list[m];
            V += lin.B[k].transpose() * lin.B[k];
            W[m] = lin.A[k].transpose() * lin.B[k];
        }
        V_inv[j] = V.inverse();
        if (!V_inv[j].allFinite()) return false;

        const Eigen::Vector3d v_rhs = V_inv[j] * rhs_pt.segment<3>(3 * j);
        for (size_t m1 = 0; m1 < obs_list.size(); ++m1) {
            const int c1 = problem.observations[obs_list[m1]].camera_index;
            reduced_rhs.segment<8>(8 * c1) -= W[m1] * v_rhs;
            const Eigen::Matrix<double, 8, 3> WV = W[m1] * V_inv[j];
            for (size_t m2 = 0; m2 < obs_list.size(); ++m2) {
                const int c2 = problem.observations[obs_list[m2]].camera_index;
                S.block<8, 8>(8 * c1, 8 * c2) -= WV * W[m2].transpose();
            }
        }
    }

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success) return false;
    u_cam = ldlt.solve(reduced_rhs);
    if (!u_cam.allFinite()) return false;

    u_pt.resize(3 * n_pt);
    for (int j = 0; j < n_pt; ++j) {
        Eigen::Vector3d acc = rhs_pt.segment<3>(3 * j);
        for (const int k : lin.obs_of_point[j]) {
            const int ci = problem.observations[k].camera_index;
            acc -= lin.B[k].transpose() * (lin.A[k] * u_cam.segment<8>(8 * ci));
        }
        u_pt.segment<3>(3 * j) = V_inv[j] * acc;
    }
    return u_pt.allFinite();
}

// Applies a packed delta. Frozen parameters receive a zero delta; skipping
// the quaternion write when its delta is zero keeps them bit-identical.
void apply_delta(BAProblem& problem, const Eigen::VectorXd& delta) {
    const int n_cam = static_cast<int>(problem.cameras.size());
    for (int i = 0; i < n_cam; ++i) {
        Camerad& cam = problem.cameras[i];
        const Eigen::Vector4d dq = delta.segment<4>(8 * i);
        if (!dq.isZero(0.0)) cam.set_q(cam.q() + dq);
        const Eigen::Vector3d dt = delta.segment<3>(8 * i + 4);
        if (!dt.isZero(0.0)) cam.set_t(cam.t() + dt);
        if (delta[8 * i + 7] != 0) cam.set_log_f(cam.log_f() + delta[8 * i + 7]);
    }
    for (size_t j = 0; j < problem.points.size(); ++j) {
        problem.points[j] += delta.segment<3>(8 * n_cam + 3 * j);
    }
}

}  // namespace

Eigen::VectorXd lm_step_delta(const BAProblem& problem, double lambda) {
    const Linearization lin = linearize(problem);
    Eigen::VectorXd u_cam, u_pt;
    if (!solve_damped(problem, lin, lambda, -lin.g_cam, -lin.g_pt, u_cam, u_pt)) {
        throw SolverError("lm_step_delta: reduced camera system not solvable");
    }
    Eigen::VectorXd delta(problem.num_parameters());
    delta << u_cam, u_pt;
    return delta;
}

LMState lm_solve(BAProblem& problem, const LMOptions& options) {
    problem.validate();

    LMState state;
    state.lambda = options.lambda_init;

    Linearization lin = linearize(problem);
    state.cost = lin.cost;
    state.gradient_inf_norm = lin.gradient_inf_norm;
    state.excluded_observations = lin.n_excluded;

    int consecutive_small = 0;
    while (state.step < options.max_steps) {
        if (lin.gradient_inf_norm < options.gradient_tol) {
            state.converged = true;
            state.reason = "gradient below tolerance";
            return state;
        }

        // Trial loop at fixed linearization: raise damping until a step
        // lowers the cost or the damping cap is reached.
        bool accepted = false;
        BAProblem trial = problem;
        double trial_cost = 0;
        bool solver_failed_at_max = false;
        for (;;) {
            Eigen::VectorXd u_cam, u_pt;
            const bool solved =
                solve_damped(problem, lin, state.lambda, -lin.g_cam, -lin.g_pt, u_cam, u_pt);
            if (solved) {
                trial = problem;
                Eigen::VectorXd delta(problem.num_parameters());
                delta << u_cam, u_pt;
                apply_delta(trial, delta);
                trial_cost = ba_cost(trial);
                if (std::isfinite(trial_cost) && trial_cost <= lin.cost) {
                    accepted = true;
                    state.history.push_back({state.step + 1, state.lambda, trial_cost, true});
                    break;
                }
            }
            state.history.push_back({state.step + 1, state.lambda, lin.cost, false});
            if (state.lambda >= options.lambda_max) {
                solver_failed_at_max = !solved;
                break;
            }
            state.lambda = std::min(state.lambda * 10.0, options.lambda_max);
        }

        if (!accepted) {
            if (solver_failed_at_max) {
                throw SolverError(
                    "lm_solve: reduced camera system singular at maximum damping "
                    "(lambda = " + std::to_string(state.lambda) + ")");
            }
            state.converged = false;
            state.reason = "no cost decrease at maximum damping";
            return state;
        }

        const double previous_cost = lin.cost;
        problem = std::move(trial);
        ++state.step;
        state.lambda = std::max(state.lambda / 10.0, options.lambda_min);

        lin = linearize(problem);
        state.cost = lin.cost;
        state.gradient_inf_norm = lin.gradient_inf_norm;
        state.excluded_observations = lin.n_excluded;

        const double rel_decrease =
            (previous_cost - state.cost) / std::max(previous_cost, 1e-300);
        consecutive_small = rel_decrease < options.rel_decrease_tol ? consecutive_small + 1 : 0;
        if (consecutive_small >= 2) {
            state.converged = true;
            state.reason = "relative cost decrease below tolerance";
            return state;
        }
    }
    state.converged = false;
    state.reason = "maximum step count reached";
    return state;
}

std::vector<Eigen::Vector2d> lm_gradient_wrt_observations(
    const BAProblem& problem, double lambda, const Eigen::VectorXd& downstream_grad) {
    if (downstream_grad.size() != problem.num_parameters()) {
        throw ContractError("lm_gradient_wrt_observations: gradient size mismatch");
    }
    const Linearization lin = linearize(problem);
    if (!(lin.gradient_inf_norm < 1e-8)) {
        throw ContractError(
            "lm_gradient_wrt_observations: problem not at a converged optimum "
            "(gradient infinity norm >= 1e-8)");
    }

    const int n_cam = static_cast<int>(problem.cameras.size());
    Eigen::VectorXd rhs_cam = downstream_grad.head(8 * n_cam);
    Eigen::VectorXd rhs_pt = downstream_grad.tail(3 * static_cast<int>(problem.points.size()));
    for (int i = 0; i < n_cam; ++i) {
        for (int c = 0; c < 8; ++c) {
            if (problem.frozen[i][c]) rhs_cam[8 * i + c] = 0;
        }
    }

    Eigen::VectorXd u_cam, u_pt;
    if (!solve_damped(problem, lin, lambda, rhs_cam, rhs_pt, u_cam, u_pt)) {
        throw SolverError("lm_gradient_wrt_observations: adjoint system not solvable");
    }

    // d(loss)/dy_k = sqrt(w_k) * J_k u, using the already weighted blocks.
    std::vector<Eigen::Vector2d> gradient(problem.observations.size());
    for (size_t k = 0; k < problem.observations.size(); ++k) {
        const BAObservation& obs = problem.observations[k];
        const Eigen::Vector2d ju = lin.A[k] * u_cam.segment<8>(8 * obs.camera_index) +
                                   lin.B[k] * u_pt.segment<3>(3 * obs.point_index);
        gradient[k] = std::sqrt(obs.weight) * ju;
    }
    return gradient;
}

void write_lm_history_csv(const LMState& state, std::ostream& out) {
    out << "step,lambda,cost,accepted\n";
    for (const auto& rec : state.history) {
        out << rec.step << ',' << rec.lambda << ',' << rec.cost << ','
            << (rec.accepted ? 1 : 0) << '\n';
    }
}

}  // namespace sfm
