#pragma once

#include <Eigen/Core>
#include <vector>

#include "sfm/camera.hpp"

namespace sfm {

/// Relative rotation / translation angular errors for one unordered frame
/// pair. RTE is invalid (and flagged) when the ground-truth baseline is
/// degenerate (norm < 1e-9); a degenerate predicted baseline against a valid
/// ground truth scores the worst-case 180 degrees.
struct PairError {
    int frame_a = 0;
    int frame_b = 0;
    double rre_deg = 0;
    double rte_deg = 0;
    bool rte_valid = true;
    bool gt_degenerate = false;
};

/// Per-pair max(RRE, RTE): a pair is accurate at threshold tau iff both
/// errors are below tau ("the lower of the two accuracies").
double pair_max_error(const PairError& pair);

/// Errors over every unordered pair. Relative quantities are invariant to any
/// global rigid or similarity transform of the predictions, so no alignment
/// is required. Throws on mismatched counts.
std::vector<PairError> pairwise_errors(const std::vector<Camerad>& predicted,
                                       const std::vector<Camerad>& ground_truth);

/// Area under the accuracy-threshold curve over (0, max_threshold_deg],
/// integrated exactly from the step function of sorted errors; in [0, 100].
double auc(const std::vector<PairError>& pairs, double max_threshold_deg);
double auc_from_errors(const std::vector<double>& errors, double max_threshold_deg);

/// Accuracy fraction at a single threshold (strict comparison), in [0, 100].
double accuracy_at(const std::vector<double>& errors, double threshold_deg);

/// Step points (threshold, accuracy %) of the accuracy curve for plotting.
std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& errors,
                                                      double max_threshold_deg);

struct CloudMetric {
    double threshold = 0;
    double accuracy_pct = 0;      // predicted points within threshold of some GT point
    double completeness_pct = 0;  // GT points within threshold of some predicted point
};

/// Exact nearest-neighbor (quadratic scan) accuracy/completeness at the given
/// distance thresholds. Both clouds must be non-empty and in a common frame.
std::vector<CloudMetric> cloud_accuracy_completeness(
    const std::vector<Eigen::Vector3d>& predicted,
    const std::vector<Eigen::Vector3d>& ground_truth, const std::vector<double>& thresholds);

/// Similarity transform x_dst = scale * R * x_src + t.
struct Similarity {
    double scale = 1;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
        return scale * (rotation * x) + translation;
    }
};

/// Umeyama alignment of predicted camera centers onto ground-truth centers.
/// Needs at least 3 cameras.
Similarity align_camera_centers(const std::vector<Camerad>& predicted,
                                const std::vector<Camerad>& ground_truth);

/// Re-expresses a camera after its world has been transformed by `sim`;
/// projections of transformed points are unchanged.
Camerad transform_camera(const Camerad& camera, const Similarity& sim);

}  // namespace sfm
