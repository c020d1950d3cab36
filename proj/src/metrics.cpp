#include "sfm/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "sfm/errors.hpp"

namespace sfm {

double pair_max_error(const PairError& pair) {
    return pair.rte_valid ? std::max(pair.rre_deg, pair.rte_deg) : pair.rre_deg;
}

std::vector<PairError> pairwise_errors(const std::vector<Camerad>& predicted,
                                       const std::vector<Camerad>& ground_truth) {
    if (predicted.size() != ground_truth.size()) {
        throw ContractError("pairwise_errors: camera count mismatch");
    }
    const int n = static_cast<int>(predicted.size());
    std::vector<PairError> pairs;
    pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            PairError pe;
            pe.frame_a = i;
            pe.frame_b = j;

            const Eigen::Matrix3d R_pred =
                predicted[j].rotation() * predicted[i].rotation().transpose();
            const Eigen::Matrix3d R_gt =
                ground_truth[j].rotation() * ground_truth[i].rotation().transpose();
            pe.rre_deg = rotation_angle_deg<double>(R_pred * R_gt.transpose());

            const Eigen::Vector3d b_gt = ground_truth[j].t() - R_gt * ground_truth[i].t();
            const Eigen::Vector3d b_pred = predicted[j].t() - R_pred * predicted[i].t();
            if (b_gt.norm() < 1e-9) {
                pe.rte_valid = false;
                pe.gt_degenerate = true;
            } else if (b_pred.norm() < 1e-12) {
                pe.rte_deg = 180.0;  // prediction failed to produce a baseline
            } else {
                pe.rte_deg = angle_between_deg(b_pred, b_gt);
            }
            pairs.push_back(pe);
        }
    }
    return pairs;
}

double auc_from_errors(const std::vector<double>& errors, double max_threshold_deg) {
    if (errors.empty()) throw ContractError("auc: empty error list");
    if (!(max_threshold_deg > 0)) throw ContractError("auc: threshold must be positive");
    // accuracy(tau) = |{e < tau}| / N integrates to sum of max(0, tau_max - e).
    double integral = 0;
    for (const double e : errors) {
        integral += std::max(0.0, 1.0 - e / max_threshold_deg);
    }
    return 100.0 * integral / static_cast<double>(errors.size());
}

double auc(const std::vector<PairError>& pairs, double max_threshold_deg) {
    std::vector<double> errors;
    errors.reserve(pairs.size());
    for (const auto& p : pairs) errors.push_back(pair_max_error(p));
    return auc_from_errors(errors, max_threshold_deg);
}

double accuracy_at(const std::vector<double>& errors, double threshold_deg) {
    if (errors.empty()) throw ContractError("accuracy_at: empty error list");
    std::int64_t hits = 0;
    for (const double e : errors) hits += e < threshold_deg ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& errors,
                                                      double max_threshold_deg) {
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<std::pair<double, double>> curve;
    curve.emplace_back(0.0, 0.0);
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] > max_threshold_deg) break;
        curve.emplace_back(sorted[i], 100.0 * static_cast<double>(i + 1) / n);
    }
    curve.emplace_back(max_threshold_deg,
                       accuracy_at(errors, max_threshold_deg));
    return curve;
}

std::vector<CloudMetric> cloud_accuracy_completeness(
    const std::vector<Eigen::Vector3d>& predicted,
    const std::vector<Eigen::Vector3d>& ground_truth, const std::vector<double>& thresholds) {
    if (predicted.empty() || ground_truth.empty()) {
        throw ContractError("cloud_accuracy_completeness: empty cloud");
    }
    // Exact nearest neighbor by quadratic scan; fine at desk scale.
    auto nearest_distances = [](const std::vector<Eigen::Vector3d>& from,
                                const std::vector<Eigen::Vector3d>& to) {
        std::vector<double> result(from.size());
        for (size_t i = 0; i < from.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, (from[i] - q).squaredNorm());
            result[i] = std::sqrt(best);
        }
        return result;
    };
    const std::vector<double> pred_to_gt = nearest_distances(predicted, ground_truth);
    const std::vector<double> gt_to_pred = nearest_distances(ground_truth, predicted);

    std::vector<CloudMetric> metrics;
    metrics.reserve(thresholds.size());
    for (const double tau : thresholds) {
        CloudMetric m;
        m.threshold = tau;
        std::int64_t acc = 0, comp = 0;
        for (const double d : pred_to_gt) acc += d <= tau ? 1 : 0;
        for (const double d : gt_to_pred) comp += d <= tau ? 1 : 0;
        m.accuracy_pct = 100.0 * static_cast<double>(acc) / predicted.size();
        m.completeness_pct = 100.0 * static_cast<double>(comp) / ground_truth.size();
        metrics.push_back(m);
    }
    return metrics;
}

Similarity align_camera_centers(const std::vector<Camerad>& predicted,
                                const std::vector<Camerad>& ground_truth) {
    if (predicted.size() != ground_truth.size()) {
        throw ContractError("align_camera_centers: camera count mismatch");
    }
    if (predicted.size() < 3) {
        throw ContractError("align_camera_centers: need at least 3 cameras");
    }
    Eigen::Matrix3Xd src(3, predicted.size());
    Eigen::Matrix3Xd dst(3, predicted.size());
    for (size_t i = 0; i < predicted.size(); ++i) {
        src.col(i) = predicted[i].center();
        dst.col(i) = ground_truth[i].center();
    }
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
    Similarity sim;
    sim.scale = std::cbrt(T.topLeftCorner<3, 3>().determinant());
    sim.rotation = T.topLeftCorner<3, 3>() / sim.scale;
    sim.translation = T.topRightCorner<3, 1>();
    return sim;
}

Camerad transform_camera(const Camerad& camera, const Similarity& sim) {
    const Eigen::Matrix3d R_new = camera.rotation() * sim.rotation.transpose();
    const Eigen::Vector3d center_new = sim.apply(camera.center());
    return Camerad::from_rotation(R_new, -R_new * center_new, camera.log_f(), camera.pp());
}

}  // namespace sfm
