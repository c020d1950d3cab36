#include "sfm/triangulation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "sfm/errors.hpp"

namespace sfm {

TriangulationResult triangulate_dlt(const std::vector<TriangulationObservation>& observations,
                                    bool weighted) {
    const int n = static_cast<int>(observations.size());
    if (n < 2) {
        throw ArityError("triangulate_dlt: need at least 2 observations, got " +
                         std::to_string(n));
    }

    Eigen::MatrixXd A(2 * n, 4);
    for (int i = 0; i < n; ++i) {
        const auto& obs = observations[i];
        const Camerad& cam = *obs.camera;
        Eigen::Matrix<double, 3, 4> M;
        M.leftCols<3>() = cam.rotation();
        M.col(3) = cam.t();
        const Eigen::Vector2d u = (obs.y - cam.pp()) / cam.focal();
        A.row(2 * i) = u[0] * M.row(2) - M.row(0);
        A.row(2 * i + 1) = u[1] * M.row(2) - M.row(1);
        if (weighted) {
            A.row(2 * i) /= obs.sigma[0];
            A.row(2 * i + 1) /= obs.sigma[1];
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const Eigen::Vector4d x = svd.matrixV().col(3);

    TriangulationResult result;
    result.condition = sv[2] / std::max(sv[3], 1e-15 * sv[0]);
    if (std::abs(x[3]) < 1e-12) {
        throw AtInfinityError("triangulate_dlt: point at infinity (|w| < 1e-12)");
    }
    result.point = x.head<3>() / x[3];
    return result;
}

TriangulationResult triangulate_dlt(const Track& track, const CameraSet& cameras,
                                    const std::vector<char>* keep, bool weighted) {
    std::vector<TriangulationObservation> usable;
    usable.reserve(track.observations.size());
    for (size_t i = 0; i < track.observations.size(); ++i) {
        const auto& obs = track.observations[i];
        if (keep != nullptr ? !(*keep)[i] : !is_visible(obs)) continue;
        if (obs.frame_id >= static_cast<int>(cameras.size()) ||
            !cameras[obs.frame_id].has_value()) {
            continue;
        }
        usable.push_back({&*cameras[obs.frame_id], obs.y, obs.sigma});
    }
    return triangulate_dlt(usable, weighted);
}

double triangulation_angle(const Eigen::Vector3d& x, const Camerad& cam_a,
                           const Camerad& cam_b) {
    const Eigen::Vector3d ray_a = cam_a.center() - x;
    const Eigen::Vector3d ray_b = cam_b.center() - x;
    if (ray_a.norm() < 1e-12 || ray_b.norm() < 1e-12) {
        throw DegeneracyError("triangulation_angle: point coincides with a camera center");
    }
    return angle_between_deg(ray_a, ray_b);
}

RayPointGeometry ray_point_geometry(const Eigen::Vector3d& x, const Camerad& camera,
                                    const Eigen::Vector2d& y) {
    const Eigen::Vector3d center = camera.center();
    const Eigen::Vector3d dir_cam(
        (y[0] - camera.pp()[0]) / camera.focal(),
        (y[1] - camera.pp()[1]) / camera.focal(), 1.0);
    const Eigen::Vector3d dir = (camera.rotation().transpose() * dir_cam).normalized();

    RayPointGeometry result;
    const double s = dir.dot(x - center);
    if (s <= 0) {
        result.nearest = center;
        result.clamped = true;
    } else {
        result.nearest = center + s * dir;
    }
    result.distance = (x - result.nearest).norm();
    return result;
}

}  // namespace sfm
