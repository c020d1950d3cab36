#pragma once

#include <Eigen/Core>
#include <vector>

#include "sfm/scene.hpp"

namespace sfm {

struct TriangulationResult {
    Eigen::Vector3d point;
    /// Ratio of the two smallest singular values of the design matrix (the
    /// denominator floored at 1e-15 of the largest). Higher values mean a
    /// better-determined point; degenerate geometry drives it toward zero.
    double condition = 0.0;
};

/// One observation feeding the DLT stack: the observing camera, the pixel, and
/// the per-axis sigma used when confidence weighting is enabled.
struct TriangulationObservation {
    const Camerad* camera;
    Eigen::Vector2d y;
    Eigen::Vector2d sigma = Eigen::Vector2d(1.0, 1.0);
};

/// Closed-form multi-view DLT: least-squares homogeneous solve over two
/// stacked rows per observation, in normalized camera coordinates. When
/// `weighted` is set, each axis row is scaled by 1/sigma (inverse-variance
/// weighting consistent with the tracker's confidence model; default off).
/// Throws ArityError (< 2 observations) or AtInfinityError (|w| < 1e-12).
TriangulationResult triangulate_dlt(const std::vector<TriangulationObservation>& observations,
                                    bool weighted = false);

/// Track-level wrapper: gathers the track's observations in registered
/// frames. `keep` (optional, aligned with track.observations) selects the
/// usable observations; without it, visibility >= 0.5 is required.
TriangulationResult triangulate_dlt(const Track& track, const CameraSet& cameras,
                                    const std::vector<char>* keep = nullptr,
                                    bool weighted = false);

/// Angle in degrees subtended at point x by the two camera centers, in
/// [0, 180]. Throws DegeneracyError when x coincides with a center.
double triangulation_angle(const Eigen::Vector3d& x, const Camerad& cam_a,
                           const Camerad& cam_b);

struct RayPointGeometry {
    double distance = 0.0;           // |x - nearest|
    Eigen::Vector3d nearest;         // closest point on the clamped ray
    bool clamped = false;            // nearest fell behind the center
};

/// Perpendicular geometry between a 3D point and the camera ray through pixel
/// y. The ray parameter is clamped at zero, so points behind the camera map to
/// the camera center.
RayPointGeometry ray_point_geometry(const Eigen::Vector3d& x, const Camerad& camera,
                                    const Eigen::Vector2d& y);

}  // namespace sfm
