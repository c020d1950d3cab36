#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sfm/scene.hpp"

namespace sfm {

/// Initial log focal length from the image size: ln(1.2 * max(width, height)),
/// the COLMAP default for uncalibrated images.
double initial_log_focal(int width_px, int height_px);

/// A correspondence in normalized camera coordinates (pixels premultiplied by
/// K^-1). `a` lives in the anchor (query) view, `b` in the other view.
struct Correspondence {
    Eigen::Vector2d a;
    Eigen::Vector2d b;
};

/// Essential-matrix estimate with its cheirality-disambiguated pose.
/// The pose maps anchor-view coordinates into the other view: x_b = R x_a + s t.
struct EssentialCandidate {
    Eigen::Matrix3d E;              // singular values (s, s, 0)
    int inliers = 0;                // cheirality votes (plain) or Sampson inliers (batched)
    Eigen::Matrix3d rotation;
    Eigen::Vector3d translation;    // unit norm
};

/// First-order Sampson distance of a correspondence to the epipolar constraint
/// b^T E a = 0, in normalized-coordinate units. Returns a sentinel max for an
/// epipolar-degenerate denominator (< 1e-18).
double sampson_error(const Eigen::Matrix3d& E, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b);

/// Converts a threshold expressed in pixels into normalized units.
inline double pixels_to_normalized(double threshold_px, double focal_px) {
    return threshold_px / focal_px;
}

/// Hartley-normalized linear 8-point solve, projection onto the essential
/// manifold, and four-way pose disambiguation by cheirality vote over all
/// input pairs. Throws ArityError (< 8 pairs) or DegeneracyError (design
/// matrix conditioning ratio above 1e12).
EssentialCandidate eight_point(const std::vector<Correspondence>& pairs);

/// Per-pair inlier flags under a Sampson threshold (normalized units).
std::vector<char> sampson_inlier_mask(const Eigen::Matrix3d& E,
                                      const std::vector<Correspondence>& pairs,
                                      double threshold);

struct BatchedEightPointOptions {
    int n_sets = 20;
    int set_size = 50;
    double sampson_threshold = 0.0;  // normalized units; required
    bool refit_on_inliers = true;    // refit the winner on its consensus set
};

/// RANSAC-like batched 8-point: n_sets random subsets of set_size pairs are
/// solved independently and each candidate is scored by its Sampson inlier
/// count over all pairs; the candidate with the most inliers wins, ties broken
/// by lower mean inlier Sampson error. Falls back to a single eight_point when
/// fewer than set_size pairs are available. Deterministic under `seed` and
/// independent of the thread count.
EssentialCandidate batched_eight_point(const std::vector<Correspondence>& pairs,
                                       std::uint64_t seed,
                                       const BatchedEightPointOptions& options);

/// Two-view depths of a normalized correspondence under pose (R, t): least
/// squares on lambda_b * b_h = lambda_a * R a_h + t. Returns (lambda_a,
/// lambda_b); both positive means the point is in front of both cameras.
Eigen::Vector2d two_view_depths(const Eigen::Matrix3d& R, const Eigen::Vector3d& t,
                                const Correspondence& pair);

struct FrameRegistration {
    int frame_id = 0;
    bool registered = false;
    std::string failure;            // empty when registered
    int covisible = 0;
    int inliers = 0;
};

struct CameraInitResult {
    CameraSet cameras;              // per frame; nullopt where registration failed
    std::vector<FrameRegistration> status;
    int query_frame = 0;
};

/// Preliminary cameras for every frame from batched 8-point poses against the
/// query frame. The query camera is fixed at the identity pose; each other
/// frame's translation is rescaled so that the median two-view depth of its
/// Sampson-inlier tracks equals 1 in the query frame. Frames sharing fewer
/// than 8 covisible tracks with the query (or with degenerate geometry) are
/// reported unregistered and left empty.
CameraInitResult initialize_cameras(const Scene& scene, int query_frame, std::uint64_t seed);

/// Deterministic per-stream seed derivation (splitmix64 over seed and salt).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace sfm
