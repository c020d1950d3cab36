#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sfm/scene.hpp"

namespace sfm {

struct SyntheticConfig {
    int n_frames = 10;
    int n_tracks = 300;
    double noise_px = 0.0;
    double outlier_frac = 0.0;    // replaced by uniform in-image points, visibility kept at 1
    double occlusion_frac = 0.0;  // marked v = 0
    std::uint64_t seed = 0;
    int width = 1024;
    int height = 768;
    double focal_px = 0.0;        // 0 selects 1.2 * max(width, height)

    void validate() const;
};

/// A generated scene together with its ground truth sidecar. The sidecar is
/// for test assertions and evaluation only; the reconstruction pipeline never
/// reads it.
struct SyntheticScene {
    Scene scene;
    std::vector<Camerad> gt_cameras;                       // per frame
    std::vector<Eigen::Vector3d> gt_points;                // per track
    std::vector<std::vector<Eigen::Vector2d>> ideal_obs;   // exact projections, per track
    std::vector<std::vector<char>> outlier_flags;          // per track per observation
};

/// Cameras on a randomized orbit viewing a unit-box point cloud; every stored
/// ground-truth observation satisfies project() exactly before corruption.
/// Corruption order: Gaussian noise (std noise_px per axis), then exactly
/// round(outlier_frac * N) observations replaced by uniform in-image points
/// (visibility kept at 1, adversarial), then round(occlusion_frac * N) of the
/// remaining observations marked v = 0. Sigma is max(noise_px, 0.25) for all
/// observations. Deterministic under seed. Throws GenerationError when any
/// camera ends up with fewer than 8 visible tracks.
SyntheticScene generate_synthetic(const SyntheticConfig& config);

}  // namespace sfm
