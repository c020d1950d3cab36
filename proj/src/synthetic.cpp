#include "sfm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "sfm/epipolar.hpp"
#include "sfm/errors.hpp"

namespace sfm {

void SyntheticConfig::validate() const {
    if (n_frames < 2) throw GenerationError("synthetic: n_frames must be >= 2");
    if (n_tracks < 8) throw GenerationError("synthetic: n_tracks must be >= 8");
    if (noise_px < 0) throw GenerationError("synthetic: noise_px must be >= 0");
    if (outlier_frac < 0 || outlier_frac >= 1) {
        throw GenerationError("synthetic: outlier_frac must be in [0, 1)");
    }
    if (occlusion_frac < 0 || occlusion_frac >= 1) {
        throw GenerationError("synthetic: occlusion_frac must be in [0, 1)");
    }
    if (outlier_frac + occlusion_frac >= 1) {
        throw GenerationError("synthetic: outlier_frac + occlusion_frac must be < 1");
    }
    if (width <= 0 || height <= 0) throw GenerationError("synthetic: image size must be positive");
    if (focal_px < 0) throw GenerationError("synthetic: focal_px must be >= 0");
}

namespace {

// World-to-camera rotation for a camera at `center` looking at `target`,
// with +y pointing down in the image as usual in computer vision.
Eigen::Matrix3d look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
    const Eigen::Vector3d forward = (target - center).normalized();
    const Eigen::Vector3d up_world(0, 1, 0);
    const Eigen::Vector3d right = forward.cross(up_world).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d R;
    R.row(0) = right;
    R.row(1) = down;
    R.row(2) = forward;
    return R;
}

}  // namespace

SyntheticScene generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);

    const double focal = config.focal_px > 0
                             ? config.focal_px
                             : 1.2 * static_cast<double>(std::max(config.width, config.height));
    const double log_f = std::log(focal);
    const Eigen::Vector2d pp = Camerad::center_principal_point(config.width, config.height);

    SyntheticScene out;
    out.scene.frames.resize(config.n_frames);
    for (int i = 0; i < config.n_frames; ++i) {
        out.scene.frames[i] = {i, config.width, config.height};
    }

    // Point cloud uniform in a unit-scale box.
    std::uniform_real_distribution<double> box(-0.5, 0.5);
    out.gt_points.resize(config.n_tracks);
    for (auto& p : out.gt_points) p = Eigen::Vector3d(box(rng), box(rng), box(rng));

    // Cameras on a jittered orbit around the cloud, looking at the origin.
    std::uniform_real_distribution<double> azimuth_jitter(-0.1, 0.1);
    std::uniform_real_distribution<double> radius_dist(3.5, 4.5);
    std::uniform_real_distribution<double> elevation_dist(-0.3, 0.3);
    out.gt_cameras.reserve(config.n_frames);
    for (int i = 0; i < config.n_frames; ++i) {
        const double az =
            2.0 * EIGEN_PI * i / config.n_frames + azimuth_jitter(rng);
        const double radius = radius_dist(rng);
        const double el = elevation_dist(rng);
        const Eigen::Vector3d center(radius * std::cos(az) * std::cos(el),
                                     radius * std::sin(el),
                                     radius * std::sin(az) * std::cos(el));
        const Eigen::Matrix3d R = look_at(center, Eigen::Vector3d::Zero());
        out.gt_cameras.push_back(Camerad::from_rotation(R, -R * center, log_f, pp));
    }

    // Exact projections: the pre-corruption ground truth.
    const double sigma = std::max(config.noise_px, 0.25);
    out.scene.tracks.resize(config.n_tracks);
    out.ideal_obs.resize(config.n_tracks);
    for (int j = 0; j < config.n_tracks; ++j) {
        Track& track = out.scene.tracks[j];
        track.observations.resize(config.n_frames);
        out.ideal_obs[j].resize(config.n_frames);
        for (int i = 0; i < config.n_frames; ++i) {
            const auto proj = project(out.gt_cameras[i], out.gt_points[j]);
            out.ideal_obs[j][i] = proj.y;
            track.observations[i] = {i, proj.y, 1.0, Eigen::Vector2d(sigma, sigma)};
        }
    }

    // Corruption. Noise first (drawn in a fixed order), then outlier
    // replacement, then occlusion on the remaining observations.
    if (config.noise_px > 0) {
        std::normal_distribution<double> noise(0.0, config.noise_px);
        for (auto& track : out.scene.tracks) {
            for (auto& obs : track.observations) {
                obs.y[0] += noise(rng);
                obs.y[1] += noise(rng);
            }
        }
    }

    const std::int64_t total = static_cast<std::int64_t>(config.n_tracks) * config.n_frames;
    const std::int64_t n_outliers = std::llround(config.outlier_frac * total);
    const std::int64_t n_occluded = std::llround(config.occlusion_frac * total);
    std::vector<std::int64_t> order(total);
    for (std::int64_t k = 0; k < total; ++k) order[k] = k;
    for (std::int64_t k = 0; k < total - 1; ++k) {
        std::uniform_int_distribution<std::int64_t> pick(k, total - 1);
        std::swap(order[k], order[pick(rng)]);
    }

    out.outlier_flags.assign(config.n_tracks, std::vector<char>(config.n_frames, 0));
    std::uniform_real_distribution<double> img_x(0.0, config.width);
    std::uniform_real_distribution<double> img_y(0.0, config.height);
    for (std::int64_t k = 0; k < n_outliers; ++k) {
        const int j = static_cast<int>(order[k] / config.n_frames);
        const int i = static_cast<int>(order[k] % config.n_frames);
        out.scene.tracks[j].observations[i].y = Eigen::Vector2d(img_x(rng), img_y(rng));
        out.outlier_flags[j][i] = 1;
    }
    for (std::int64_t k = n_outliers; k < n_outliers + n_occluded; ++k) {
        const int j = static_cast<int>(order[k] / config.n_frames);
        const int i = static_cast<int>(order[k] % config.n_frames);
        out.scene.tracks[j].observations[i].v = 0.0;
    }

    // The tracker seeds tracks from frame 0 by default.
    for (auto& track : out.scene.tracks) track.query_point = track.observations[0].y;

    for (int i = 0; i < config.n_frames; ++i) {
        int visible = 0;
        for (const auto& track : out.scene.tracks) {
            const TrackObservation* obs = track.observation_in(i);
            if (obs != nullptr && is_visible(*obs)) ++visible;
        }
        if (visible < 8) {
            throw GenerationError("synthetic: frame " + std::to_string(i) +
                                  " has only " + std::to_string(visible) +
                                  " visible tracks (need 8 for the 8-point solver)");
        }
    }

    out.scene.validate();
    return out;
}

}  // namespace sfm
