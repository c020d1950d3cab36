#include "sfm/filtering.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>
#include <optional>

#include "sfm/epipolar.hpp"
#include "sfm/errors.hpp"
#include "sfm/triangulation.hpp"

namespace sfm {

FilterConfig FilterConfig::disabled() {
    FilterConfig config;
    config.v_min = 0.0;
    config.sigma_max_px = std::numeric_limits<double>::infinity();
    config.sampson_factor = std::numeric_limits<double>::infinity();
    config.min_tri_angle_deg = 0.0;
    config.max_reproj_px = std::numeric_limits<double>::infinity();
    config.min_track_len = 0;
    return config;
}

std::int64_t FilterMask::surviving_observations() const {
    std::int64_t n = 0;
    for (size_t t = 0; t < keep_track.size(); ++t) {
        if (!keep_track[t]) continue;
        for (const char k : keep_obs[t]) n += k != 0;
    }
    return n;
}

std::int64_t FilterMask::surviving_tracks() const {
    std::int64_t n = 0;
    for (const char k : keep_track) n += k != 0;
    return n;
}

std::string FilterMask::to_json() const {
    nlohmann::json j;
    j["keep_track"] = keep_track;
    j["keep_obs"] = keep_obs;
    j["dropped"] = {
        {"visibility", dropped_visibility},
        {"sigma", dropped_sigma},
        {"sampson", dropped_sampson},
        {"unregistered", dropped_unregistered},
        {"reprojection", dropped_reprojection},
        {"tracks_short", dropped_tracks_short},
        {"tracks_angle", dropped_tracks_angle},
    };
    j["surviving_observations"] = surviving_observations();
    j["surviving_tracks"] = surviving_tracks();
    return j.dump(2);
}

namespace {

FilterMask fresh_mask(const Scene& scene, const FilterMask* prior) {
    if (prior != nullptr) {
        FilterMask mask;
        mask.keep_track = prior->keep_track;
        mask.keep_obs = prior->keep_obs;
        return mask;
    }
    FilterMask mask;
    mask.keep_track.assign(scene.tracks.size(), 1);
    mask.keep_obs.resize(scene.tracks.size());
    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        mask.keep_obs[t].assign(scene.tracks[t].observations.size(), 1);
    }
    return mask;
}

// Epipolar matrices from query to every registered frame under one camera
// set; nullopt for unregistered frames and degenerate (zero) baselines.
std::vector<std::optional<Eigen::Matrix3d>> essential_vs_query(const CameraSet& cameras,
                                                               int query_frame) {
    std::vector<std::optional<Eigen::Matrix3d>> E(cameras.size());
    if (query_frame < 0 || query_frame >= static_cast<int>(cameras.size()) ||
        !cameras[query_frame].has_value()) {
        return E;
    }
    const Camerad& query = *cameras[query_frame];
    for (size_t f = 0; f < cameras.size(); ++f) {
        if (static_cast<int>(f) == query_frame || !cameras[f].has_value()) continue;
        const RelativePose<double> rel = relative_pose(query, *cameras[f]);
        if (rel.degenerate_baseline) continue;
        Eigen::Matrix3d t_hat;
        t_hat << 0, -rel.translation[2], rel.translation[1],
                 rel.translation[2], 0, -rel.translation[0],
                 -rel.translation[1], rel.translation[0], 0;
        E[f] = t_hat * rel.rotation;
    }
    return E;
}

Eigen::Vector2d normalized(const Camerad& cam, const Eigen::Vector2d& y) {
    return (y - cam.pp()) / cam.focal();
}

// True when the observation fails the Sampson test against the anchor under
// this camera set. Untestable situations (no cameras, no anchor, degenerate
// baseline) never drop.
bool sampson_exceeds(const CameraSet& cameras,
                     const std::vector<std::optional<Eigen::Matrix3d>>& E, int query_frame,
                     const Eigen::Vector2d& anchor_px, const TrackObservation& obs,
                     double factor, int width) {
    if (!E[obs.frame_id].has_value()) return false;
    const double threshold = factor / static_cast<double>(width);
    const Eigen::Vector2d a = normalized(*cameras[query_frame], anchor_px);
    const Eigen::Vector2d b = normalized(*cameras[obs.frame_id], obs.y);
    return sampson_error(*E[obs.frame_id], a, b) > threshold;
}

// Track-level requirement: at least one surviving observation pair subtends
// more than min_tri_angle_deg at the track's point.
bool attains_min_angle(const Track& track, const std::vector<char>& keep,
                       const CameraSet& cameras, const Eigen::Vector3d& point,
                       double min_angle_deg) {
    const size_t n = track.observations.size();
    for (size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        const int fi = track.observations[i].frame_id;
        if (!cameras[fi].has_value()) continue;
        for (size_t j = i + 1; j < n; ++j) {
            if (!keep[j]) continue;
            const int fj = track.observations[j].frame_id;
            if (!cameras[fj].has_value()) continue;
            try {
                if (triangulation_angle(point, *cameras[fi], *cameras[fj]) > min_angle_deg) {
                    return true;
                }
            } catch (const DegeneracyError&) {
                // Point on a camera center cannot attest the angle.
            }
        }
    }
    return false;
}

}  // namespace

FilterMask filter_observations(const Scene& scene, const CameraSet& cameras, int query_frame,
                               const FilterConfig& config, const FilterMask* prior,
                               const CameraSet* extra_cameras) {
    FilterMask mask = fresh_mask(scene, prior);
    const auto E_primary = essential_vs_query(cameras, query_frame);
    const auto E_extra = extra_cameras != nullptr
                             ? essential_vs_query(*extra_cameras, query_frame)
                             : std::vector<std::optional<Eigen::Matrix3d>>();

    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        if (!mask.keep_track[t]) continue;
        const Track& track = scene.tracks[t];
        const TrackObservation* anchor = track.observation_in(query_frame);

        for (size_t o = 0; o < track.observations.size(); ++o) {
            if (!mask.keep_obs[t][o]) continue;
            const TrackObservation& obs = track.observations[o];
            if (obs.v < config.v_min) {
                mask.keep_obs[t][o] = 0;
                ++mask.dropped_visibility;
                continue;
            }
            if (obs.sigma[0] > config.sigma_max_px || obs.sigma[1] > config.sigma_max_px) {
                mask.keep_obs[t][o] = 0;
                ++mask.dropped_sigma;
                continue;
            }
            if (!cameras[obs.frame_id].has_value()) {
                mask.keep_obs[t][o] = 0;
                ++mask.dropped_unregistered;
                continue;
            }
            if (anchor != nullptr && obs.frame_id != query_frame) {
                const int width = scene.frames[obs.frame_id].width;
                const bool fails =
                    sampson_exceeds(cameras, E_primary, query_frame, anchor->y, obs,
                                    config.sampson_factor, width) ||
                    (extra_cameras != nullptr &&
                     sampson_exceeds(*extra_cameras, E_extra, query_frame, anchor->y, obs,
                                     config.sampson_factor, width));
                if (fails) {
                    mask.keep_obs[t][o] = 0;
                    ++mask.dropped_sampson;
                    continue;
                }
            }
        }

        int surviving = 0;
        for (const char k : mask.keep_obs[t]) surviving += k != 0;
        if (surviving < config.min_track_len) {
            mask.keep_track[t] = 0;
            ++mask.dropped_tracks_short;
            continue;
        }
        if (config.min_tri_angle_deg > 0 && scene.has_points()) {
            if (!attains_min_angle(track, mask.keep_obs[t], cameras, scene.points[t],
                                   config.min_tri_angle_deg)) {
                mask.keep_track[t] = 0;
                ++mask.dropped_tracks_angle;
            }
        }
    }
    return mask;
}

FilterMask filter_reprojection(const Scene& scene, const CameraSet& cameras,
                               const std::vector<Eigen::Vector3d>& points,
                               const FilterConfig& config, const FilterMask* prior) {
    if (points.size() != scene.tracks.size()) {
        throw ContractError("filter_reprojection: points not aligned with tracks");
    }
    FilterMask mask = fresh_mask(scene, prior);

    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        if (!mask.keep_track[t]) continue;
        const Track& track = scene.tracks[t];

        for (size_t o = 0; o < track.observations.size(); ++o) {
            if (!mask.keep_obs[t][o]) continue;
            const TrackObservation& obs = track.observations[o];
            if (!cameras[obs.frame_id].has_value()) {
                mask.keep_obs[t][o] = 0;
                ++mask.dropped_unregistered;
                continue;
            }
            Projection<double> proj;
            if (!try_project(*cameras[obs.frame_id], points[t], proj) ||
                (proj.y - obs.y).norm() > config.max_reproj_px) {
                mask.keep_obs[t][o] = 0;
                ++mask.dropped_reprojection;
            }
        }

        int surviving = 0;
        for (const char k : mask.keep_obs[t]) surviving += k != 0;
        if (surviving < config.min_track_len) {
            mask.keep_track[t] = 0;
            ++mask.dropped_tracks_short;
        }
    }
    return mask;
}

}  // namespace sfm
