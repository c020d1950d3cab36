#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "sfm/camera.hpp"

namespace sfm {

struct FrameInfo {
    int id = 0;
    int width = 0;
    int height = 0;
};

/// One 2D measurement of a track: pixel location, visibility in [0,1], and a
/// per-axis standard deviation in pixels (confidence is 1/sigma).
struct TrackObservation {
    int frame_id = 0;
    Eigen::Vector2d y = Eigen::Vector2d::Zero();
    double v = 1.0;
    Eigen::Vector2d sigma = Eigen::Vector2d(0.5, 0.5);
};

/// All 2D observations of one 3D point, at most one per frame, ordered by
/// strictly increasing frame id.
struct Track {
    Eigen::Vector2d query_point = Eigen::Vector2d::Zero();
    std::vector<TrackObservation> observations;

    const TrackObservation* observation_in(int frame_id) const {
        for (const auto& obs : observations) {
            if (obs.frame_id == frame_id) return &obs;
            if (obs.frame_id > frame_id) break;
        }
        return nullptr;
    }
};

/// Observations below this visibility are not usable as correspondences for
/// initialization or query selection. Filtering proper applies the stricter,
/// configurable v_min afterwards.
inline constexpr double kVisibleThreshold = 0.5;

inline bool is_visible(const TrackObservation& obs) { return obs.v >= kVisibleThreshold; }

/// Cameras indexed by frame; nullopt marks an unregistered frame.
using CameraSet = std::vector<std::optional<Camerad>>;

/// The unit the pipeline transforms: frame inventory, tracks, and (optionally)
/// cameras and a point cloud aligned index-for-index with the tracks.
struct Scene {
    std::vector<FrameInfo> frames;
    std::vector<Track> tracks;
    std::vector<Camerad> cameras;          // empty, or one per frame
    std::vector<Eigen::Vector3d> points;   // empty, or one per track

    bool has_cameras() const { return !cameras.empty(); }
    bool has_points() const { return !points.empty(); }

    /// Throws on any violated structural invariant.
    void validate() const;
};

}  // namespace sfm
