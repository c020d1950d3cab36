#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfm/scene.hpp"
#include "sfm/synthetic.hpp"

namespace sfm {

/// Major format version written into every JSON artifact; readers reject any
/// other major.
inline constexpr int kFormatMajor = 1;
inline constexpr const char* kFormatVersion = "1.0";

/// Ground-truth sidecar a scene file may carry for evaluation and tests. The
/// reconstruction pipeline never consumes it.
struct GroundTruth {
    std::vector<Camerad> cameras;                        // per frame
    std::vector<Eigen::Vector3d> points;                 // per track
    std::vector<std::vector<char>> outlier_flags;        // optional, per track/obs
    std::vector<std::vector<Eigen::Vector2d>> ideal_obs; // optional, per track/obs
};

struct SceneFile {
    Scene scene;
    std::optional<GroundTruth> ground_truth;
};

/// Track-file schema (JSON, pixels, origin top-left, x rightward, y downward):
/// { format_version, frames: [{id, width, height}],
///   tracks: [{query: [x, y], obs: [{frame, x, y, v, sx, sy}]}] }
/// Missing v defaults to 1.0 and missing sx/sy to 0.5 px. Throws ParseError
/// naming the offending track, or ReferentialError for an unknown frame id.
Scene load_tracks(const std::string& path);

/// Canonical serialization: loading and re-saving a canonically formatted
/// file is byte-identical.
void save_tracks(const Scene& scene, const std::string& path);

SceneFile load_scene_file(const std::string& path);
void save_scene_file(const SceneFile& file, const std::string& path);

/// Bundles a generated scene with its sidecar for saving.
SceneFile make_scene_file(const SyntheticScene& synthetic);

/// cameras.json: { format_version, frames_total, cameras: [{frame, width,
/// height, qw, qx, qy, qz, tx, ty, tz, f, px, py}] }. Unregistered frames are
/// simply absent.
void save_cameras_json(const CameraSet& cameras, const std::vector<FrameInfo>& frames,
                       const std::string& path);
CameraSet load_cameras_json(const std::string& path);

}  // namespace sfm
