#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfm/pipeline.hpp"
#include "sfm/scene.hpp"

namespace sfm {

/// Writes cameras.txt (SIMPLE_PINHOLE), images.txt (QW QX QY QZ TX TY TZ,
/// world-to-camera) and points3D.txt with track back-references, following the
/// COLMAP text layout. Numbers use the shortest round-trip representation.
/// Returns the frames that were omitted because they are unregistered.
std::vector<int> export_colmap(const Scene& scene, const ReconstructionResult& result,
                               const std::string& dir);

struct ColmapObservation {
    int frame_id = 0;
    Eigen::Vector2d y;
    std::int64_t point3d_id = -1;
};

struct ColmapReconstruction {
    CameraSet cameras;                                  // indexed by frame
    std::vector<std::int64_t> point_ids;
    std::vector<Eigen::Vector3d> points;                // aligned with point_ids
    std::vector<std::vector<ColmapObservation>> image_points;  // indexed by frame
};

/// Reads the three files written by export_colmap (round-trip checks, interop).
ColmapReconstruction import_colmap(const std::string& dir);

}  // namespace sfm
