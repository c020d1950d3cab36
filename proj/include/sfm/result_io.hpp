#pragma once

#include <string>

#include "sfm/pipeline.hpp"

namespace sfm {

/// Writes <dir>/cameras.json, <dir>/points.ply and <dir>/report.json. The
/// report carries a "final_tracks" block (original track index, point,
/// surviving observation frames) that makes the reconstruction reloadable.
void save_reconstruction(const ReconstructionResult& result, const Scene& scene,
                         const std::string& dir);

/// Rebuilds a reconstruction from save_reconstruction's output; the scene is
/// needed to restore the observation mask indexing.
ReconstructionResult load_reconstruction(const Scene& scene, const std::string& dir);

}  // namespace sfm
