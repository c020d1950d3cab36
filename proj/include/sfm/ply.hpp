#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace sfm {

/// Binary little-endian PLY with double-precision x, y, z vertex properties.
void write_ply(const std::vector<Eigen::Vector3d>& points, const std::string& path);

/// Reads PLY files written by write_ply (and float-typed variants).
std::vector<Eigen::Vector3d> read_ply(const std::string& path);

}  // namespace sfm
