#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sfm/scene.hpp"

namespace sfm {

/// Thresholds of the observation/track filtering cascade. Defaults are the
/// reference values: drop below 0.6 visibility, above 1 px sigma, above
/// 0.8/width Sampson error, require one track pair above 3 degrees of
/// triangulation angle, drop above 3 px reprojection error, and discard
/// tracks shorter than 3 observations. All comparisons are strict.
struct FilterConfig {
    double v_min = 0.6;
    double sigma_max_px = 1.0;
    double sampson_factor = 0.8;      // threshold is sampson_factor / image width
    double min_tri_angle_deg = 3.0;   // <= 0 disables the angle requirement
    double max_reproj_px = 3.0;
    int min_track_len = 3;

    /// Configuration under which every filter passes everything.
    static FilterConfig disabled();
};

/// Explicit, inspectable result of a filter pass, aligned with the scene's
/// tracks and their observations.
struct FilterMask {
    std::vector<char> keep_track;
    std::vector<std::vector<char>> keep_obs;

    std::int64_t dropped_visibility = 0;
    std::int64_t dropped_sigma = 0;
    std::int64_t dropped_sampson = 0;
    std::int64_t dropped_unregistered = 0;
    std::int64_t dropped_reprojection = 0;
    std::int64_t dropped_tracks_short = 0;
    std::int64_t dropped_tracks_angle = 0;

    bool keeps(std::size_t track, std::size_t obs) const {
        return keep_track[track] != 0 && keep_obs[track][obs] != 0;
    }
    std::int64_t surviving_observations() const;
    std::int64_t surviving_tracks() const;

    /// Debug dump (JSON text).
    std::string to_json() const;
};

/// Pre-BA cascade: drops observations with low visibility, large sigma, no
/// registered camera, or a Sampson epipolar error against the query-frame
/// anchor above sampson_factor/width — tested under `cameras` and, when
/// given, also under `extra_cameras` (the paper checks both the preliminary
/// and the initial cameras). Tracks then need min_track_len surviving
/// observations and, when the scene carries points, one surviving pair above
/// the minimum triangulation angle.
///
/// The Sampson anchor is the track's query-frame observation; its coordinates
/// anchor the test even when that observation is itself dropped, which keeps
/// the filter monotone under threshold tightening. `prior` restricts the pass
/// to its survivors; dropped entries stay dropped.
FilterMask filter_observations(const Scene& scene, const CameraSet& cameras, int query_frame,
                               const FilterConfig& config, const FilterMask* prior = nullptr,
                               const CameraSet* extra_cameras = nullptr);

/// During/after-BA filter: drops observations whose reprojection error
/// exceeds max_reproj_px (strictly), then re-applies min_track_len.
FilterMask filter_reprojection(const Scene& scene, const CameraSet& cameras,
                               const std::vector<Eigen::Vector3d>& points,
                               const FilterConfig& config, const FilterMask* prior = nullptr);

}  // namespace sfm
