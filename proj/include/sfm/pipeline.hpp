#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfm/bundle.hpp"
#include "sfm/epipolar.hpp"
#include "sfm/filtering.hpp"
#include "sfm/scene.hpp"

namespace sfm {

struct PipelineConfig {
    FilterConfig filter;
    LMOptions lm;
    int max_rounds = 3;
    std::uint64_t seed = 0;
    std::optional<int> query_override;
    bool filtering_enabled = true;
    bool weight_by_confidence = false;  // 1/sigma^2 observation weights (default: unweighted)
    double subpixel_mean_px = 1.0;      // stop iterating once the mean error is below this

    static PipelineConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct RoundReport {
    int round = 0;
    int query_frame = -1;
    bool success = false;
    std::string failure;

    int frames_registered = 0;
    std::vector<int> unregistered_frames;
    std::vector<std::string> unregistered_reasons;

    std::int64_t observations_total = 0;
    std::int64_t observations_surviving = 0;
    std::int64_t dropped_visibility = 0;
    std::int64_t dropped_sigma = 0;
    std::int64_t dropped_sampson = 0;
    std::int64_t dropped_unregistered = 0;
    std::int64_t dropped_reprojection = 0;
    std::int64_t dropped_tracks_short = 0;
    std::int64_t dropped_tracks_angle = 0;
    int tracks_failed_triangulation = 0;
    int tracks_surviving = 0;

    double dlt_mean_px = 0;    // over the first BA input set
    double ba_mean_px = 0;     // same set after the first solve
    double final_mean_px = 0;  // final surviving set after the second solve
    double final_rms_px = 0;
    int lm_steps_first = 0;
    int lm_steps_second = 0;
    bool lm_converged_first = false;
    bool lm_converged_second = false;
};

struct ReconstructionReport {
    std::vector<RoundReport> rounds;
    int chosen_round = -1;  // index into rounds
    double mean_reproj_px = 0;
    double rms_reproj_px = 0;

    std::string to_json() const;
};

struct ReconstructionResult {
    CameraSet cameras;                       // per frame; nullopt where unregistered
    std::vector<int> surviving_tracks;       // original track indices
    std::vector<Eigen::Vector3d> points;     // aligned with surviving_tracks
    FilterMask final_mask;                   // original indexing
    ReconstructionReport report;
};

/// The frame seeing the most tracks (ties broken by the lowest frame id).
/// Throws ContractError on scenes with fewer than 2 frames.
int select_query_frame(const Scene& scene);

/// Runs select query -> initialize cameras -> filter observations ->
/// triangulate -> filter (angle/reprojection) -> bundle adjust -> filter
/// reprojection -> bundle adjust. The whole function repeats with a new query
/// (the frame least covisible with the previous query) while the mean
/// unsquared reprojection error stays at or above subpixel_mean_px, up to
/// max_rounds; the best round by mean reprojection is returned. Throws
/// ReconstructionError when no round produces at least 2 registered frames
/// and a non-empty surviving track set.
ReconstructionResult reconstruct(const Scene& scene, const PipelineConfig& config);

}  // namespace sfm
