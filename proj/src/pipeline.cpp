#include "sfm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>

#include "sfm/errors.hpp"
#include "sfm/track_io.hpp"
#include "sfm/triangulation.hpp"

namespace sfm {

using nlohmann::json;

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    PipelineConfig config;
    if (j.contains("filter")) {
        const json& jf = j.at("filter");
        config.filter.v_min = jf.value("v_min", config.filter.v_min);
        config.filter.sigma_max_px = jf.value("sigma_max_px", config.filter.sigma_max_px);
        config.filter.sampson_factor = jf.value("sampson_factor", config.filter.sampson_factor);
        config.filter.min_tri_angle_deg =
            jf.value("min_tri_angle_deg", config.filter.min_tri_angle_deg);
        config.filter.max_reproj_px = jf.value("max_reproj_px", config.filter.max_reproj_px);
        config.filter.min_track_len = jf.value("min_track_len", config.filter.min_track_len);
    }
    if (j.contains("lm")) {
        const json& jl = j.at("lm");
        config.lm.max_steps = jl.value("max_steps", config.lm.max_steps);
        config.lm.lambda_init = jl.value("lambda_init", config.lm.lambda_init);
        config.lm.rel_decrease_tol = jl.value("rel_decrease_tol", config.lm.rel_decrease_tol);
        config.lm.gradient_tol = jl.value("gradient_tol", config.lm.gradient_tol);
    }
    config.max_rounds = j.value("max_rounds", config.max_rounds);
    config.seed = j.value("seed", config.seed);
    if (j.contains("query") && !j.at("query").is_null()) {
        config.query_override = j.at("query").get<int>();
    }
    config.filtering_enabled = j.value("filtering_enabled", config.filtering_enabled);
    config.weight_by_confidence = j.value("weight_by_confidence", config.weight_by_confidence);
    config.subpixel_mean_px = j.value("subpixel_mean_px", config.subpixel_mean_px);
    return config;
}

void PipelineConfig::save(const std::string& path) const {
    json j;
    j["format_version"] = kFormatVersion;
    j["filter"] = {
        {"v_min", filter.v_min},
        {"sigma_max_px", filter.sigma_max_px},
        {"sampson_factor", filter.sampson_factor},
        {"min_tri_angle_deg", filter.min_tri_angle_deg},
        {"max_reproj_px", filter.max_reproj_px},
        {"min_track_len", filter.min_track_len},
    };
    j["lm"] = {
        {"max_steps", lm.max_steps},
        {"lambda_init", lm.lambda_init},
        {"rel_decrease_tol", lm.rel_decrease_tol},
        {"gradient_tol", lm.gradient_tol},
    };
    j["max_rounds"] = max_rounds;
    j["seed"] = seed;
    if (query_override.has_value()) j["query"] = *query_override;
    j["filtering_enabled"] = filtering_enabled;
    j["weight_by_confidence"] = weight_by_confidence;
    j["subpixel_mean_px"] = subpixel_mean_px;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

int select_query_frame(const Scene& scene) {
    if (scene.frames.size() < 2) {
        throw ContractError("select_query_frame: need at least 2 frames");
    }
    int best = 0;
    std::int64_t best_count = -1;
    for (size_t f = 0; f < scene.frames.size(); ++f) {
        std::int64_t count = 0;
        for (const auto& track : scene.tracks) {
            const TrackObservation* obs = track.observation_in(static_cast<int>(f));
            if (obs != nullptr && is_visible(*obs)) ++count;
        }
        if (count > best_count) {
            best_count = count;
            best = static_cast<int>(f);
        }
    }
    return best;
}

namespace {

std::int64_t covisibility(const Scene& scene, int frame_a, int frame_b) {
    std::int64_t count = 0;
    for (const auto& track : scene.tracks) {
        const TrackObservation* a = track.observation_in(frame_a);
        const TrackObservation* b = track.observation_in(frame_b);
        if (a != nullptr && b != nullptr && is_visible(*a) && is_visible(*b)) ++count;
    }
    return count;
}

int least_covisible_frame(const Scene& scene, int previous_query,
                          const std::set<int>& used) {
    int best = -1;
    std::int64_t best_count = std::numeric_limits<std::int64_t>::max();
    for (size_t f = 0; f < scene.frames.size(); ++f) {
        const int frame = static_cast<int>(f);
        if (used.count(frame)) continue;
        const std::int64_t count = covisibility(scene, previous_query, frame);
        if (count < best_count) {
            best_count = count;
            best = frame;
        }
    }
    return best;
}

struct RoundResult {
    CameraSet cameras;
    std::vector<int> surviving_tracks;
    std::vector<Eigen::Vector3d> points;
    FilterMask mask;
    RoundReport report;
};

void accumulate_filter_counts(RoundReport& report, const FilterMask& mask) {
    report.dropped_visibility += mask.dropped_visibility;
    report.dropped_sigma += mask.dropped_sigma;
    report.dropped_sampson += mask.dropped_sampson;
    report.dropped_unregistered += mask.dropped_unregistered;
    report.dropped_reprojection += mask.dropped_reprojection;
    report.dropped_tracks_short += mask.dropped_tracks_short;
    report.dropped_tracks_angle += mask.dropped_tracks_angle;
}

// Builds the BA problem over registered cameras and surviving tracks. The
// gauge freezes the query camera's pose (focal stays free) and, for scale,
// the largest translation coordinate of the first other registered camera.
BAProblem build_problem(const Scene& scene, const CameraSet& cameras,
                        const std::vector<Eigen::Vector3d>& points_by_track,
                        const FilterMask& mask, int query_frame, bool weight_by_confidence,
                        std::vector<int>& camera_of_frame, std::vector<int>& track_of_point) {
    const int n_frames = static_cast<int>(scene.frames.size());
    BAProblem problem;
    camera_of_frame.assign(n_frames, -1);
    for (int f = 0; f < n_frames; ++f) {
        if (!cameras[f].has_value()) continue;
        camera_of_frame[f] = static_cast<int>(problem.cameras.size());
        problem.cameras.push_back(*cameras[f]);
    }
    problem.frozen.assign(problem.cameras.size(), {0, 0, 0, 0, 0, 0, 0, 0});
    problem.freeze_camera(camera_of_frame[query_frame], /*include_focal=*/false);
    for (int f = 0; f < n_frames; ++f) {
        if (f == query_frame || camera_of_frame[f] < 0) continue;
        const Eigen::Vector3d t = problem.cameras[camera_of_frame[f]].t();
        int axis = 0;
        t.cwiseAbs().maxCoeff(&axis);
        problem.freeze_translation_axis(camera_of_frame[f], axis);
        break;
    }

    track_of_point.clear();
    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        if (!mask.keep_track[t]) continue;
        const int point_index = static_cast<int>(problem.points.size());
        problem.points.push_back(points_by_track[t]);
        track_of_point.push_back(static_cast<int>(t));
        for (size_t o = 0; o < scene.tracks[t].observations.size(); ++o) {
            if (!mask.keep_obs[t][o]) continue;
            const TrackObservation& obs = scene.tracks[t].observations[o];
            if (camera_of_frame[obs.frame_id] < 0) continue;
            BAObservation bo;
            bo.camera_index = camera_of_frame[obs.frame_id];
            bo.point_index = point_index;
            bo.y = obs.y;
            bo.weight = weight_by_confidence
                            ? 2.0 / (obs.sigma[0] * obs.sigma[0] + obs.sigma[1] * obs.sigma[1])
                            : 1.0;
            problem.observations.push_back(bo);
        }
    }
    return problem;
}

RoundResult run_round(const Scene& scene, const PipelineConfig& config, int round_index,
                      int query_frame) {
    RoundResult result;
    RoundReport& report = result.report;
    report.round = round_index;
    report.query_frame = query_frame;
    for (const auto& track : scene.tracks) {
        report.observations_total += static_cast<std::int64_t>(track.observations.size());
    }

    // Stage 1: preliminary cameras from the batched 8-point solver.
    const CameraInitResult init = initialize_cameras(
        scene, query_frame, derive_seed(config.seed, static_cast<std::uint64_t>(round_index)));
    for (const auto& reg : init.status) {
        if (!reg.registered) {
            report.unregistered_frames.push_back(reg.frame_id);
            report.unregistered_reasons.push_back(reg.failure);
        } else {
            ++report.frames_registered;
        }
    }
    if (report.frames_registered < 2) {
        report.failure = "fewer than 2 registrable frames";
        return result;
    }
    result.cameras = init.cameras;

    // Stage 2: observation-level filtering under the preliminary cameras.
    const FilterConfig filter =
        config.filtering_enabled ? config.filter : FilterConfig::disabled();
    FilterMask mask = filter_observations(scene, result.cameras, query_frame, filter);

    // Stage 3: multi-view DLT per surviving track.
    std::vector<Eigen::Vector3d> points_by_track(scene.tracks.size(),
                                                 Eigen::Vector3d::Zero());
    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        if (!mask.keep_track[t]) continue;
        try {
            points_by_track[t] =
                triangulate_dlt(scene.tracks[t], result.cameras, &mask.keep_obs[t],
                                config.weight_by_confidence)
                    .point;
        } catch (const Error&) {
            mask.keep_track[t] = 0;
            ++report.tracks_failed_triangulation;
        }
    }

    // Stage 4: triangulation-angle gate (needs points) and reprojection gate.
    Scene with_points = scene;
    with_points.points = points_by_track;
    mask = filter_observations(with_points, result.cameras, query_frame, filter, &mask);
    mask = filter_reprojection(scene, result.cameras, points_by_track, filter, &mask);
    if (mask.surviving_tracks() == 0) {
        accumulate_filter_counts(report, mask);
        report.failure = "empty surviving track set after filtering";
        return result;
    }

    // Stage 5: bundle adjustment.
    std::vector<int> camera_of_frame, track_of_point;
    BAProblem problem = build_problem(scene, result.cameras, points_by_track, mask,
                                      query_frame, config.weight_by_confidence,
                                      camera_of_frame, track_of_point);
    report.dlt_mean_px = ba_residual_stats(problem).mean_px;
    const LMState first = lm_solve(problem, config.lm);
    report.lm_steps_first = first.step;
    report.lm_converged_first = first.converged;
    report.ba_mean_px = ba_residual_stats(problem).mean_px;

    auto write_back = [&](const BAProblem& p) {
        for (size_t f = 0; f < result.cameras.size(); ++f) {
            if (camera_of_frame[f] >= 0) result.cameras[f] = p.cameras[camera_of_frame[f]];
        }
        for (size_t k = 0; k < track_of_point.size(); ++k) {
            points_by_track[track_of_point[k]] = p.points[k];
        }
    };
    write_back(problem);

    // Stage 6: reprojection filter against the refined model, then a second
    // solve over the final surviving set.
    mask = filter_reprojection(scene, result.cameras, points_by_track, filter, &mask);
    if (mask.surviving_tracks() == 0) {
        accumulate_filter_counts(report, mask);
        report.failure = "empty surviving track set after reprojection filtering";
        return result;
    }
    problem = build_problem(scene, result.cameras, points_by_track, mask, query_frame,
                            config.weight_by_confidence, camera_of_frame, track_of_point);
    const LMState second = lm_solve(problem, config.lm);
    report.lm_steps_second = second.step;
    report.lm_converged_second = second.converged;
    write_back(problem);

    const ResidualStats stats = ba_residual_stats(problem);
    report.final_mean_px = stats.mean_px;
    report.final_rms_px = stats.rms_px;
    accumulate_filter_counts(report, mask);
    report.observations_surviving = mask.surviving_observations();
    report.tracks_surviving = static_cast<int>(mask.surviving_tracks());
    report.success = true;

    result.mask = mask;
    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        if (!mask.keep_track[t]) continue;
        result.surviving_tracks.push_back(static_cast<int>(t));
        result.points.push_back(points_by_track[t]);
    }
    return result;
}

json report_to_json(const ReconstructionReport& report) {
    json j;
    j["format_version"] = kFormatVersion;
    j["chosen_round"] = report.chosen_round;
    j["mean_reproj_px"] = report.mean_reproj_px;
    j["rms_reproj_px"] = report.rms_reproj_px;
    j["rounds"] = json::array();
    for (const auto& r : report.rounds) {
        json jr;
        jr["round"] = r.round;
        jr["query_frame"] = r.query_frame;
        jr["success"] = r.success;
        jr["failure"] = r.failure;
        jr["frames_registered"] = r.frames_registered;
        jr["unregistered_frames"] = r.unregistered_frames;
        jr["unregistered_reasons"] = r.unregistered_reasons;
        jr["observations_total"] = r.observations_total;
        jr["observations_surviving"] = r.observations_surviving;
        jr["dropped"] = {
            {"visibility", r.dropped_visibility},
            {"sigma", r.dropped_sigma},
            {"sampson", r.dropped_sampson},
            {"unregistered", r.dropped_unregistered},
            {"reprojection", r.dropped_reprojection},
            {"tracks_short", r.dropped_tracks_short},
            {"tracks_angle", r.dropped_tracks_angle},
        };
        jr["tracks_failed_triangulation"] = r.tracks_failed_triangulation;
        jr["tracks_surviving"] = r.tracks_surviving;
        jr["dlt_mean_px"] = r.dlt_mean_px;
        jr["ba_mean_px"] = r.ba_mean_px;
        jr["final_mean_px"] = r.final_mean_px;
        jr["final_rms_px"] = r.final_rms_px;
        jr["lm_steps_first"] = r.lm_steps_first;
        jr["lm_steps_second"] = r.lm_steps_second;
        jr["lm_converged_first"] = r.lm_converged_first;
        jr["lm_converged_second"] = r.lm_converged_second;
        j["rounds"].push_back(std::move(jr));
    }
    return j;
}

}  // namespace

std::string ReconstructionReport::to_json() const {
    return report_to_json(*this).dump(2) + "\n";
}

ReconstructionResult reconstruct(const Scene& scene, const PipelineConfig& config) {
    scene.validate();
    if (scene.tracks.empty()) throw ReconstructionError("reconstruct: scene has no tracks");

    const int first_query = config.query_override.has_value() ? *config.query_override
                                                              : select_query_frame(scene);
    if (first_query < 0 || first_query >= static_cast<int>(scene.frames.size())) {
        throw ContractError("reconstruct: query frame out of range");
    }

    ReconstructionResult best;
    ReconstructionReport all_rounds;
    int best_round = -1;
    double best_mean = std::numeric_limits<double>::infinity();

    std::set<int> used_queries;
    int query = first_query;
    for (int round = 0; round < config.max_rounds && query >= 0; ++round) {
        used_queries.insert(query);
        RoundResult result = run_round(scene, config, round, query);
        all_rounds.rounds.push_back(result.report);

        if (result.report.success && result.report.final_mean_px < best_mean) {
            best_mean = result.report.final_mean_px;
            best_round = round;
            best.cameras = std::move(result.cameras);
            best.surviving_tracks = std::move(result.surviving_tracks);
            best.points = std::move(result.points);
            best.final_mask = std::move(result.mask);
        }
        if (best_round >= 0 && best_mean < config.subpixel_mean_px) break;
        query = least_covisible_frame(scene, query, used_queries);
    }

    if (best_round < 0) {
        std::string detail;
        for (const auto& r : all_rounds.rounds) {
            detail += " round " + std::to_string(r.round) + ": " + r.failure + ";";
        }
        throw ReconstructionError("reconstruct: all rounds failed:" + detail);
    }

    all_rounds.chosen_round = best_round;
    all_rounds.mean_reproj_px = all_rounds.rounds[best_round].final_mean_px;
    all_rounds.rms_reproj_px = all_rounds.rounds[best_round].final_rms_px;
    best.report = std::move(all_rounds);
    return best;
}

}  // namespace sfm
