#include "sfm/result_io.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "sfm/errors.hpp"
#include "sfm/ply.hpp"
#include "sfm/track_io.hpp"

namespace sfm {

using nlohmann::json;

void save_reconstruction(const ReconstructionResult& result, const Scene& scene,
                         const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_cameras_json(result.cameras, scene.frames, dir + "/cameras.json");
    write_ply(result.points, dir + "/points.ply");

    json j = json::parse(result.report.to_json());
    json tracks = json::array();
    for (size_t k = 0; k < result.surviving_tracks.size(); ++k) {
        const int t = result.surviving_tracks[k];
        json jt;
        jt["track"] = t;
        jt["point"] = {result.points[k][0], result.points[k][1], result.points[k][2]};
        json frames = json::array();
        const Track& track = scene.tracks[t];
        for (size_t o = 0; o < track.observations.size(); ++o) {
            if (result.final_mask.keep_obs[t][o]) frames.push_back(track.observations[o].frame_id);
        }
        jt["frames"] = std::move(frames);
        tracks.push_back(std::move(jt));
    }
    j["final_tracks"] = std::move(tracks);

    std::ofstream out(dir + "/report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + dir + "/report.json");
    out << j.dump(2) << "\n";
}

ReconstructionResult load_reconstruction(const Scene& scene, const std::string& dir) {
    ReconstructionResult result;
    result.cameras = load_cameras_json(dir + "/cameras.json");
    if (result.cameras.size() != scene.frames.size()) {
        throw ReferentialError(dir + "/cameras.json: frame count does not match the scene");
    }

    std::ifstream in(dir + "/report.json");
    if (!in) throw ParseError("cannot open " + dir + "/report.json");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(dir + "/report.json: " + e.what());
    }

    result.final_mask.keep_track.assign(scene.tracks.size(), 0);
    result.final_mask.keep_obs.resize(scene.tracks.size());
    for (size_t t = 0; t < scene.tracks.size(); ++t) {
        result.final_mask.keep_obs[t].assign(scene.tracks[t].observations.size(), 0);
    }
    for (const auto& jt : j.at("final_tracks")) {
        const int t = jt.at("track").get<int>();
        if (t < 0 || t >= static_cast<int>(scene.tracks.size())) {
            throw ReferentialError(dir + "/report.json: track index out of range");
        }
        result.surviving_tracks.push_back(t);
        result.points.emplace_back(jt.at("point").at(0).get<double>(),
                                   jt.at("point").at(1).get<double>(),
                                   jt.at("point").at(2).get<double>());
        result.final_mask.keep_track[t] = 1;
        for (const auto& jf : jt.at("frames")) {
            const int frame = jf.get<int>();
            const Track& track = scene.tracks[t];
            bool found = false;
            for (size_t o = 0; o < track.observations.size(); ++o) {
                if (track.observations[o].frame_id == frame) {
                    result.final_mask.keep_obs[t][o] = 1;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw ReferentialError(dir + "/report.json: track " + std::to_string(t) +
                                       " has no observation in frame " + std::to_string(frame));
            }
        }
    }
    return result;
}

}  // namespace sfm
