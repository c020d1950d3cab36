#include "sfm/track_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>

#include "sfm/errors.hpp"

namespace sfm {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void check_format_version(const json& j, const std::string& path) {
    if (!j.contains("format_version")) return;  // tolerated for hand-written fixtures
    const std::string v = j.at("format_version").get<std::string>();
    const int major = std::atoi(v.c_str());
    if (major != kFormatMajor) {
        throw ParseError(path + ": unsupported format_version " + v);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

json camera_to_json(const Camerad& cam, int frame, int width, int height) {
    return json{
        {"frame", frame},
        {"width", width},
        {"height", height},
        {"qw", cam.q()[0]},
        {"qx", cam.q()[1]},
        {"qy", cam.q()[2]},
        {"qz", cam.q()[3]},
        {"tx", cam.t()[0]},
        {"ty", cam.t()[1]},
        {"tz", cam.t()[2]},
        {"f", cam.focal()},
        {"px", cam.pp()[0]},
        {"py", cam.pp()[1]},
    };
}

Camerad camera_from_json(const json& j) {
    const Eigen::Vector4d q(j.at("qw").get<double>(), j.at("qx").get<double>(),
                            j.at("qy").get<double>(), j.at("qz").get<double>());
    const Eigen::Vector3d t(j.at("tx").get<double>(), j.at("ty").get<double>(),
                            j.at("tz").get<double>());
    const double f = j.at("f").get<double>();
    if (!(f > 0)) throw ParseError("camera: focal must be positive");
    const Eigen::Vector2d pp(j.at("px").get<double>(), j.at("py").get<double>());
    return Camerad(q, t, std::log(f), pp);
}

Scene scene_from_json(const json& j, const std::string& path) {
    Scene scene;
    if (!j.contains("frames") || !j.contains("tracks")) {
        throw ParseError(path + ": missing frames or tracks");
    }
    for (const auto& jf : j.at("frames")) {
        FrameInfo info;
        info.id = jf.at("id").get<int>();
        info.width = jf.at("width").get<int>();
        info.height = jf.at("height").get<int>();
        scene.frames.push_back(info);
    }
    size_t track_index = 0;
    for (const auto& jt : j.at("tracks")) {
        Track track;
        try {
            if (jt.contains("query")) {
                track.query_point =
                    Eigen::Vector2d(jt.at("query").at(0).get<double>(),
                                    jt.at("query").at(1).get<double>());
            }
            for (const auto& jo : jt.at("obs")) {
                TrackObservation obs;
                obs.frame_id = jo.at("frame").get<int>();
                obs.y = Eigen::Vector2d(jo.at("x").get<double>(), jo.at("y").get<double>());
                obs.v = jo.value("v", 1.0);
                obs.sigma = Eigen::Vector2d(jo.value("sx", 0.5), jo.value("sy", 0.5));
                track.observations.push_back(obs);
            }
        } catch (const json::exception& e) {
            throw ParseError(path + ": track " + std::to_string(track_index) + ": " +
                             e.what());
        }
        scene.tracks.push_back(std::move(track));
        ++track_index;
    }
    try {
        scene.validate();
    } catch (const ReferentialError& e) {
        throw ReferentialError(path + ": " + e.what());
    } catch (const Error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scene;
}

json scene_to_json(const Scene& scene) {
    json j;
    j["format_version"] = kFormatVersion;
    j["frames"] = json::array();
    for (const auto& f : scene.frames) {
        j["frames"].push_back({{"id", f.id}, {"width", f.width}, {"height", f.height}});
    }
    j["tracks"] = json::array();
    for (const auto& track : scene.tracks) {
        json jt;
        jt["query"] = {track.query_point[0], track.query_point[1]};
        jt["obs"] = json::array();
        for (const auto& obs : track.observations) {
            jt["obs"].push_back({
                {"frame", obs.frame_id},
                {"x", obs.y[0]},
                {"y", obs.y[1]},
                {"v", obs.v},
                {"sx", obs.sigma[0]},
                {"sy", obs.sigma[1]},
            });
        }
        j["tracks"].push_back(std::move(jt));
    }
    return j;
}

}  // namespace

Scene load_tracks(const std::string& path) { return load_scene_file(path).scene; }

void save_tracks(const Scene& scene, const std::string& path) {
    write_text(path, scene_to_json(scene).dump(2) + "\n");
}

SceneFile load_scene_file(const std::string& path) {
    const json j = load_json(path);
    check_format_version(j, path);
    SceneFile file;
    file.scene = scene_from_json(j, path);
    if (j.contains("ground_truth")) {
        const json& jg = j.at("ground_truth");
        GroundTruth gt;
        for (const auto& jc : jg.at("cameras")) gt.cameras.push_back(camera_from_json(jc));
        if (gt.cameras.size() != file.scene.frames.size()) {
            throw ReferentialError(path + ": ground truth cameras not aligned with frames");
        }
        for (const auto& jp : jg.at("points")) {
            gt.points.emplace_back(jp.at(0).get<double>(), jp.at(1).get<double>(),
                                   jp.at(2).get<double>());
        }
        if (gt.points.size() != file.scene.tracks.size()) {
            throw ReferentialError(path + ": ground truth points not aligned with tracks");
        }
        if (jg.contains("outliers")) {
            for (const auto& jt : jg.at("outliers")) {
                gt.outlier_flags.push_back(jt.get<std::vector<char>>());
            }
        }
        if (jg.contains("ideal")) {
            for (const auto& jt : jg.at("ideal")) {
                std::vector<Eigen::Vector2d> row;
                for (const auto& jo : jt) {
                    row.emplace_back(jo.at(0).get<double>(), jo.at(1).get<double>());
                }
                gt.ideal_obs.push_back(std::move(row));
            }
        }
        file.ground_truth = std::move(gt);
    }
    return file;
}

void save_scene_file(const SceneFile& file, const std::string& path) {
    json j = scene_to_json(file.scene);
    if (file.ground_truth.has_value()) {
        const GroundTruth& gt = *file.ground_truth;
        json jg;
        jg["cameras"] = json::array();
        for (size_t i = 0; i < gt.cameras.size(); ++i) {
            jg["cameras"].push_back(camera_to_json(gt.cameras[i], static_cast<int>(i),
                                                   file.scene.frames[i].width,
                                                   file.scene.frames[i].height));
        }
        jg["points"] = json::array();
        for (const auto& p : gt.points) jg["points"].push_back({p[0], p[1], p[2]});
        if (!gt.outlier_flags.empty()) jg["outliers"] = gt.outlier_flags;
        if (!gt.ideal_obs.empty()) {
            json ideal = json::array();
            for (const auto& row : gt.ideal_obs) {
                json jr = json::array();
                for (const auto& y : row) jr.push_back({y[0], y[1]});
                ideal.push_back(std::move(jr));
            }
            jg["ideal"] = std::move(ideal);
        }
        j["ground_truth"] = std::move(jg);
    }
    write_text(path, j.dump(2) + "\n");
}

SceneFile make_scene_file(const SyntheticScene& synthetic) {
    SceneFile file;
    file.scene = synthetic.scene;
    GroundTruth gt;
    gt.cameras = synthetic.gt_cameras;
    gt.points = synthetic.gt_points;
    gt.outlier_flags = synthetic.outlier_flags;
    gt.ideal_obs = synthetic.ideal_obs;
    file.ground_truth = std::move(gt);
    return file;
}

void save_cameras_json(const CameraSet& cameras, const std::vector<FrameInfo>& frames,
                       const std::string& path) {
    json j;
    j["format_version"] = kFormatVersion;
    j["frames_total"] = frames.size();
    j["cameras"] = json::array();
    for (size_t i = 0; i < cameras.size(); ++i) {
        if (!cameras[i].has_value()) continue;
        j["cameras"].push_back(camera_to_json(*cameras[i], static_cast<int>(i),
                                              frames[i].width, frames[i].height));
    }
    write_text(path, j.dump(2) + "\n");
}

CameraSet load_cameras_json(const std::string& path) {
    const json j = load_json(path);
    check_format_version(j, path);
    CameraSet cameras(j.at("frames_total").get<size_t>());
    for (const auto& jc : j.at("cameras")) {
        const int frame = jc.at("frame").get<int>();
        if (frame < 0 || frame >= static_cast<int>(cameras.size())) {
            throw ReferentialError(path + ": camera frame " + std::to_string(frame) +
                                   " out of range");
        }
        cameras[frame] = camera_from_json(jc);
    }
    return cameras;
}

}  // namespace sfm
