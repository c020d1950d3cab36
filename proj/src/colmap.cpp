#include "sfm/colmap.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sfm/errors.hpp"

namespace sfm {

namespace {

// Shortest representation that parses back to the same double ("512", "1228.8").
std::string fmt(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string image_name(int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06d.png", frame);
    return buf;
}

}  // namespace

std::vector<int> export_colmap(const Scene& scene, const ReconstructionResult& result,
                               const std::string& dir) {
    std::filesystem::create_directories(dir);
    const int n_frames = static_cast<int>(scene.frames.size());

    std::vector<int> omitted;
    for (int f = 0; f < n_frames; ++f) {
        if (!result.cameras[f].has_value()) omitted.push_back(f);
    }

    // Per-image 2D point lists and the (image, index) back-references each
    // point3D line needs. Surviving tracks in original order; COLMAP ids are
    // 1-based.
    std::vector<std::vector<ColmapObservation>> image_points(n_frames);
    std::vector<std::vector<std::pair<int, int>>> track_refs(result.surviving_tracks.size());
    std::vector<double> track_errors(result.surviving_tracks.size(), 0.0);
    for (size_t k = 0; k < result.surviving_tracks.size(); ++k) {
        const int t = result.surviving_tracks[k];
        const Track& track = scene.tracks[t];
        double error_sum = 0;
        int error_count = 0;
        for (size_t o = 0; o < track.observations.size(); ++o) {
            if (!result.final_mask.keep_obs[t][o]) continue;
            const TrackObservation& obs = track.observations[o];
            if (!result.cameras[obs.frame_id].has_value()) continue;
            track_refs[k].emplace_back(obs.frame_id,
                                       static_cast<int>(image_points[obs.frame_id].size()));
            image_points[obs.frame_id].push_back({obs.frame_id, obs.y, t + 1});
            Projection<double> proj;
            if (try_project(*result.cameras[obs.frame_id], result.points[k], proj)) {
                error_sum += (proj.y - obs.y).norm();
                ++error_count;
            }
        }
        track_errors[k] = error_count > 0 ? error_sum / error_count : -1.0;
    }

    {
        std::ofstream out(dir + "/cameras.txt", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + dir + "/cameras.txt");
        out << "# Camera list with one line of data per camera:\n";
        out << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
        out << "# Number of cameras: " << (n_frames - omitted.size()) << "\n";
        for (int f = 0; f < n_frames; ++f) {
            if (!result.cameras[f].has_value()) continue;
            const Camerad& cam = *result.cameras[f];
            out << (f + 1) << " SIMPLE_PINHOLE " << scene.frames[f].width << " "
                << scene.frames[f].height << " " << fmt(cam.focal()) << " "
                << fmt(cam.pp()[0]) << " " << fmt(cam.pp()[1]) << "\n";
        }
    }

    {
        std::ofstream out(dir + "/images.txt", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + dir + "/images.txt");
        out << "# Image list with two lines of data per image:\n";
        out << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
        out << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
        out << "# Number of images: " << (n_frames - omitted.size()) << "\n";
        for (int f = 0; f < n_frames; ++f) {
            if (!result.cameras[f].has_value()) continue;
            const Camerad& cam = *result.cameras[f];
            out << (f + 1) << " " << fmt(cam.q()[0]) << " " << fmt(cam.q()[1]) << " "
                << fmt(cam.q()[2]) << " " << fmt(cam.q()[3]) << " " << fmt(cam.t()[0]) << " "
                << fmt(cam.t()[1]) << " " << fmt(cam.t()[2]) << " " << (f + 1) << " "
                << image_name(f) << "\n";
            bool first = true;
            for (const auto& obs : image_points[f]) {
                out << (first ? "" : " ") << fmt(obs.y[0]) << " " << fmt(obs.y[1]) << " "
                    << obs.point3d_id;
                first = false;
            }
            out << "\n";
        }
    }

    {
        std::ofstream out(dir + "/points3D.txt", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + dir + "/points3D.txt");
        out << "# 3D point list with one line of data per point:\n";
        out << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
        out << "# Number of points: " << result.surviving_tracks.size() << "\n";
        for (size_t k = 0; k < result.surviving_tracks.size(); ++k) {
            const Eigen::Vector3d& p = result.points[k];
            out << (result.surviving_tracks[k] + 1) << " " << fmt(p[0]) << " " << fmt(p[1])
                << " " << fmt(p[2]) << " 128 128 128 " << fmt(track_errors[k]);
            for (const auto& [frame, idx] : track_refs[k]) {
                out << " " << (frame + 1) << " " << idx;
            }
            out << "\n";
        }
    }
    return omitted;
}

ColmapReconstruction import_colmap(const std::string& dir) {
    ColmapReconstruction rec;

    struct RawCamera {
        int width = 0, height = 0;
        double f = 0, cx = 0, cy = 0;
    };
    std::map<int, RawCamera> raw_cameras;
    {
        std::ifstream in(dir + "/cameras.txt");
        if (!in) throw ParseError("cannot open " + dir + "/cameras.txt");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            int id;
            std::string model;
            RawCamera cam;
            ls >> id >> model >> cam.width >> cam.height >> cam.f >> cam.cx >> cam.cy;
            if (!ls || model != "SIMPLE_PINHOLE") {
                throw ParseError(dir + "/cameras.txt: unsupported camera line: " + line);
            }
            raw_cameras[id] = cam;
        }
    }

    int max_frame = -1;
    struct RawImage {
        Eigen::Vector4d q;
        Eigen::Vector3d t;
        int camera_id = 0;
        std::vector<ColmapObservation> points;
    };
    std::map<int, RawImage> raw_images;
    {
        std::ifstream in(dir + "/images.txt");
        if (!in) throw ParseError("cannot open " + dir + "/images.txt");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            int image_id;
            RawImage img;
            std::string name;
            ls >> image_id >> img.q[0] >> img.q[1] >> img.q[2] >> img.q[3] >> img.t[0] >>
                img.t[1] >> img.t[2] >> img.camera_id >> name;
            if (!ls) throw ParseError(dir + "/images.txt: bad image line: " + line);

            if (!std::getline(in, line)) {
                throw ParseError(dir + "/images.txt: missing POINTS2D line");
            }
            std::istringstream ps(line);
            ColmapObservation obs;
            obs.frame_id = image_id - 1;
            while (ps >> obs.y[0] >> obs.y[1] >> obs.point3d_id) img.points.push_back(obs);
            raw_images[image_id] = std::move(img);
            max_frame = std::max(max_frame, image_id - 1);
        }
    }

    rec.cameras.assign(max_frame + 1, std::nullopt);
    rec.image_points.resize(max_frame + 1);
    for (const auto& [image_id, img] : raw_images) {
        const auto it = raw_cameras.find(img.camera_id);
        if (it == raw_cameras.end()) {
            throw ReferentialError(dir + ": image references unknown camera " +
                                   std::to_string(img.camera_id));
        }
        const RawCamera& raw = it->second;
        rec.cameras[image_id - 1] = Camerad(img.q, img.t, std::log(raw.f),
                                            Eigen::Vector2d(raw.cx, raw.cy));
        rec.image_points[image_id - 1] = img.points;
    }

    {
        std::ifstream in(dir + "/points3D.txt");
        if (!in) throw ParseError("cannot open " + dir + "/points3D.txt");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::int64_t id;
            Eigen::Vector3d p;
            int r, g, b;
            double error;
            ls >> id >> p[0] >> p[1] >> p[2] >> r >> g >> b >> error;
            if (!ls) throw ParseError(dir + "/points3D.txt: bad point line: " + line);
            rec.point_ids.push_back(id);
            rec.points.push_back(p);
        }
    }
    return rec;
}

}  // namespace sfm
