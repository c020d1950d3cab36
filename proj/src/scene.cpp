#include "sfm/scene.hpp"

#include <string>

#include "sfm/errors.hpp"

namespace sfm {

void Scene::validate() const {
    const int n_frames = static_cast<int>(frames.size());
    for (int i = 0; i < n_frames; ++i) {
        if (frames[i].id != i) {
            throw ReferentialError("scene: frame ids must be 0..n-1 in order, got id " +
                                   std::to_string(frames[i].id) + " at position " +
                                   std::to_string(i));
        }
        if (frames[i].width <= 0 || frames[i].height <= 0) {
            throw ParseError("scene: frame " + std::to_string(i) + " has non-positive size");
        }
    }
    for (size_t j = 0; j < tracks.size(); ++j) {
        const Track& track = tracks[j];
        if (track.observations.empty()) {
            throw ParseError("scene: track " + std::to_string(j) + " is empty");
        }
        int prev = -1;
        for (const auto& obs : track.observations) {
            if (obs.frame_id <= prev) {
                throw ParseError("scene: track " + std::to_string(j) +
                                 " frame ids not strictly increasing");
            }
            prev = obs.frame_id;
            if (obs.frame_id < 0 || obs.frame_id >= n_frames) {
                throw ReferentialError("scene: track " + std::to_string(j) +
                                       " references unknown frame " +
                                       std::to_string(obs.frame_id));
            }
            if (!(obs.sigma[0] > 0) || !(obs.sigma[1] > 0)) {
                throw ParseError("scene: track " + std::to_string(j) +
                                 " has non-positive sigma in frame " +
                                 std::to_string(obs.frame_id));
            }
        }
    }
    if (has_cameras() && cameras.size() != frames.size()) {
        throw ReferentialError("scene: cameras present but count != frame count");
    }
    if (has_points() && points.size() != tracks.size()) {
        throw ReferentialError("scene: points present but count != track count");
    }
}

}  // namespace sfm
