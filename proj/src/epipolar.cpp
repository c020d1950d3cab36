#include "sfm/epipolar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sfm/errors.hpp"
#include "sfm/parallel.hpp"

namespace sfm {

namespace {

// Isotropic Hartley normalization: centroid at the origin, mean distance sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Correspondence>& pairs, bool side_a) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pairs) centroid += side_a ? p.a : p.b;
    centroid /= static_cast<double>(pairs.size());
    double mean_dist = 0;
    for (const auto& p : pairs) mean_dist += ((side_a ? p.a : p.b) - centroid).norm();
    mean_dist /= static_cast<double>(pairs.size());
    const double scale = mean_dist > 1e-15 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d T;
    T << scale, 0, -scale * centroid[0],
         0, scale, -scale * centroid[1],
         0, 0, 1;
    return T;
}

Eigen::Vector3d homogeneous(const Eigen::Vector2d& p) {
    return Eigen::Vector3d(p[0], p[1], 1.0);
}

}  // namespace

double initial_log_focal(int width_px, int height_px) {
    if (width_px <= 0 || height_px <= 0) {
        throw ContractError("initial_log_focal: non-positive image dimensions");
    }
    return std::log(1.2 * static_cast<double>(std::max(width_px, height_px)));
}

double sampson_error(const Eigen::Matrix3d& E, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
    const Eigen::Vector3d ah = homogeneous(a);
    const Eigen::Vector3d bh = homogeneous(b);
    const Eigen::Vector3d Ea = E * ah;
    const Eigen::Vector3d Etb = E.transpose() * bh;
    const double constraint = bh.dot(Ea);
    const double denom = Ea[0] * Ea[0] + Ea[1] * Ea[1] + Etb[0] * Etb[0] + Etb[1] * Etb[1];
    if (denom < 1e-18) return std::numeric_limits<double>::max();
    return std::abs(constraint) / std::sqrt(denom);
}

Eigen::Vector2d two_view_depths(const Eigen::Matrix3d& R, const Eigen::Vector3d& t,
                                const Correspondence& pair) {
    Eigen::Matrix<double, 3, 2> M;
    M.col(0) = R * homogeneous(pair.a);
    M.col(1) = -homogeneous(pair.b);
    return M.colPivHouseholderQr().solve(-t);
}

EssentialCandidate eight_point(const std::vector<Correspondence>& pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n < 8) {
        throw ArityError("eight_point: need at least 8 pairs, got " + std::to_string(n));
    }

    const Eigen::Matrix3d Ta = hartley_transform(pairs, true);
    const Eigen::Matrix3d Tb = hartley_transform(pairs, false);

    Eigen::MatrixXd A(n, 9);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d a = Ta * homogeneous(pairs[i].a);
        const Eigen::Vector3d b = Tb * homogeneous(pairs[i].b);
        // Coefficients of b^T E a = 0 with E flattened row-major.
        A.row(i) << b[0] * a[0], b[0] * a[1], b[0] * a[2],
                    b[1] * a[0], b[1] * a[1], b[1] * a[2],
                    b[2] * a[0], b[2] * a[1], b[2] * a[2];
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv[7] > 0) || sv[0] / sv[7] > 1e12 || !std::isfinite(sv[0])) {
        throw DegeneracyError("eight_point: rank-deficient design matrix");
    }

    Eigen::Matrix3d E_hat;
    const Eigen::VectorXd e = svd.matrixV().col(8);
    E_hat << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
    Eigen::Matrix3d E = Tb.transpose() * E_hat * Ta;

    // Project onto the essential manifold: singular values (s, s, 0).
    Eigen::JacobiSVD<Eigen::Matrix3d> esvd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d U = esvd.matrixU();
    Eigen::Matrix3d V = esvd.matrixV();
    if (U.determinant() < 0) U = -U;
    if (V.determinant() < 0) V = -V;
    const double s = (esvd.singularValues()[0] + esvd.singularValues()[1]) / 2.0;
    E = U * Eigen::Vector3d(s, s, 0).asDiagonal() * V.transpose();

    Eigen::Matrix3d W;
    W << 0, -1, 0,
         1, 0, 0,
         0, 0, 1;
    const Eigen::Matrix3d R1 = U * W * V.transpose();
    const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
    const Eigen::Vector3d t = U.col(2);

    EssentialCandidate best;
    best.E = E;
    best.inliers = -1;
    const Eigen::Matrix3d rotations[2] = {R1, R2};
    const double signs[2] = {1.0, -1.0};
    for (const auto& R : rotations) {
        for (const double sign : signs) {
            const Eigen::Vector3d tc = sign * t;
            int in_front = 0;
            for (const auto& pair : pairs) {
                const Eigen::Vector2d depths = two_view_depths(R, tc, pair);
                if (depths[0] > 0 && depths[1] > 0) ++in_front;
            }
            if (in_front > best.inliers) {
                best.inliers = in_front;
                best.rotation = R;
                best.translation = tc;
            }
        }
    }
    return best;
}

std::vector<char> sampson_inlier_mask(const Eigen::Matrix3d& E,
                                      const std::vector<Correspondence>& pairs,
                                      double threshold) {
    std::vector<char> mask(pairs.size(), 0);
    for (size_t i = 0; i < pairs.size(); ++i) {
        mask[i] = sampson_error(E, pairs[i].a, pairs[i].b) < threshold ? 1 : 0;
    }
    return mask;
}

namespace {

struct ScoredCandidate {
    EssentialCandidate candidate;
    bool valid = false;
    int inliers = 0;
    double mean_inlier_error = std::numeric_limits<double>::max();
};

void score(ScoredCandidate& sc, const std::vector<Correspondence>& pairs, double threshold) {
    int count = 0;
    double error_sum = 0;
    for (const auto& pair : pairs) {
        const double err = sampson_error(sc.candidate.E, pair.a, pair.b);
        if (err < threshold) {
            ++count;
            error_sum += err;
        }
    }
    sc.inliers = count;
    sc.mean_inlier_error =
        count > 0 ? error_sum / count : std::numeric_limits<double>::max();
}

bool better(const ScoredCandidate& x, const ScoredCandidate& y) {
    if (x.inliers != y.inliers) return x.inliers > y.inliers;
    return x.mean_inlier_error < y.mean_inlier_error;
}

// Consensus refits: re-estimate from the Sampson inliers while the score
// improves. Each round also tries a trimmed fit (lowest 80% of consensus
// errors), which sheds sub-threshold outliers that would otherwise bias the
// least-squares solution away from an exact consensus. Leaves the candidate
// unchanged when the consensus is too small.
void refit_on_consensus(ScoredCandidate& sc, const std::vector<Correspondence>& pairs,
                        double threshold, int rounds) {
    for (int round = 0; round < rounds; ++round) {
        std::vector<std::pair<double, int>> by_error;
        for (size_t i = 0; i < pairs.size(); ++i) {
            const double err = sampson_error(sc.candidate.E, pairs[i].a, pairs[i].b);
            if (err < threshold) by_error.emplace_back(err, static_cast<int>(i));
        }
        if (static_cast<int>(by_error.size()) < 8) return;
        std::sort(by_error.begin(), by_error.end());

        bool improved = false;
        const size_t full = by_error.size();
        const size_t trimmed = std::max<size_t>(8, (full * 4) / 5);
        for (const size_t take : {full, trimmed}) {
            std::vector<Correspondence> consensus;
            consensus.reserve(take);
            for (size_t k = 0; k < take; ++k) consensus.push_back(pairs[by_error[k].second]);
            ScoredCandidate refit;
            try {
                refit.candidate = eight_point(consensus);
                refit.valid = true;
            } catch (const Error&) {
                continue;
            }
            score(refit, pairs, threshold);
            if (better(refit, sc)) {
                sc = refit;
                improved = true;
            }
        }
        if (!improved) return;
    }
}

// A least-squares 8-point fit over a contaminated set is dominated by the
// outliers' leverage, so each 50-pair set is solved by a small minimal-sample
// consensus search within the set, followed by consensus refits.
ScoredCandidate solve_subset(const std::vector<Correspondence>& subset, double threshold,
                             std::uint64_t subset_seed) {
    constexpr int kMinimalDraws = 32;
    const int n = static_cast<int>(subset.size());
    std::mt19937_64 rng(subset_seed);
    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = i;

    ScoredCandidate best;
    for (int draw = 0; draw < kMinimalDraws; ++draw) {
        for (int k = 0; k < 8; ++k) {
            std::uniform_int_distribution<int> dist(k, n - 1);
            std::swap(indices[k], indices[dist(rng)]);
        }
        std::vector<Correspondence> minimal(8);
        for (int k = 0; k < 8; ++k) minimal[k] = subset[indices[k]];
        ScoredCandidate sc;
        try {
            sc.candidate = eight_point(minimal);
            sc.valid = true;
        } catch (const Error&) {
            continue;
        }
        score(sc, subset, threshold);
        if (!best.valid || better(sc, best)) best = sc;
    }
    if (!best.valid) {
        // Degenerate draws throughout; fall back to the plain solve.
        try {
            best.candidate = eight_point(subset);
            best.valid = true;
            score(best, subset, threshold);
        } catch (const Error&) {
            return best;
        }
    }
    refit_on_consensus(best, subset, threshold, 3);
    return best;
}

}  // namespace

EssentialCandidate batched_eight_point(const std::vector<Correspondence>& pairs,
                                       std::uint64_t seed,
                                       const BatchedEightPointOptions& options) {
    if (!(options.sampson_threshold > 0)) {
        throw ContractError("batched_eight_point: sampson_threshold must be positive");
    }
    const int n = static_cast<int>(pairs.size());

    if (n < options.set_size) {
        EssentialCandidate cand = eight_point(pairs);
        ScoredCandidate sc{cand, true, 0, 0};
        score(sc, pairs, options.sampson_threshold);
        sc.candidate.inliers = sc.inliers;
        return sc.candidate;
    }

    // Draw all subsets up front with the seeded generator; candidate solves
    // then run in parallel into their own slots, so results do not depend on
    // the thread count.
    std::mt19937_64 rng(seed);
    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = i;
    std::vector<std::vector<Correspondence>> subsets(options.n_sets);
    for (int set = 0; set < options.n_sets; ++set) {
        for (int k = 0; k < options.set_size; ++k) {
            std::uniform_int_distribution<int> dist(k, n - 1);
            std::swap(indices[k], indices[dist(rng)]);
        }
        auto& subset = subsets[set];
        subset.reserve(options.set_size);
        for (int k = 0; k < options.set_size; ++k) subset.push_back(pairs[indices[k]]);
    }

    std::vector<ScoredCandidate> scored(options.n_sets);
    parallel_for(static_cast<size_t>(options.n_sets), [&](size_t set) {
        scored[set] = solve_subset(subsets[set], options.sampson_threshold,
                                   derive_seed(seed, 0x5e7 + set));
        if (scored[set].valid) score(scored[set], pairs, options.sampson_threshold);
    });

    const ScoredCandidate* best = nullptr;
    for (const auto& sc : scored) {
        if (!sc.valid) continue;
        if (best == nullptr || better(sc, *best)) best = &sc;
    }
    if (best == nullptr) {
        throw DegeneracyError("batched_eight_point: all candidate sets degenerate");
    }

    ScoredCandidate winner = *best;
    if (options.refit_on_inliers) {
        refit_on_consensus(winner, pairs, options.sampson_threshold, 3);
    }
    winner.candidate.inliers = winner.inliers;
    return winner.candidate;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 over the combined state.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

CameraInitResult initialize_cameras(const Scene& scene, int query_frame, std::uint64_t seed) {
    const int n_frames = static_cast<int>(scene.frames.size());
    if (query_frame < 0 || query_frame >= n_frames) {
        throw ContractError("initialize_cameras: query frame out of range");
    }

    CameraInitResult result;
    result.query_frame = query_frame;
    result.cameras.assign(n_frames, std::nullopt);
    result.status.resize(n_frames);

    const FrameInfo& qf = scene.frames[query_frame];
    const double query_log_f = initial_log_focal(qf.width, qf.height);
    const double query_f = std::exp(query_log_f);
    result.cameras[query_frame] =
        Camerad(Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Zero(), query_log_f,
                Camerad::center_principal_point(qf.width, qf.height));
    result.status[query_frame] = {query_frame, true, "", 0, 0};

    parallel_for(static_cast<size_t>(n_frames), [&](size_t fi) {
        const int frame = static_cast<int>(fi);
        if (frame == query_frame) return;
        FrameRegistration reg;
        reg.frame_id = frame;

        const FrameInfo& info = scene.frames[frame];
        const double log_f = initial_log_focal(info.width, info.height);
        const double f = std::exp(log_f);
        const Eigen::Vector2d pp = Camerad::center_principal_point(info.width, info.height);
        const Eigen::Vector2d query_pp =
            Camerad::center_principal_point(qf.width, qf.height);

        std::vector<Correspondence> pairs;
        for (const auto& track : scene.tracks) {
            const TrackObservation* qa = track.observation_in(query_frame);
            const TrackObservation* ob = track.observation_in(frame);
            if (qa == nullptr || ob == nullptr) continue;
            if (!is_visible(*qa) || !is_visible(*ob)) continue;
            pairs.push_back({(qa->y - query_pp) / query_f, (ob->y - pp) / f});
        }
        reg.covisible = static_cast<int>(pairs.size());
        if (reg.covisible < 8) {
            reg.failure = "fewer than 8 covisible tracks with query";
            result.status[frame] = reg;
            return;
        }

        BatchedEightPointOptions options;
        options.sampson_threshold = 0.6 / static_cast<double>(info.width);
        EssentialCandidate candidate;
        try {
            candidate = batched_eight_point(pairs, derive_seed(seed, fi), options);
        } catch (const Error& e) {
            reg.failure = e.what();
            result.status[frame] = reg;
            return;
        }

        // Fix the translation scale: align the median two-view depth of the
        // Sampson inliers to 1 in the query frame.
        const std::vector<char> inlier_mask =
            sampson_inlier_mask(candidate.E, pairs, options.sampson_threshold);
        std::vector<double> depths;
        for (size_t i = 0; i < pairs.size(); ++i) {
            if (!inlier_mask[i]) continue;
            const Eigen::Vector2d d =
                two_view_depths(candidate.rotation, candidate.translation, pairs[i]);
            if (d[0] > 0 && d[1] > 0) depths.push_back(d[0]);
        }
        reg.inliers = static_cast<int>(depths.size());
        if (reg.inliers < 8) {
            reg.failure = "fewer than 8 positive-depth inlier tracks";
            result.status[frame] = reg;
            return;
        }
        std::sort(depths.begin(), depths.end());
        const size_t m = depths.size() / 2;
        const double median =
            depths.size() % 2 == 1 ? depths[m] : 0.5 * (depths[m - 1] + depths[m]);

        reg.registered = true;
        result.cameras[frame] = Camerad::from_rotation(
            candidate.rotation, candidate.translation / median, log_f, pp);
        result.status[frame] = reg;
    });

    return result;
}

}  // namespace sfm
