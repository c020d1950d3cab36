// Command-line driver: synth, reconstruct, evaluate, export-colmap, gradcheck.
// Exit codes: 0 success, 1 reconstruction/solver failure, 2 usage or parse error.

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "sfm/colmap.hpp"
#include "sfm/errors.hpp"
#include "sfm/metrics.hpp"
#include "sfm/pipeline.hpp"
#include "sfm/ply.hpp"
#include "sfm/result_io.hpp"
#include "sfm/synthetic.hpp"
#include "sfm/track_io.hpp"

namespace {

std::string fmt(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

struct SynthArgs {
    sfm::SyntheticConfig config;
    std::string output;
    bool no_ground_truth = false;
};

int run_synth(const SynthArgs& args) {
    const sfm::SyntheticScene synthetic = sfm::generate_synthetic(args.config);
    sfm::SceneFile file = sfm::make_scene_file(synthetic);
    if (args.no_ground_truth) file.ground_truth.reset();
    sfm::save_scene_file(file, args.output);
    std::cout << "wrote " << args.output << " (" << args.config.n_frames << " frames, "
              << args.config.n_tracks << " tracks)\n";
    return 0;
}

struct ReconstructArgs {
    std::string scene_path;
    std::string out_dir;
    std::string config_path;
    std::int64_t query = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int max_rounds = 0;
    bool no_filtering = false;
};

int run_reconstruct(const ReconstructArgs& args) {
    sfm::PipelineConfig config;
    if (!args.config_path.empty()) config = sfm::PipelineConfig::load(args.config_path);
    if (args.seed_set) config.seed = args.seed;
    if (args.query >= 0) config.query_override = static_cast<int>(args.query);
    if (args.max_rounds > 0) config.max_rounds = args.max_rounds;
    if (args.no_filtering) config.filtering_enabled = false;

    const sfm::Scene scene = sfm::load_tracks(args.scene_path);
    const sfm::ReconstructionResult result = sfm::reconstruct(scene, config);
    sfm::save_reconstruction(result, scene, args.out_dir);
    std::cout << "registered "
              << result.report.rounds[result.report.chosen_round].frames_registered << "/"
              << scene.frames.size() << " frames, " << result.points.size()
              << " points, mean reprojection " << fmt(result.report.mean_reproj_px) << " px\n";
    return 0;
}

struct EvaluateArgs {
    std::string cameras_path;
    std::string scene_path;
    double auc_threshold = 30.0;
    std::string points_path;
    std::vector<double> cloud_thresholds{0.01, 0.02, 0.05};
    std::string json_path;
    std::string curve_path;
};

int run_evaluate(const EvaluateArgs& args) {
    const sfm::SceneFile file = sfm::load_scene_file(args.scene_path);
    if (!file.ground_truth.has_value()) {
        throw sfm::ParseError(args.scene_path + ": no ground truth to evaluate against");
    }
    const sfm::CameraSet cameras = sfm::load_cameras_json(args.cameras_path);
    if (cameras.size() != file.scene.frames.size()) {
        throw sfm::ReferentialError("evaluate: camera file frame count does not match scene");
    }

    std::vector<sfm::Camerad> predicted, truth;
    for (size_t f = 0; f < cameras.size(); ++f) {
        if (!cameras[f].has_value()) continue;
        predicted.push_back(*cameras[f]);
        truth.push_back(file.ground_truth->cameras[f]);
    }
    if (predicted.size() < 2) {
        throw sfm::ReconstructionError("evaluate: fewer than 2 registered cameras");
    }

    const std::vector<sfm::PairError> pairs = sfm::pairwise_errors(predicted, truth);
    std::vector<double> rre, rte, combined;
    for (const auto& p : pairs) {
        rre.push_back(p.rre_deg);
        if (p.rte_valid) rte.push_back(p.rte_deg);
        combined.push_back(sfm::pair_max_error(p));
    }
    const double rre15 = sfm::accuracy_at(rre, 15.0);
    const double rte15 = rte.empty() ? 0.0 : sfm::accuracy_at(rte, 15.0);
    const double auc_value = sfm::auc(pairs, args.auc_threshold);

    const std::string auc_name = "AUC@" + fmt(args.auc_threshold);
    std::cout << "scene,pairs,RRE@15,RTE@15," << auc_name << "\n";
    std::cout << args.scene_path << "," << pairs.size() << "," << fmt(rre15) << ","
              << fmt(rte15) << "," << fmt(auc_value) << "\n";

    nlohmann::json j;
    j["format_version"] = sfm::kFormatVersion;
    j["scene"] = args.scene_path;
    j["pairs"] = pairs.size();
    j["RRE@15"] = rre15;
    j["RTE@15"] = rte15;
    j[auc_name] = auc_value;

    if (!args.points_path.empty()) {
        const std::vector<Eigen::Vector3d> raw_points = sfm::read_ply(args.points_path);
        if (predicted.size() < 3) {
            throw sfm::ReconstructionError("evaluate: cloud metrics need >= 3 cameras");
        }
        const sfm::Similarity sim = sfm::align_camera_centers(predicted, truth);
        std::vector<Eigen::Vector3d> aligned;
        aligned.reserve(raw_points.size());
        for (const auto& p : raw_points) aligned.push_back(sim.apply(p));
        const auto cloud = sfm::cloud_accuracy_completeness(aligned, file.ground_truth->points,
                                                            args.cloud_thresholds);
        std::cout << "cloud_threshold,accuracy,completeness\n";
        for (const auto& m : cloud) {
            std::cout << fmt(m.threshold) << "," << fmt(m.accuracy_pct) << ","
                      << fmt(m.completeness_pct) << "\n";
            j["cloud"].push_back({{"threshold", m.threshold},
                                  {"accuracy", m.accuracy_pct},
                                  {"completeness", m.completeness_pct}});
        }
    }

    if (!args.json_path.empty()) {
        std::ofstream out(args.json_path, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    if (!args.curve_path.empty()) {
        std::ofstream out(args.curve_path, std::ios::binary | std::ios::trunc);
        out << "threshold_deg,accuracy_pct\n";
        for (const auto& [thr, acc] : sfm::accuracy_curve(combined, args.auc_threshold)) {
            out << fmt(thr) << "," << fmt(acc) << "\n";
        }
    }
    return 0;
}

struct ExportArgs {
    std::string scene_path;
    std::string result_dir;
    std::string out_dir;
};

int run_export(const ExportArgs& args) {
    const sfm::Scene scene = sfm::load_tracks(args.scene_path);
    const sfm::ReconstructionResult result = sfm::load_reconstruction(scene, args.result_dir);
    const std::vector<int> omitted = sfm::export_colmap(scene, result, args.out_dir);
    std::cout << "wrote COLMAP text model to " << args.out_dir << "\n";
    if (!omitted.empty()) {
        std::cout << "warning: omitted unregistered frames:";
        for (const int f : omitted) std::cout << " " << f;
        std::cout << "\n";
    }
    return 0;
}

// --- gradcheck --------------------------------------------------------------

Eigen::Matrix<double, 2, 11> finite_difference_jacobian(const sfm::Camerad& camera,
                                                        const Eigen::Vector3d& x, double h) {
    Eigen::Matrix<double, 2, 11> J;
    const Eigen::Matrix<double, 8, 1> params = camera.params();
    for (int k = 0; k < 8; ++k) {
        Eigen::Matrix<double, 8, 1> plus = params, minus = params;
        plus[k] += h;
        minus[k] -= h;
        const Eigen::Vector2d yp = sfm::project(camera.with_params(plus), x).y;
        const Eigen::Vector2d ym = sfm::project(camera.with_params(minus), x).y;
        J.col(k) = (yp - ym) / (2 * h);
    }
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d plus = x, minus = x;
        plus[k] += h;
        minus[k] -= h;
        J.col(8 + k) =
            (sfm::project(camera, plus).y - sfm::project(camera, minus).y) / (2 * h);
    }
    return J;
}

double jacobian_sweep(std::uint64_t seed, int samples) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> focal(50.0, 2000.0);
    std::uniform_real_distribution<double> pp(0.0, 1000.0);

    double worst = 0;
    for (int s = 0; s < samples; ++s) {
        const Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        const Eigen::Vector3d t(unit(rng), unit(rng), unit(rng));
        const sfm::Camerad camera(q, t, std::log(focal(rng)),
                                  Eigen::Vector2d(pp(rng), pp(rng)));
        Eigen::Vector3d x;
        do {
            x = Eigen::Vector3d(2 * unit(rng), 2 * unit(rng), 2 * unit(rng));
        } while (std::abs((camera.rotation() * x + camera.t())[2]) < 0.15);

        const Eigen::Matrix<double, 2, 11> analytic = sfm::project_jacobian(camera, x);
        const Eigen::Matrix<double, 2, 11> fd = finite_difference_jacobian(camera, x, 1e-6);
        const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
        worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

Eigen::VectorXd pack_parameters(const sfm::BAProblem& problem) {
    Eigen::VectorXd p(problem.num_parameters());
    const int n_cam = static_cast<int>(problem.cameras.size());
    for (int i = 0; i < n_cam; ++i) p.segment<8>(8 * i) = problem.cameras[i].params();
    for (size_t j = 0; j < problem.points.size(); ++j) {
        p.segment<3>(8 * n_cam + 3 * static_cast<int>(j)) = problem.points[j];
    }
    return p;
}

sfm::BAProblem gradcheck_problem(std::uint64_t seed) {
    sfm::SyntheticConfig config;
    config.n_frames = 3;
    config.n_tracks = 10;
    config.noise_px = 0.0;
    config.seed = seed;
    const sfm::SyntheticScene synthetic = sfm::generate_synthetic(config);

    sfm::BAProblem problem;
    problem.cameras = synthetic.gt_cameras;
    problem.points = synthetic.gt_points;
    problem.frozen.assign(problem.cameras.size(), {0, 0, 0, 0, 0, 0, 0, 0});
    problem.freeze_camera(0, /*include_focal=*/false);
    int axis = 0;
    problem.cameras[1].t().cwiseAbs().maxCoeff(&axis);
    problem.freeze_translation_axis(1, axis);
    for (int j = 0; j < config.n_tracks; ++j) {
        for (int i = 0; i < config.n_frames; ++i) {
            problem.observations.push_back({i, j, synthetic.ideal_obs[j][i], 1.0});
        }
    }
    return problem;
}

double implicit_gradient_check(std::uint64_t seed) {
    sfm::BAProblem problem = gradcheck_problem(seed);
    sfm::LMOptions options;
    options.rel_decrease_tol = 0;  // run to the gradient tolerance
    const sfm::LMState state = sfm::lm_solve(problem, options);

    std::mt19937_64 rng(sfm::derive_seed(seed, 0xBADA55));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd downstream(problem.num_parameters());
    for (int i = 0; i < downstream.size(); ++i) downstream[i] = gauss(rng);

    const std::vector<Eigen::Vector2d> analytic =
        sfm::lm_gradient_wrt_observations(problem, std::min(state.lambda, 1e-8), downstream);
    double scale = 1e-12;
    for (const auto& g : analytic) scale = std::max(scale, g.cwiseAbs().maxCoeff());

    // Zero frozen entries so the finite-difference functional matches.
    Eigen::VectorXd probe = downstream;
    for (size_t i = 0; i < problem.cameras.size(); ++i) {
        for (int c = 0; c < 8; ++c) {
            if (problem.frozen[i][c]) probe[8 * static_cast<int>(i) + c] = 0;
        }
    }

    const double h = 1e-4;
    double worst = 0;
    for (size_t k = 0; k < problem.observations.size(); ++k) {
        for (int c = 0; c < 2; ++c) {
            double L[2];
            for (int side = 0; side < 2; ++side) {
                sfm::BAProblem perturbed = problem;
                perturbed.observations[k].y[c] += side == 0 ? h : -h;
                sfm::lm_solve(perturbed, options);
                L[side] = probe.dot(pack_parameters(perturbed));
            }
            const double fd = (L[0] - L[1]) / (2 * h);
            worst = std::max(worst, std::abs(fd - analytic[k][c]) / scale);
        }
    }
    return worst;
}

int run_gradcheck(std::uint64_t seed) {
    const double jac = jacobian_sweep(seed, 1000);
    const bool jac_ok = jac < 1e-5;
    std::printf(
        "projection jacobian: max relative error %.3e over 1000 samples (tolerance 1e-5): %s\n",
        jac, jac_ok ? "PASS" : "FAIL");

    const double ift = implicit_gradient_check(seed);
    const bool ift_ok = ift < 1e-3;
    std::printf(
        "implicit gradient:   max relative error %.3e vs finite-difference re-solves "
        "(tolerance 1e-3): %s\n",
        ift, ift_ok ? "PASS" : "FAIL");
    return jac_ok && ift_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Track-driven structure-from-motion: synthetic scenes, reconstruction, "
                 "evaluation, COLMAP export"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ground-truth scene");
    synth_cmd->add_option("--frames", synth.config.n_frames, "Number of frames");
    synth_cmd->add_option("--tracks", synth.config.n_tracks, "Number of tracks");
    synth_cmd->add_option("--noise", synth.config.noise_px, "Observation noise std (px)");
    synth_cmd->add_option("--outliers", synth.config.outlier_frac, "Outlier fraction [0,1)");
    synth_cmd->add_option("--occlusion", synth.config.occlusion_frac, "Occluded fraction [0,1)");
    synth_cmd->add_option("--width", synth.config.width, "Image width (px)");
    synth_cmd->add_option("--height", synth.config.height, "Image height (px)");
    synth_cmd->add_option("--focal", synth.config.focal_px, "True focal (px); 0 = 1.2*max side");
    synth_cmd->add_option("--seed", synth.config.seed, "RNG seed");
    synth_cmd->add_option("-o,--output", synth.output, "Output scene JSON")->required();
    synth_cmd->add_flag("--no-ground-truth", synth.no_ground_truth,
                        "Omit the ground-truth sidecar");

    ReconstructArgs rec;
    auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct cameras and points");
    rec_cmd->add_option("scene", rec.scene_path, "Scene/track JSON")->required();
    rec_cmd->add_option("-o,--output", rec.out_dir, "Output directory")->required();
    rec_cmd->add_option("--config", rec.config_path, "Pipeline config JSON");
    rec_cmd->add_option("--query", rec.query, "Query frame override");
    rec_cmd->add_option("--seed", rec.seed, "RNG seed")->each([&rec](const std::string&) {
        rec.seed_set = true;
    });
    rec_cmd->add_option("--max-rounds", rec.max_rounds, "Maximum reconstruction rounds");
    rec_cmd->add_flag("--no-filtering", rec.no_filtering, "Disable the outlier filters");

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Camera and cloud metrics vs ground truth");
    eval_cmd->add_option("cameras", eval.cameras_path, "Predicted cameras.json")->required();
    eval_cmd->add_option("scene", eval.scene_path, "Scene JSON with ground truth")->required();
    eval_cmd->add_option("--auc", eval.auc_threshold, "AUC threshold (degrees)");
    eval_cmd->add_option("--points", eval.points_path, "Predicted points.ply for cloud metrics");
    eval_cmd->add_option("--cloud-thresholds", eval.cloud_thresholds,
                         "Cloud metric distance thresholds (scene units)");
    eval_cmd->add_option("--json", eval.json_path, "Write metrics JSON here");
    eval_cmd->add_option("--curve", eval.curve_path, "Write accuracy curve CSV here");

    ExportArgs exp;
    auto* exp_cmd = app.add_subcommand("export-colmap", "Write COLMAP text files");
    exp_cmd->add_option("scene", exp.scene_path, "Scene/track JSON")->required();
    exp_cmd->add_option("result", exp.result_dir, "Reconstruction output directory")->required();
    exp_cmd->add_option("-o,--output", exp.out_dir, "COLMAP output directory")->required();

    std::uint64_t gradcheck_seed = 0;
    auto* grad_cmd =
        app.add_subcommand("gradcheck", "Check analytic Jacobians and the implicit gradient");
    grad_cmd->add_option("--seed", gradcheck_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth);
        if (rec_cmd->parsed()) return run_reconstruct(rec);
        if (eval_cmd->parsed()) return run_evaluate(eval);
        if (exp_cmd->parsed()) return run_export(exp);
        if (grad_cmd->parsed()) return run_gradcheck(gradcheck_seed);
    } catch (const sfm::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfm::ReferentialError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfm::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfm::GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfm::Error& e) {
        std::cerr << "reconstruction failed: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
