#include "ngsplat/core/parallel.hpp"
#include "ngsplat/io/csv.hpp"
#include "ngsplat/io/image_io.hpp"
#include "ngsplat/io/ply.hpp"
#include "ngsplat/io/scene.hpp"
#include "ngsplat/opt/fit.hpp"
#include "ngsplat/opt/gradcheck.hpp"
#include "ngsplat/render/backward.hpp"
#include "ngsplat/studies/instability.hpp"
#include "ngsplat/studies/rotation_study.hpp"
#include "ngsplat/triplane/triplane.hpp"
#include "ngsplat/triplane/triplane_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace ngs;

RenderMode parse_render_mode(const std::string& s) {
    if (s == "rgb") return RenderMode::Rgb;
    if (s == "normal") return RenderMode::Normal;
    if (s == "depth") return RenderMode::Depth;
    throw CLI::ValidationError("--mode", "expected rgb|normal|depth");
}

ParamMode parse_fit_mode(const std::string& s) {
    if (s == "unconstrained") return ParamMode::Unconstrained;
    if (s == "isotropic") return ParamMode::Isotropic;
    if (s == "normal-guided") return ParamMode::NormalGuided;
    throw CLI::ValidationError("--mode", "expected unconstrained|isotropic|normal-guided");
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<IterationMetrics>& metrics) {
    CsvWriter csv({"iteration", "loss", "psnr"});
    for (const auto& m : metrics)
        csv.row({std::to_string(m.iteration), CsvWriter::format(m.loss),
                 CsvWriter::format(m.psnr)});
    csv.save(path);
}

void save_render_png(const std::filesystem::path& path, const RenderOutput<float>& out,
                     RenderMode mode) {
    switch (mode) {
        case RenderMode::Rgb:
            save_png_rgb8(path, out.payload_image);
            break;
        case RenderMode::Normal: {
            // Composited normals are raw weighted sums; renormalize only here,
            // for visualization.
            Image<float> vis(out.payload_image.width, out.payload_image.height, 3);
            for (int y = 0; y < vis.height; ++y)
                for (int x = 0; x < vis.width; ++x) {
                    Vec3<float> n(out.payload_image.at(y, x, 0), out.payload_image.at(y, x, 1),
                                  out.payload_image.at(y, x, 2));
                    if (n.norm() > 1e-6f) n.normalize();
                    for (int c = 0; c < 3; ++c) vis.at(y, x, c) = n[c];
                }
            save_png_normal16(path, vis);
            break;
        }
        case RenderMode::Depth: {
            float dmax = 0;
            for (float v : out.depth_image.data) dmax = std::max(dmax, v);
            Image<float> vis(out.depth_image.width, out.depth_image.height, 1);
            if (dmax > 0)
                for (std::size_t i = 0; i < vis.data.size(); ++i)
                    vis.data[i] = out.depth_image.data[i] / dmax;
            save_png_gray8(path, vis);
            break;
        }
    }
}

int run_triplane_selftest(std::uint64_t seed, const std::string& csv_out) {
    SeededRng rng(seed);
    ImageFeatureMap<float> base(16, 8);
    for (auto& v : base.data) v = static_cast<float>(rng.normal());
    const auto stack = build_multiscale(base, 3, seed);

    int failures = 0;
    auto expect = [&](bool ok, const char* what) {
        std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what);
        if (!ok) ++failures;
    };

    expect(stack.scales.size() == 3, "stack has requested scale count");
    expect(stack.scales[1].resolution == 2 * stack.scales[0].resolution &&
               stack.scales[2].resolution == 4 * stack.scales[0].resolution,
           "resolution doubles per scale");
    expect(stack.scales[1].channels * 2 == stack.scales[0].channels, "channels halve per scale");

    // Node-exact fetch on scale 0.
    bool node_exact = true;
    for (int trial = 0; trial < 50; ++trial) {
        const auto& t = stack.scales[0];
        const int i = static_cast<int>(rng.uniform(0, t.resolution - 1e-9));
        const int j = static_cast<int>(rng.uniform(0, t.resolution - 1e-9));
        Vec3<float> p;
        p.x() = 2.0f * i / (t.resolution - 1) - 1.0f;
        p.y() = 2.0f * j / (t.resolution - 1) - 1.0f;
        p.z() = p.x();  // zx plane hits a node too when z == x
        const auto feat = fetch(t, p);
        for (int c = 0; c < t.channels; ++c)
            if (std::abs(feat[c] - t.planes[0].at(i, j, c)) > 2e-5f) node_exact = false;
    }
    expect(node_exact, "node-exact fetch");

    // Attention rows sum to one and ignore key order.
    OccupancyFeature<float> occ;
    occ.channels = base.channels;
    occ.tokens = TokenMatrix<float>(5, base.channels);
    for (int i = 0; i < occ.tokens.rows(); ++i)
        for (int j = 0; j < occ.tokens.cols(); ++j)
            occ.tokens(i, j) = static_cast<float>(rng.normal());
    const auto att = cross_attend_detail(base, occ, seed);
    bool rows_ok = true;
    for (int r = 0; r < att.weights.rows(); ++r)
        if (std::abs(att.weights.row(r).sum() - 1.0f) > 1e-5f) rows_ok = false;
    expect(rows_ok, "attention rows sum to 1");

    OccupancyFeature<float> perm = occ;
    perm.tokens.row(0) = occ.tokens.row(4);
    perm.tokens.row(4) = occ.tokens.row(0);
    const auto att2 = cross_attend_detail(base, perm, seed);
    float max_dev = 0;
    for (std::size_t i = 0; i < att.output.data.size(); ++i)
        max_dev = std::max(max_dev, std::abs(att.output.data[i] - att2.output.data[i]));
    expect(max_dev < 1e-5f, "attention invariant to key/value permutation");

    // Mixup endpoints.
    FeatureVector<float> f0(4), f1(4);
    f0 << 2, 0, 1, -1;
    f1 << 0, 2, -1, 3;
    expect((mixup(f0, f1, 1.0f) - f0).norm() == 0 && (mixup(f0, f1, 0.0f) - f1).norm() == 0,
           "mixup endpoints");

    if (!csv_out.empty()) {
        CsvWriter csv({"px", "py", "pz", "scale", "channel", "value"});
        for (int trial = 0; trial < 8; ++trial) {
            Vec3<float> p(static_cast<float>(rng.uniform(-1, 1)),
                          static_cast<float>(rng.uniform(-1, 1)),
                          static_cast<float>(rng.uniform(-1, 1)));
            for (std::size_t s = 0; s < stack.scales.size(); ++s) {
                const auto feat = fetch(stack.scales[s], p);
                for (int c = 0; c < feat.size(); ++c)
                    csv.row({CsvWriter::format(p.x()), CsvWriter::format(p.y()),
                             CsvWriter::format(p.z()), std::to_string(s), std::to_string(c),
                             CsvWriter::format(feat[c])});
            }
        }
        csv.save(csv_out);
    }
    return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D Gaussian splatting fitting and study harness"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    // scene gen
    auto* scene_cmd = app.add_subcommand("scene", "scene synthesis");
    scene_cmd->require_subcommand(1);
    auto* gen = scene_cmd->add_subcommand("gen", "generate a preset scene");
    std::string gen_preset = "sphere", gen_out;
    SceneGenConfig gen_cfg;
    gen->add_option("--preset", gen_preset, "sphere|box|two-tone-sphere|textured-sphere");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--views", gen_cfg.views, "camera count");
    gen->add_option("--resolution", gen_cfg.resolution, "image side in pixels");
    gen->add_option("--points", gen_cfg.points, "surface sample count");
    gen->add_option("--seed", gen_cfg.seed, "RNG seed");

    // render
    auto* render_cmd = app.add_subcommand("render", "render a field from a scene camera");
    std::string render_scene, render_field, render_mode_str = "rgb", render_out;
    int camera_index = 0;
    bool use_oracle = false;
    render_cmd->add_option("--scene", render_scene, "scene manifest")->required();
    render_cmd->add_option("--field", render_field, "field PLY")->required();
    render_cmd->add_option("--camera-index", camera_index, "rig camera index");
    render_cmd->add_option("--mode", render_mode_str, "rgb|normal|depth");
    render_cmd->add_option("--out", render_out, "output PNG")->required();
    render_cmd->add_flag("--oracle", use_oracle, "use the brute-force reference renderer");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "optimize a field against a scene");
    std::string fit_scene, fit_mode_str = "unconstrained", fit_out, fit_metrics, fit_normal_metrics;
    FitConfig fit_cfg;
    bool freeze_positions = false;
    std::vector<int> fit_train_views;
    fit_cmd->add_option("--scene", fit_scene, "scene manifest")->required();
    fit_cmd->add_option("--mode", fit_mode_str, "unconstrained|isotropic|normal-guided");
    fit_cmd->add_option("--iters", fit_cfg.iterations, "RGB-stage iterations");
    fit_cmd->add_option("--stage-a-iters", fit_cfg.stage_a_iterations,
                        "normal-stage iterations (normal-guided)");
    fit_cmd->add_option("--sh-schedule", fit_cfg.sh_degree_schedule,
                        "iteration at which SH degree goes 0->1");
    fit_cmd->add_option("--lambda", fit_cfg.ssim_weight, "SSIM weight in the loss");
    fit_cmd->add_option("--seed", fit_cfg.seed, "RNG seed");
    fit_cmd->add_option("--out", fit_out, "output field PLY")->required();
    fit_cmd->add_option("--metrics", fit_metrics, "per-iteration metrics CSV");
    fit_cmd->add_option("--normal-metrics", fit_normal_metrics, "stage-A metrics CSV");
    fit_cmd->add_option("--train-views", fit_train_views, "train view indices (default: all)");
    fit_cmd->add_flag("--freeze-positions", freeze_positions, "do not optimize positions");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::uint64_t grad_seed = kGradCheckDefaultSeed;
    int grad_size = 32, grad_gaussians = 10;
    grad_cmd->add_option("--seed", grad_seed, "base seed");
    grad_cmd->add_option("--size", grad_size, "image side in pixels");
    grad_cmd->add_option("--gaussians", grad_gaussians, "gaussians per scene");

    // study
    auto* study_cmd = app.add_subcommand("study", "statistical studies");
    study_cmd->require_subcommand(1);
    auto* inst = study_cmd->add_subcommand("instability", "parameter instability across refits");
    std::string inst_scene, inst_out;
    int inst_trials = 8, inst_iters = 600, inst_points = 0;
    std::uint64_t inst_seed = 1;
    inst->add_option("--scene", inst_scene, "scene manifest")->required();
    inst->add_option("--out", inst_out, "report CSV")->required();
    inst->add_option("--trials", inst_trials, "number of refits (M)");
    inst->add_option("--iters", inst_iters, "fit iterations per refit");
    inst->add_option("--points", inst_points, "subsample the cloud to N points (0 = all)");
    inst->add_option("--seed", inst_seed, "base seed");

    auto* rot = study_cmd->add_subcommand("rotation", "rotation representation comparison");
    std::string rot_scene, rot_out;
    int rot_iters = 800, rot_stage_a = 500;
    std::uint64_t rot_seed = 1;
    rot->add_option("--scene", rot_scene, "scene manifest")->required();
    rot->add_option("--out", rot_out, "report CSV")->required();
    rot->add_option("--iters", rot_iters, "fit iterations per mode");
    rot->add_option("--stage-a-iters", rot_stage_a, "normal-stage iterations");
    rot->add_option("--seed", rot_seed, "seed");

    // triplane selftest
    auto* tri = app.add_subcommand("triplane", "triplane feature machinery");
    tri->require_subcommand(1);
    auto* selftest = tri->add_subcommand("selftest", "run the triplane property checks");
    std::uint64_t tri_seed = 1;
    std::string tri_csv;
    selftest->add_option("--seed", tri_seed, "RNG seed");
    selftest->add_option("--out", tri_csv, "optional fetched-feature CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    if (threads > 0) set_thread_count(threads);

    try {
        if (gen->parsed()) {
            gen_cfg.preset = parse_preset(gen_preset);
            const Scene scene = gen_scene(gen_cfg);
            save_scene(scene, gen_out);
            std::printf("wrote %s (%d views, %zu points)\n",
                        (std::filesystem::path(gen_out) / "manifest.json").c_str(),
                        static_cast<int>(scene.rig.size()), scene.points.size());
        } else if (render_cmd->parsed()) {
            const Scene scene = load_scene(render_scene);
            const GaussianField<float> field = load_field(render_field);
            if (camera_index < 0 || camera_index >= static_cast<int>(scene.rig.size()))
                throw std::runtime_error("camera index out of range");
            const RenderMode mode = parse_render_mode(render_mode_str);
            const auto& cam = scene.rig.cameras[camera_index];
            const auto out = use_oracle ? oracle_render(field, cam, mode, scene.background)
                                        : render(field, cam, mode, scene.background);
            save_render_png(render_out, out, mode);
            std::printf("wrote %s\n", render_out.c_str());
        } else if (fit_cmd->parsed()) {
            const Scene scene = load_scene(fit_scene);
            fit_cfg.param_mode = parse_fit_mode(fit_mode_str);
            fit_cfg.optimize_positions = !freeze_positions;
            fit_cfg.train_views = fit_train_views;
            const FitResult result = fit(scene, fit_cfg);
            save_field(fit_out, result.field);
            if (!fit_metrics.empty()) write_metrics_csv(fit_metrics, result.metrics);
            if (!fit_normal_metrics.empty())
                write_metrics_csv(fit_normal_metrics, result.normal_stage_metrics);
            std::printf("final loss %.6f, eval psnr %.3f dB, eval ssim %.4f\n",
                        result.metrics.empty() ? 0.0f : result.metrics.back().loss,
                        result.final_psnr, result.final_ssim);
        } else if (grad_cmd->parsed()) {
            const auto res = gradcheck_all(grad_seed, grad_size, grad_gaussians);
            std::printf("gradcheck: %d elements, worst |fd-an| ratio %.3e at %s "
                        "(analytic %.6e, fd %.6e)\n",
                        res.checked, res.worst_ratio, res.worst_label.c_str(),
                        res.worst_analytic, res.worst_fd);
            if (!res.passed()) {
                std::fprintf(stderr, "gradcheck failed\n");
                return 2;
            }
        } else if (inst->parsed()) {
            const Scene scene = load_scene(inst_scene);
            InstabilityConfig cfg;
            cfg.trials = inst_trials;
            cfg.base_seed = inst_seed;
            for (int m = 0; m < inst_trials; ++m) cfg.seeds.push_back(inst_seed + 1000 + m);
            cfg.point_limit = inst_points;
            cfg.fit.iterations = inst_iters;
            cfg.fit.sh_degree_schedule = inst_iters / 2;
            const auto result = run_instability_study(scene, cfg);
            result.report.save_csv(inst_out);
            for (const auto& row : result.report.rows)
                std::printf("IS %-10s %.4f (raw %.4f)\n", row.label.c_str(), row.value,
                            row.raw_value);
            std::printf("wrote %s\n", inst_out.c_str());
        } else if (rot->parsed()) {
            const Scene scene = load_scene(rot_scene);
            RotationStudyConfig cfg;
            cfg.fit.iterations = rot_iters;
            cfg.fit.stage_a_iterations = rot_stage_a;
            cfg.fit.sh_degree_schedule = rot_iters / 2;
            cfg.fit.seed = rot_seed;
            const auto result = run_rotation_study(scene, cfg);
            result.save_csv(rot_out);
            for (const auto& row : result.rows)
                std::printf("%-14s psnr %.3f dB  ssim %.4f  (reference %.2f)\n",
                            param_mode_name(row.mode), row.psnr, row.ssim, row.reference_psnr);
            std::printf("wrote %s\n", rot_out.c_str());
        } else if (selftest->parsed()) {
            return run_triplane_selftest(tri_seed, tri_csv);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
