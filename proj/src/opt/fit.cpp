#include "ngsplat/opt/fit.hpp"

#include "ngsplat/core/parallel.hpp"
#include "ngsplat/core/rng.hpp"
#include "ngsplat/opt/losses.hpp"
#include "ngsplat/render/backward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ngs {

namespace {

struct ParamGroupSet {
    bool position = false;
    bool rotation = false;
    bool normal = false;
    bool scales = false;  // tied to one scalar per Gaussian in Isotropic mode
    bool opacity = false;
    bool sh = false;
};

// Flat views over the field for Adam, one state per group.
struct Optimizer {
    AdamState position, rotation, normal, scales, opacity, sh;

    void step_all(GaussianField<float>& field, const FieldGradients<float>& grads,
                  const ParamGroupSet& groups, const FitConfig& cfg) {
        const std::size_t n = field.size();
        if (groups.position) {
            gather_step_scatter(
                n * 3, cfg.lr_position, position,
                [&](std::size_t i) { return field.gaussians[i / 3].position[i % 3]; },
                [&](std::size_t i) { return grads.position[i / 3][i % 3]; },
                [&](std::size_t i, float v) { field.gaussians[i / 3].position[i % 3] = v; });
        }
        if (groups.rotation) {
            gather_step_scatter(
                n * 4, cfg.lr_rotation, rotation,
                [&](std::size_t i) { return field.gaussians[i / 4].rotation_raw[i % 4]; },
                [&](std::size_t i) { return grads.rotation_raw[i / 4][i % 4]; },
                [&](std::size_t i, float v) { field.gaussians[i / 4].rotation_raw[i % 4] = v; });
        }
        if (groups.normal) {
            gather_step_scatter(
                n * 3, cfg.lr_rotation, normal,
                [&](std::size_t i) { return field.gaussians[i / 3].normal_raw[i % 3]; },
                [&](std::size_t i) { return grads.normal_raw[i / 3][i % 3]; },
                [&](std::size_t i, float v) { field.gaussians[i / 3].normal_raw[i % 3] = v; });
        }
        if (groups.scales) {
            if (field.param_mode == ParamMode::Isotropic) {
                // One shared scale per Gaussian; the gradient is the sum over
                // the three tied components.
                gather_step_scatter(
                    n, cfg.lr_scales, scales,
                    [&](std::size_t i) { return field.gaussians[i].scales_log[0]; },
                    [&](std::size_t i) { return grads.scales_log[i].sum(); },
                    [&](std::size_t i, float v) { field.gaussians[i].scales_log.setConstant(v); });
            } else {
                gather_step_scatter(
                    n * 3, cfg.lr_scales, scales,
                    [&](std::size_t i) { return field.gaussians[i / 3].scales_log[i % 3]; },
                    [&](std::size_t i) { return grads.scales_log[i / 3][i % 3]; },
                    [&](std::size_t i, float v) { field.gaussians[i / 3].scales_log[i % 3] = v; });
            }
        }
        if (groups.opacity) {
            gather_step_scatter(
                n, cfg.lr_opacity, opacity,
                [&](std::size_t i) { return field.gaussians[i].opacity_raw; },
                [&](std::size_t i) { return grads.opacity_raw[i]; },
                [&](std::size_t i, float v) { field.gaussians[i].opacity_raw = v; });
        }
        if (groups.sh) {
            gather_step_scatter(
                n * 12, cfg.lr_sh, sh,
                [&](std::size_t i) { return field.gaussians[i / 12].sh(i % 12 / 4, i % 4); },
                [&](std::size_t i) { return grads.sh[i / 12](i % 12 / 4, i % 4); },
                [&](std::size_t i, float v) { field.gaussians[i / 12].sh(i % 12 / 4, i % 4) = v; });
        }
    }

private:
    std::vector<float> pbuf_, gbuf_;

    template <class GetP, class GetG, class SetP>
    void gather_step_scatter(std::size_t count, float lr, AdamState& state, GetP&& getp,
                             GetG&& getg, SetP&& setp) {
        pbuf_.resize(count);
        gbuf_.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            pbuf_[i] = getp(i);
            gbuf_[i] = getg(i);
        }
        adam_step<float>(pbuf_, std::span<const float>(gbuf_), state, lr);
        for (std::size_t i = 0; i < count; ++i) setp(i, pbuf_[i]);
    }
};

std::vector<int> resolve_train_views(const Scene& scene, const FitConfig& cfg) {
    if (!cfg.train_views.empty()) {
        for (int v : cfg.train_views)
            if (v < 0 || v >= static_cast<int>(scene.rig.size()))
                throw std::invalid_argument("train view index out of range");
        return cfg.train_views;
    }
    std::vector<int> all(scene.rig.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

Image<float> encode_normal(const Image<float>& raw) {
    Image<float> enc(raw.width, raw.height, raw.channels);
    for (std::size_t i = 0; i < raw.data.size(); ++i) enc.data[i] = raw.data[i] * 0.5f + 0.5f;
    return enc;
}

Image<float> apply_mask(const Image<float>& img, const Image<float>& mask) {
    Image<float> out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y, x, c) * mask.at(y, x, 0);
    return out;
}

}  // namespace

CropRect object_crop(const std::vector<Vec3<float>>& points, const Camera<float>& cam,
                     float margin) {
    float x0 = std::numeric_limits<float>::max(), y0 = x0;
    float x1 = std::numeric_limits<float>::lowest(), y1 = x1;
    for (const auto& p : points) {
        const Vec3<float> pc = cam.to_camera(p);
        if (pc.z() <= static_cast<float>(kNearPlane)) continue;
        const Vec2<float> uv = cam.project_point(pc);
        x0 = std::min(x0, uv.x());
        y0 = std::min(y0, uv.y());
        x1 = std::max(x1, uv.x());
        y1 = std::max(y1, uv.y());
    }
    CropRect rect;
    if (x0 > x1) {  // nothing projects; fall back to the full image
        rect.x1 = cam.width;
        rect.y1 = cam.height;
        return rect;
    }
    const float mx = margin * (x1 - x0);
    const float my = margin * (y1 - y0);
    rect.x0 = std::clamp(static_cast<int>(std::floor(x0 - mx)), 0, cam.width);
    rect.y0 = std::clamp(static_cast<int>(std::floor(y0 - my)), 0, cam.height);
    rect.x1 = std::clamp(static_cast<int>(std::ceil(x1 + mx)), 0, cam.width);
    rect.y1 = std::clamp(static_cast<int>(std::ceil(y1 + my)), 0, cam.height);
    // Keep at least a 16 px side so SSIM windows fit.
    const int min_side = std::min({16, cam.width, cam.height});
    while (rect.width() < min_side) {
        if (rect.x0 > 0) --rect.x0;
        if (rect.width() < min_side && rect.x1 < cam.width) ++rect.x1;
    }
    while (rect.height() < min_side) {
        if (rect.y0 > 0) --rect.y0;
        if (rect.height() < min_side && rect.y1 < cam.height) ++rect.y1;
    }
    return rect;
}

Image<float> crop_image(const Image<float>& img, const CropRect& rect) {
    Image<float> out(rect.width(), rect.height(), img.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(rect.y0 + y, rect.x0 + x, c);
    return out;
}

GaussianField<float> init_field_from_points(const std::vector<Vec3<float>>& points,
                                            const std::vector<Vec3<float>>& colors,
                                            ParamMode mode, std::uint64_t seed) {
    if (points.empty()) throw std::invalid_argument("cannot initialize from zero points");
    SeededRng rng(seed);
    const float spacing = std::max(mean_nn_distance(points), 1e-4f);
    const float slog = std::log(spacing / 2.0f);

    GaussianField<float> field;
    field.param_mode = mode;
    field.sh_degree = 0;
    field.gaussians.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Gaussian3D<float>& g = field.gaussians[i];
        g.position = points[i];
        g.scales_log.setConstant(slog);
        g.opacity_raw = logit(0.1f);
        g.rotation_raw = Vec4<float>(1, 0, 0, 0);
        g.normal_raw = rng.unit_vec3<float>();
        if (i < colors.size())
            for (int c = 0; c < 3; ++c)
                g.sh(c, 0) = (colors[i][c] - 0.5f) / static_cast<float>(kShC0);
    }
    return field;
}

void reinit_gaussian_parameters(GaussianField<float>& field,
                                const std::vector<Vec3<float>>& colors, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<Vec3<float>> positions(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) positions[i] = field.gaussians[i].position;
    const float spacing = std::max(mean_nn_distance(positions), 1e-4f);
    const float slog = std::log(spacing / 2.0f);

    for (std::size_t i = 0; i < field.size(); ++i) {
        Gaussian3D<float>& g = field.gaussians[i];
        g.rotation_raw = rng.unit_quat<float>();
        if (field.param_mode == ParamMode::Isotropic) {
            g.scales_log.setConstant(slog + static_cast<float>(rng.normal()) * 0.35f);
        } else {
            for (int k = 0; k < 3; ++k)
                g.scales_log[k] = slog + static_cast<float>(rng.normal()) * 0.35f;
        }
        g.opacity_raw = logit(0.1f) + static_cast<float>(rng.normal()) * 0.5f;
        g.normal_raw = rng.unit_vec3<float>();
        for (int c = 0; c < 3; ++c) {
            const float base = i < colors.size() ? (colors[i][c] - 0.5f) / static_cast<float>(kShC0)
                                                 : 0.0f;
            g.sh(c, 0) = base + static_cast<float>(rng.normal()) * 0.15f;
            for (int k = 1; k < 4; ++k) g.sh(c, k) = static_cast<float>(rng.normal()) * 0.02f;
        }
    }
}

void evaluate_views(const Scene& scene, const GaussianField<float>& field,
                    const std::vector<int>& views, float& out_psnr, float& out_ssim) {
    double psnr_acc = 0, ssim_acc = 0;
    for (int v : views) {
        const Camera<float>& cam = scene.rig.cameras[v];
        const auto out = render(field, cam, RenderMode::Rgb, scene.background);
        const CropRect rect = object_crop(scene.points, cam);
        const Image<float> pred = crop_image(out.payload_image, rect);
        const Image<float> gt = crop_image(scene.views[v].rgb, rect);
        psnr_acc += psnr(pred, gt);
        ssim_acc += ssim(pred, gt).value;
    }
    out_psnr = static_cast<float>(psnr_acc / views.size());
    out_ssim = static_cast<float>(ssim_acc / views.size());
}

namespace {

// One RGB optimization pass over the train views.
void run_rgb_stage(GaussianField<float>& field, const Scene& scene, const FitConfig& cfg,
                   const std::vector<int>& train_views, const ParamGroupSet& groups,
                   std::vector<IterationMetrics>& metrics) {
    Optimizer opt;
    const float lambda = cfg.ssim_weight;
    for (int it = 0; it < cfg.iterations; ++it) {
        if (field.sh_degree == 0 && it >= cfg.sh_degree_schedule) field.sh_degree = 1;
        const int view = train_views[it % train_views.size()];
        const Camera<float>& cam = scene.rig.cameras[view];
        const Image<float>& gt = scene.views[view].rgb;

        const auto out = render(field, cam, RenderMode::Rgb, scene.background);
        const auto l1 = l1_loss(out.payload_image, gt);
        const auto ss = ssim(out.payload_image, gt);
        const float loss = (1.0f - lambda) * l1.value + lambda * (1.0f - ss.value);

        Image<float> upstream(cam.width, cam.height, 3);
        for (std::size_t i = 0; i < upstream.data.size(); ++i)
            upstream.data[i] = (1.0f - lambda) * l1.grad_a.data[i] - lambda * ss.grad_a.data[i];

        const auto grads = render_backward(field, cam, RenderMode::Rgb, scene.background, upstream);
        opt.step_all(field, grads, groups, cfg);
        metrics.push_back({it, loss, psnr(out.payload_image, gt)});
    }
}

// Stage A of NormalGuided: fit normals through normal-map rendering on an
// isotropic field. Losses run on the (n*0.5+0.5)-encoded maps with the
// analytic hit mask applied.
void run_normal_stage(GaussianField<float>& field, const Scene& scene, const FitConfig& cfg,
                      const std::vector<int>& train_views,
                      std::vector<IterationMetrics>& metrics) {
    Optimizer opt;
    ParamGroupSet groups;
    groups.normal = true;
    groups.scales = true;
    groups.opacity = true;

    const float lambda = cfg.ssim_weight;
    std::vector<Image<float>> enc_gt(scene.views.size());
    std::vector<Image<float>> enc_gt_masked(scene.views.size());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        enc_gt[v] = encode_normal(scene.views[v].normal);
        enc_gt_masked[v] = apply_mask(enc_gt[v], scene.views[v].alpha);
    }

    for (int it = 0; it < cfg.stage_a_iterations; ++it) {
        const int view = train_views[it % train_views.size()];
        const Camera<float>& cam = scene.rig.cameras[view];
        const Image<float>& mask = scene.views[view].alpha;

        const auto out = render(field, cam, RenderMode::Normal, scene.background);
        const Image<float> enc = encode_normal(out.payload_image);
        const auto l1 = l1_loss_weighted(enc, enc_gt[view], mask);
        const auto ss = ssim(apply_mask(enc, mask), enc_gt_masked[view]);
        const float loss = (1.0f - lambda) * l1.value + lambda * (1.0f - ss.value);

        Image<float> upstream(cam.width, cam.height, 3);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x)
                for (int c = 0; c < 3; ++c)
                    upstream.at(y, x, c) = 0.5f * ((1.0f - lambda) * l1.grad_a.at(y, x, c) -
                                                   lambda * ss.grad_a.at(y, x, c) * mask.at(y, x, 0));

        const auto grads =
            render_backward(field, cam, RenderMode::Normal, scene.background, upstream);
        opt.step_all(field, grads, groups, cfg);
        metrics.push_back({it, loss, psnr(enc, enc_gt[view])});
    }
}

}  // namespace

FitResult fit_initialized(GaussianField<float> field, const Scene& scene,
                          const FitConfig& config) {
    const std::vector<int> train_views = resolve_train_views(scene, config);
    FitResult result;
    ParamGroupSet groups;
    groups.position = config.optimize_positions;
    groups.rotation = field.param_mode == ParamMode::Unconstrained;
    groups.scales = true;
    groups.opacity = true;
    groups.sh = true;
    run_rgb_stage(field, scene, config, train_views, groups, result.metrics);
    result.field = std::move(field);

    for (int v = 0; v < static_cast<int>(scene.rig.size()); ++v)
        if (std::find(train_views.begin(), train_views.end(), v) == train_views.end())
            result.eval_views.push_back(v);
    if (result.eval_views.empty()) result.eval_views = train_views;
    evaluate_views(scene, result.field, result.eval_views, result.final_psnr, result.final_ssim);
    return result;
}

FitResult fit(const Scene& scene, const FitConfig& config) {
    if (scene.points.empty()) throw std::invalid_argument("fit: scene has no points");
    if (scene.rig.size() < 2) throw std::invalid_argument("fit: scene needs at least 2 views");
    if (config.iterations <= 0) throw std::invalid_argument("fit: iterations must be positive");
    if (config.ssim_weight < 0.0f || config.ssim_weight > 1.0f)
        throw std::invalid_argument("fit: ssim_weight must lie in [0,1]");

    const std::vector<int> train_views = resolve_train_views(scene, config);
    FitResult result;

    if (config.param_mode == ParamMode::NormalGuided) {
        // Stage A: isotropic auxiliary field, optimized against normal maps.
        GaussianField<float> aux = init_field_from_points(scene.points, scene.point_colors,
                                                          ParamMode::Isotropic, config.seed);
        run_normal_stage(aux, scene, config, train_views, result.normal_stage_metrics);

        // Stage B: freeze the normals, derive rotations from them, fit the
        // remaining parameters against RGB.
        GaussianField<float> main = init_field_from_points(scene.points, scene.point_colors,
                                                           ParamMode::NormalGuided, config.seed);
        for (std::size_t i = 0; i < main.size(); ++i)
            main.gaussians[i].normal_raw = aux.gaussians[i].unit_normal();

        ParamGroupSet groups;
        groups.position = config.optimize_positions;
        groups.scales = true;
        groups.opacity = true;
        groups.sh = true;
        run_rgb_stage(main, scene, config, train_views, groups, result.metrics);

        aux.param_mode = ParamMode::Isotropic;
        result.normal_field = std::move(aux);
        result.field = std::move(main);
    } else {
        GaussianField<float> field = init_field_from_points(scene.points, scene.point_colors,
                                                            config.param_mode, config.seed);
        ParamGroupSet groups;
        groups.position = config.optimize_positions;
        groups.rotation = config.param_mode == ParamMode::Unconstrained;
        groups.scales = true;
        groups.opacity = true;
        groups.sh = true;
        run_rgb_stage(field, scene, config, train_views, groups, result.metrics);
        result.field = std::move(field);
    }

    // Held-out evaluation on the rig views not used for training.
    for (int v = 0; v < static_cast<int>(scene.rig.size()); ++v)
        if (std::find(train_views.begin(), train_views.end(), v) == train_views.end())
            result.eval_views.push_back(v);
    if (result.eval_views.empty()) result.eval_views = train_views;
    evaluate_views(scene, result.field, result.eval_views, result.final_psnr, result.final_ssim);
    return result;
}

}  // namespace ngs
