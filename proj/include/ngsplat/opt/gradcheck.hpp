#pragma once

#include "ngsplat/core/rng.hpp"
#include "ngsplat/render/backward.hpp"

#include <cstdint>
#include <string>

namespace ngs {

// Finite-difference validation of render_backward. The probe is the scalar
// J(theta) = sum(upstream .* payload_image); every stored raw parameter is
// perturbed by +-h (central differences, double precision) and compared
// against the analytic gradient element-wise:
//
//     |fd - analytic| <= atol + rtol * max(|fd|, |analytic|)
//
// with atol = 1e-8 (elements with near-zero analytic gradient are compared
// absolutely) and rtol = 1e-5.
struct GradCheckResult {
    double worst_ratio = 0.0;  // max |fd-an| / (atol + rtol*max(|fd|,|an|))
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    std::string worst_label;
    int checked = 0;
    bool passed() const { return worst_ratio < 1.0; }
};

namespace detail {

// Scene conditioning keeps the finite-difference truncation error well under
// the tolerance: broad splats, spaced depths, and raw quaternion/normal
// norms away from 1 (curvature of the normalization falls off with the
// square of the raw norm). Depth renders use a near camera so payload
// magnitudes stay O(1).
inline GaussianField<double> gradcheck_field(ParamMode mode, RenderMode rm, int n,
                                             std::uint64_t seed, const Camera<double>& cam) {
    SeededRng rng(seed);
    GaussianField<double> f;
    f.param_mode = mode;
    f.sh_degree = 1;
    const double zbase = rm == RenderMode::Depth ? 1.3 : 5.0;
    const double zstep = rm == RenderMode::Depth ? 0.06 : 0.22;
    for (int i = 0; i < n; ++i) {
        Gaussian3D<double> g;
        const double z = zbase + zstep * i + rng.uniform(-0.2 * zstep, 0.2 * zstep);
        g.position = Vec3<double>(rng.uniform(-0.1, 0.1) * z, rng.uniform(-0.1, 0.1) * z, z);
        const double sigma_px = rng.uniform(20.0, 30.0);
        const double s = sigma_px * z / cam.fx;
        for (int k = 0; k < 3; ++k) g.scales_log[k] = std::log(s * rng.uniform(0.7, 1.45));
        if (mode == ParamMode::Isotropic) g.scales_log.setConstant(std::log(s));
        g.opacity_raw = rng.uniform(-2.2, -0.9);
        g.rotation_raw = rng.unit_quat<double>() * rng.uniform(4.0, 6.0);
        Vec3<double> nrm = rng.unit_vec3<double>();
        if (nrm.z() < -0.8) nrm.z() = -nrm.z();  // keep clear of the antipodal cone
        g.normal_raw = nrm * rng.uniform(4.0, 6.0);
        for (int c = 0; c < 3; ++c) {
            g.sh(c, 0) = rng.uniform(-0.8, 0.8);
            for (int k = 1; k < 4; ++k) g.sh(c, k) = rng.uniform(-0.15, 0.15);
        }
        f.gaussians.push_back(g);
    }
    return f;
}

}  // namespace detail

inline GradCheckResult gradcheck_combo(ParamMode mode, RenderMode rm, std::uint64_t seed,
                                       int image_size = 32, int gaussians = 10) {
    Camera<double> cam;
    cam.fx = cam.fy = 1.25 * image_size;
    cam.cx = cam.cy = image_size / 2.0;
    cam.width = cam.height = image_size;
    const Vec3<double> bg(0.2, 0.3, 0.1);
    const double h = 1e-3;
    const double atol = 1e-8, rtol = 1e-5;

    auto field = detail::gradcheck_field(mode, rm, gaussians, seed, cam);
    SeededRng urng(seed ^ 0x5eedULL);
    Image<double> upstream(cam.width, cam.height, 3);
    for (auto& v : upstream.data) v = urng.uniform(-0.04, 0.04);

    auto probe = [&](const GaussianField<double>& f) {
        const auto out = render(f, cam, rm, bg);
        double acc = 0.0;
        for (std::size_t i = 0; i < upstream.data.size(); ++i)
            acc += upstream.data[i] * out.payload_image.data[i];
        return acc;
    };
    const auto grads = render_backward(field, cam, rm, bg, upstream);

    GradCheckResult res;
    auto check = [&](double analytic, double* slot, const std::string& label) {
        const double orig = *slot;
        *slot = orig + h;
        const double jp = probe(field);
        *slot = orig - h;
        const double jm = probe(field);
        *slot = orig;
        const double fd = (jp - jm) / (2.0 * h);
        const double ratio =
            std::abs(fd - analytic) / (atol + rtol * std::max(std::abs(fd), std::abs(analytic)));
        res.checked += 1;
        if (ratio > res.worst_ratio) {
            res.worst_ratio = ratio;
            res.worst_analytic = analytic;
            res.worst_fd = fd;
            res.worst_label = label;
        }
    };

    for (std::size_t i = 0; i < field.size(); ++i) {
        auto& g = field.gaussians[i];
        const std::string tag = "#" + std::to_string(i) + ":";
        for (int k = 0; k < 3; ++k) check(grads.position[i][k], &g.position[k], tag + "position");
        if (mode == ParamMode::Isotropic) {
            // Shared scale: one raw parameter drives all three log entries.
            const double analytic = grads.scales_log[i].sum();
            const double orig = g.scales_log[0];
            g.scales_log.setConstant(orig + h);
            const double jp = probe(field);
            g.scales_log.setConstant(orig - h);
            const double jm = probe(field);
            g.scales_log.setConstant(orig);
            const double fd = (jp - jm) / (2.0 * h);
            const double ratio = std::abs(fd - analytic) /
                                 (atol + rtol * std::max(std::abs(fd), std::abs(analytic)));
            res.checked += 1;
            if (ratio > res.worst_ratio) {
                res.worst_ratio = ratio;
                res.worst_analytic = analytic;
                res.worst_fd = fd;
                res.worst_label = tag + "shared_scale";
            }
        } else {
            for (int k = 0; k < 3; ++k)
                check(grads.scales_log[i][k], &g.scales_log[k], tag + "scales_log");
        }
        check(grads.opacity_raw[i], &g.opacity_raw, tag + "opacity");
        if (mode == ParamMode::Unconstrained)
            for (int k = 0; k < 4; ++k)
                check(grads.rotation_raw[i][k], &g.rotation_raw[k], tag + "rotation");
        if (mode == ParamMode::NormalGuided || rm == RenderMode::Normal)
            for (int k = 0; k < 3; ++k)
                check(grads.normal_raw[i][k], &g.normal_raw[k], tag + "normal");
        if (rm == RenderMode::Rgb)
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < kShBasisCount; ++k) check(grads.sh[i](c, k), &g.sh(c, k), tag + "sh");
    }
    return res;
}

inline constexpr std::uint64_t kGradCheckDefaultSeed = 800;

// All three parameterizations against all three payload modes.
inline GradCheckResult gradcheck_all(std::uint64_t base_seed = kGradCheckDefaultSeed,
                                     int image_size = 32, int gaussians = 10) {
    GradCheckResult worst;
    for (ParamMode mode :
         {ParamMode::Unconstrained, ParamMode::Isotropic, ParamMode::NormalGuided}) {
        for (RenderMode rm : {RenderMode::Rgb, RenderMode::Normal, RenderMode::Depth}) {
            const auto res = gradcheck_combo(
                mode, rm, base_seed + static_cast<int>(mode) * 7 + static_cast<int>(rm),
                image_size, gaussians);
            worst.checked += res.checked;
            if (res.worst_ratio > worst.worst_ratio) {
                worst.worst_ratio = res.worst_ratio;
                worst.worst_analytic = res.worst_analytic;
                worst.worst_fd = res.worst_fd;
                worst.worst_label = param_mode_name(mode) + std::string("/") +
                                    render_mode_name(rm) + "/" + res.worst_label;
            }
        }
    }
    return worst;
}

}  // namespace ngs
