#pragma once

#include "ngsplat/core/parallel.hpp"
#include "ngsplat/render/project.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ngs {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaCap = 0.99;
inline constexpr double kAlphaCutoff = 1.0 / 255.0;
inline constexpr double kEarlyStopTransmittance = 1e-4;

// Shared forward state: culled+projected fragments sorted front-to-back
// (ties broken by ascending gaussian index), their conics, and per-tile
// fragment lists in the same order.
template <class T>
struct RenderPlan {
    std::vector<SplatFragment<T>> frags;
    std::vector<Mat2<T>> conics;
    std::vector<T> bin_radius;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> tile_frags;
};

template <class T>
inline Vec3<T> fragment_payload(const GaussianField<T>& field, int index, const Camera<T>& cam,
                                RenderMode mode, T view_depth) {
    const Gaussian3D<T>& g = field.gaussians[index];
    switch (mode) {
        case RenderMode::Rgb: {
            const Vec3<T> rel = g.position - cam.center_in_world();
            const T dist = rel.norm();
            const Vec3<T> dir = dist > T(0) ? Vec3<T>(rel / dist) : Vec3<T>(T(0), T(0), T(1));
            return sh_evaluate(g.sh, dir, field.sh_degree);
        }
        case RenderMode::Normal:
            return g.unit_normal();
        case RenderMode::Depth:
            return Vec3<T>::Constant(view_depth);
    }
    return Vec3<T>::Zero();
}

// Radius beyond which alpha falls under the 1/255 cutoff; used only for
// tile binning so that tiling cannot change the composited result.
template <class T>
inline T binning_radius(const SplatFragment<T>& frag) {
    const T q = T(2) * std::log(std::max(T(255) * frag.alpha_scale, T(1)));
    return std::sqrt(q * max_eigenvalue_2x2(frag.cov2d)) + T(0.5);
}

template <class T>
RenderPlan<T> build_render_plan(const GaussianField<T>& field, const Camera<T>& cam,
                                RenderMode mode) {
    const std::size_t n = field.size();
    std::vector<std::optional<SplatFragment<T>>> projected(n);
    parallel_for(n, [&](std::size_t i) {
        auto frag = project(field.gaussians[i], cam, field.param_mode);
        if (frag) {
            frag->gaussian_index = static_cast<int>(i);
            frag->payload = fragment_payload(field, static_cast<int>(i), cam, mode, frag->view_depth);
        }
        projected[i] = frag;
    });

    RenderPlan<T> plan;
    plan.frags.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (projected[i]) plan.frags.push_back(*projected[i]);

    std::sort(plan.frags.begin(), plan.frags.end(),
              [](const SplatFragment<T>& a, const SplatFragment<T>& b) {
                  if (a.view_depth != b.view_depth) return a.view_depth < b.view_depth;
                  return a.gaussian_index < b.gaussian_index;
              });

    plan.conics.resize(plan.frags.size());
    plan.bin_radius.resize(plan.frags.size());
    parallel_for(plan.frags.size(), [&](std::size_t i) {
        plan.conics[i] = plan.frags[i].cov2d.inverse();
        plan.bin_radius[i] = binning_radius(plan.frags[i]);
    });

    plan.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    plan.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    plan.tile_frags.assign(static_cast<std::size_t>(plan.tiles_x) * plan.tiles_y, {});
    for (std::size_t i = 0; i < plan.frags.size(); ++i) {
        const auto& f = plan.frags[i];
        const T r = plan.bin_radius[i];
        const int ix0 = std::clamp(static_cast<int>(std::floor(f.mean2d.x() - r)) - 1, 0, cam.width - 1);
        const int ix1 = std::clamp(static_cast<int>(std::ceil(f.mean2d.x() + r)) + 1, 0, cam.width - 1);
        const int iy0 = std::clamp(static_cast<int>(std::floor(f.mean2d.y() - r)) - 1, 0, cam.height - 1);
        const int iy1 = std::clamp(static_cast<int>(std::ceil(f.mean2d.y() + r)) + 1, 0, cam.height - 1);
        for (int ty = iy0 / kTileSize; ty <= iy1 / kTileSize; ++ty)
            for (int tx = ix0 / kTileSize; tx <= ix1 / kTileSize; ++tx)
                plan.tile_frags[static_cast<std::size_t>(ty) * plan.tiles_x + tx].push_back(
                    static_cast<int>(i));
    }
    return plan;
}

// Alpha of one fragment at a pixel center, after the 0.99 cap. Values below
// the 1/255 cutoff are the caller's job to skip.
template <class T>
inline T fragment_alpha(const SplatFragment<T>& frag, const Mat2<T>& conic, T px, T py) {
    const T dx = px - frag.mean2d.x();
    const T dy = py - frag.mean2d.y();
    const T q = conic(0, 0) * dx * dx + T(2) * conic(0, 1) * dx * dy + conic(1, 1) * dy * dy;
    if (!(q >= T(0))) return T(0);
    return std::min(frag.alpha_scale * std::exp(T(-0.5) * q), T(kAlphaCap));
}

template <class T>
struct PixelComposite {
    Vec3<T> payload = Vec3<T>::Zero();
    T alpha = T(0);
    T depth = T(0);
    T transmittance = T(1);
};

// Front-to-back compositing of the listed fragments at one pixel center.
// Accumulators run in double so alpha + transmittance stays an identity
// even through long fragment chains.
template <class T>
inline PixelComposite<T> composite_pixel(const std::vector<SplatFragment<T>>& frags,
                                         const std::vector<Mat2<T>>& conics, const int* indices,
                                         std::size_t count, T px, T py, bool early_stop) {
    double acc[3] = {0.0, 0.0, 0.0};
    double alpha_acc = 0.0;
    double depth_acc = 0.0;
    double transmittance = 1.0;
    for (std::size_t k = 0; k < count; ++k) {
        const int fi = indices[k];
        const SplatFragment<T>& f = frags[fi];
        const T alpha = fragment_alpha(f, conics[fi], px, py);
        if (alpha < T(kAlphaCutoff)) continue;
        const double weight = static_cast<double>(alpha) * transmittance;
        acc[0] += weight * static_cast<double>(f.payload.x());
        acc[1] += weight * static_cast<double>(f.payload.y());
        acc[2] += weight * static_cast<double>(f.payload.z());
        alpha_acc += weight;
        depth_acc += weight * static_cast<double>(f.view_depth);
        transmittance *= 1.0 - static_cast<double>(alpha);
        if (early_stop && transmittance < kEarlyStopTransmittance) break;
    }
    PixelComposite<T> out;
    out.payload = Vec3<T>(T(acc[0]), T(acc[1]), T(acc[2]));
    out.alpha = T(alpha_acc);
    out.depth = T(depth_acc);
    out.transmittance = T(transmittance);
    return out;
}

template <class T>
inline RenderOutput<T> allocate_output(const Camera<T>& cam) {
    RenderOutput<T> out;
    out.payload_image = Image<T>(cam.width, cam.height, 3);
    out.alpha_image = Image<T>(cam.width, cam.height, 1);
    out.depth_image = Image<T>(cam.width, cam.height, 1);
    out.transmittance_image = Image<T>(cam.width, cam.height, 1, T(1));
    return out;
}

template <class T>
inline void store_pixel(RenderOutput<T>& out, int ix, int iy, const PixelComposite<T>& px,
                        RenderMode mode, const Vec3<T>& background) {
    Vec3<T> payload = px.payload;
    if (mode == RenderMode::Rgb) payload += background * px.transmittance;
    for (int c = 0; c < 3; ++c) out.payload_image.at(iy, ix, c) = payload[c];
    out.alpha_image.at(iy, ix, 0) = px.alpha;
    out.depth_image.at(iy, ix, 0) = px.depth;
    out.transmittance_image.at(iy, ix, 0) = px.transmittance;
}

// Tile-based forward pass. Tiles are independent, so the result is
// bit-identical for any worker count.
template <class T>
RenderOutput<T> render(const GaussianField<T>& field, const Camera<T>& cam, RenderMode mode,
                       const Vec3<T>& background = Vec3<T>::Zero()) {
    const RenderPlan<T> plan = build_render_plan(field, cam, mode);
    RenderOutput<T> out = allocate_output(cam);

    parallel_for(plan.tile_frags.size(), [&](std::size_t tile) {
        const auto& list = plan.tile_frags[tile];
        const int tx = static_cast<int>(tile) % plan.tiles_x;
        const int ty = static_cast<int>(tile) / plan.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
        for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix) {
                const auto px = composite_pixel(plan.frags, plan.conics, list.data(), list.size(),
                                                T(ix) + T(0.5), T(iy) + T(0.5), true);
                store_pixel(out, ix, iy, px, mode, background);
            }
    });
    return out;
}

// Brute-force reference renderer: every non-culled fragment is evaluated at
// every pixel in exact sorted order, with no tiling and no early stop.
template <class T>
RenderOutput<T> oracle_render(const GaussianField<T>& field, const Camera<T>& cam, RenderMode mode,
                              const Vec3<T>& background = Vec3<T>::Zero()) {
    const RenderPlan<T> plan = build_render_plan(field, cam, mode);
    RenderOutput<T> out = allocate_output(cam);

    std::vector<int> all(plan.frags.size());
    std::iota(all.begin(), all.end(), 0);

    parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t iy) {
        for (int ix = 0; ix < cam.width; ++ix) {
            const auto px = composite_pixel(plan.frags, plan.conics, all.data(), all.size(),
                                            T(ix) + T(0.5), T(static_cast<int>(iy)) + T(0.5), false);
            store_pixel(out, ix, static_cast<int>(iy), px, mode, background);
        }
    });
    return out;
}

}  // namespace ngs
