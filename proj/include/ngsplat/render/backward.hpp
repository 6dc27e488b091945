#pragma once

#include "ngsplat/render/rasterizer.hpp"

#include <vector>

namespace ngs {

// Gradients for every stored parameter, aligned with field.gaussians.
// Entries that a param_mode does not use (e.g. rotation_raw in NormalGuided
// mode) stay zero.
template <class T>
struct FieldGradients {
    std::vector<Vec3<T>> position;
    std::vector<Vec4<T>> rotation_raw;
    std::vector<Vec3<T>> normal_raw;
    std::vector<Vec3<T>> scales_log;
    std::vector<T> opacity_raw;
    std::vector<ShBlock<T>> sh;

    explicit FieldGradients(std::size_t n = 0) { resize(n); }

    void resize(std::size_t n) {
        position.assign(n, Vec3<T>::Zero());
        rotation_raw.assign(n, Vec4<T>::Zero());
        normal_raw.assign(n, Vec3<T>::Zero());
        scales_log.assign(n, Vec3<T>::Zero());
        opacity_raw.assign(n, T(0));
        sh.assign(n, ShBlock<T>::Zero());
    }
};

namespace detail {

// Per-fragment gradient accumulator. Double precision so the fixed-order
// tile merge matches the forward pass's compositing precision.
struct FragGradAccum {
    Eigen::Vector3d d_payload = Eigen::Vector3d::Zero();
    Eigen::Vector2d d_mean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d d_conic = Eigen::Matrix2d::Zero();
    double d_alpha_scale = 0.0;

    void add(const FragGradAccum& o) {
        d_payload += o.d_payload;
        d_mean2d += o.d_mean2d;
        d_conic += o.d_conic;
        d_alpha_scale += o.d_alpha_scale;
    }

    bool nonzero() const {
        return d_alpha_scale != 0.0 || d_payload.squaredNorm() != 0.0 ||
               d_mean2d.squaredNorm() != 0.0 || d_conic.squaredNorm() != 0.0;
    }
};

struct CompositeStep {
    int local = 0;       // index into the tile fragment list
    double alpha = 0.0;
    double t_before = 0.0;
    bool clamped = false;
};

}  // namespace detail

// Analytic backward pass for render(). `upstream` is dL/d(payload_image),
// H x W x 3. Recomputes the forward fragment set internally, so field and
// camera must match the forward call.
template <class T>
FieldGradients<T> render_backward(const GaussianField<T>& field, const Camera<T>& cam,
                                  RenderMode mode, const Vec3<T>& background,
                                  const Image<T>& upstream) {
    const RenderPlan<T> plan = build_render_plan(field, cam, mode);
    FieldGradients<T> grads(field.size());

    // Stage 1: per-tile pixel walks accumulate fragment-level gradients.
    std::vector<std::vector<detail::FragGradAccum>> tile_accums(plan.tile_frags.size());
    parallel_for(plan.tile_frags.size(), [&](std::size_t tile) {
        const auto& list = plan.tile_frags[tile];
        if (list.empty()) return;
        auto& accums = tile_accums[tile];
        accums.assign(list.size(), {});

        const int tx = static_cast<int>(tile) % plan.tiles_x;
        const int ty = static_cast<int>(tile) / plan.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);

        std::vector<detail::CompositeStep> steps;
        steps.reserve(list.size());
        for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix) {
                const T px = T(ix) + T(0.5);
                const T py = T(iy) + T(0.5);

                // Forward walk, mirroring composite_pixel arithmetic.
                steps.clear();
                double transmittance = 1.0;
                for (std::size_t k = 0; k < list.size(); ++k) {
                    const SplatFragment<T>& f = plan.frags[list[k]];
                    const T alpha = fragment_alpha(f, plan.conics[list[k]], px, py);
                    if (alpha < T(kAlphaCutoff)) continue;
                    steps.push_back({static_cast<int>(k), static_cast<double>(alpha),
                                     transmittance, !(alpha < T(kAlphaCap))});
                    transmittance *= 1.0 - static_cast<double>(alpha);
                    if (transmittance < kEarlyStopTransmittance) break;
                }
                if (steps.empty()) continue;

                Eigen::Vector3d u(upstream.at(iy, ix, 0), upstream.at(iy, ix, 1),
                                  upstream.at(iy, ix, 2));
                if (u.squaredNorm() == 0.0) continue;

                // Suffix sum S_i = sum_{k>i} c_k a_k T_k (+ background term).
                Eigen::Vector3d suffix = Eigen::Vector3d::Zero();
                if (mode == RenderMode::Rgb)
                    suffix = background.template cast<double>() * transmittance;

                for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
                    const int fi = list[it->local];
                    const SplatFragment<T>& f = plan.frags[fi];
                    const Eigen::Vector3d payload = f.payload.template cast<double>();
                    const double weight = it->alpha * it->t_before;

                    detail::FragGradAccum& acc = accums[it->local];
                    acc.d_payload += u * weight;

                    const double d_alpha =
                        u.dot(payload) * it->t_before - u.dot(suffix) / (1.0 - it->alpha);
                    suffix += payload * weight;

                    if (it->clamped) continue;  // flat region of the 0.99 cap
                    const double g_over = it->alpha / static_cast<double>(f.alpha_scale);
                    acc.d_alpha_scale += d_alpha * g_over;

                    const Eigen::Vector2d d(static_cast<double>(px - f.mean2d.x()),
                                            static_cast<double>(py - f.mean2d.y()));
                    const Eigen::Matrix2d conic = plan.conics[fi].template cast<double>();
                    acc.d_mean2d += (d_alpha * it->alpha) * (conic * d);
                    acc.d_conic += (-0.5 * d_alpha * it->alpha) * (d * d.transpose());
                }
            }
    });

    // Stage 2: merge tile accumulators in fixed tile order.
    std::vector<detail::FragGradAccum> frag_accum(plan.frags.size());
    for (std::size_t tile = 0; tile < plan.tile_frags.size(); ++tile) {
        const auto& list = plan.tile_frags[tile];
        for (std::size_t k = 0; k < list.size(); ++k)
            if (k < tile_accums[tile].size()) frag_accum[list[k]].add(tile_accums[tile][k]);
    }

    // Stage 3: chain fragment gradients to the stored parameterization.
    parallel_for(plan.frags.size(), [&](std::size_t i) {
        const detail::FragGradAccum& acc = frag_accum[i];
        if (!acc.nonzero()) return;
        const SplatFragment<T>& frag = plan.frags[i];
        const int gi = frag.gaussian_index;
        const Gaussian3D<T>& g = field.gaussians[gi];

        const Vec3<T> p_cam = cam.to_camera(g.position);
        const Mat23<T> j = projection_jacobian(p_cam, cam);
        const Mat3<T> w = cam.rotation;
        const Mat3<T> rot = g.rotation(field.param_mode);
        const Vec3<T> s = g.scales();
        const Mat3<T> sigma_cam = w * covariance_from(rot, s) * w.transpose();

        // conic -> cov2d -> {camera-space covariance, Jacobian}.
        const Mat2<T> conic = plan.conics[i];
        const Mat2<T> d_conic = acc.d_conic.template cast<T>();
        const Mat2<T> d_cov2d = -conic * d_conic * conic;
        const Mat3<T> d_sigma_cam = j.transpose() * d_cov2d * j;
        const Mat3<T> d_sigma = w.transpose() * d_sigma_cam * w;
        const Mat23<T> d_j = T(2) * d_cov2d * j * sigma_cam;

        Vec3<T> d_p_cam = j.transpose() * acc.d_mean2d.template cast<T>();
        {
            const T z = p_cam.z();
            const T inv_z2 = T(1) / (z * z);
            const T inv_z3 = inv_z2 / z;
            d_p_cam.x() += d_j(0, 2) * (-cam.fx * inv_z2);
            d_p_cam.y() += d_j(1, 2) * (-cam.fy * inv_z2);
            d_p_cam.z() += d_j(0, 0) * (-cam.fx * inv_z2) + d_j(1, 1) * (-cam.fy * inv_z2) +
                           d_j(0, 2) * (T(2) * cam.fx * p_cam.x() * inv_z3) +
                           d_j(1, 2) * (T(2) * cam.fy * p_cam.y() * inv_z3);
        }

        // Payload chain.
        const Vec3<T> d_payload = acc.d_payload.template cast<T>();
        Vec3<T> d_position_extra = Vec3<T>::Zero();
        switch (mode) {
            case RenderMode::Rgb: {
                const Vec3<T> rel = g.position - cam.center_in_world();
                const T dist = rel.norm();
                if (dist > T(0)) {
                    const Vec3<T> dir = rel / dist;
                    const Vec3<T> d_dir =
                        sh_evaluate_backward(g.sh, dir, field.sh_degree, d_payload, grads.sh[gi]);
                    d_position_extra = (d_dir - dir * dir.dot(d_dir)) / dist;
                }
                break;
            }
            case RenderMode::Normal:
                grads.normal_raw[gi] += normalize_backward(g.normal_raw, d_payload);
                break;
            case RenderMode::Depth:
                d_p_cam.z() += d_payload.sum();
                break;
        }

        // Opacity through the logistic.
        grads.opacity_raw[gi] =
            T(acc.d_alpha_scale) * logistic_grad_from_value(frag.alpha_scale);

        // Scales and rotation through Sigma = R diag(s^2) R^T.
        for (int k = 0; k < 3; ++k) {
            const Vec3<T> rk = rot.col(k);
            grads.scales_log[gi][k] = T(2) * s[k] * s[k] * rk.dot(d_sigma * rk);
        }
        const Mat3<T> d_rot =
            T(2) * d_sigma * rot * Vec3<T>(s.array().square()).asDiagonal();
        switch (field.param_mode) {
            case ParamMode::Unconstrained:
                grads.rotation_raw[gi] = quat_to_matrix_backward(g.rotation_raw, d_rot);
                break;
            case ParamMode::NormalGuided: {
                const Vec3<T> d_unit = normal_to_rotation_backward(g.unit_normal(), d_rot);
                grads.normal_raw[gi] += normalize_backward(g.normal_raw, d_unit);
                break;
            }
            case ParamMode::Isotropic:
                break;  // identity rotation carries no gradient
        }

        grads.position[gi] = w.transpose() * d_p_cam + d_position_extra;
    });

    return grads;
}

}  // namespace ngs
