#pragma once

#include "ngsplat/core/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace ngs {

template <class T>
struct LossValueGrad {
    T value = T(0);
    Image<T> grad_a;  // dL/da, same shape as a
};

template <class T>
inline void check_same_shape(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("image shapes differ");
}

// Mean absolute difference; subgradient 0 at exact ties.
template <class T>
LossValueGrad<T> l1_loss(const Image<T>& a, const Image<T>& b) {
    check_same_shape(a, b);
    LossValueGrad<T> out;
    out.grad_a = Image<T>(a.width, a.height, a.channels);
    const T inv_count = T(1) / T(a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const T d = a.data[i] - b.data[i];
        acc += std::abs(static_cast<double>(d));
        out.grad_a.data[i] = d > T(0) ? inv_count : (d < T(0) ? -inv_count : T(0));
    }
    out.value = T(acc * inv_count);
    return out;
}

// L1 with a per-pixel weight map (H x W x 1), normalized by the weighted
// element count. Zero total weight yields a zero loss.
template <class T>
LossValueGrad<T> l1_loss_weighted(const Image<T>& a, const Image<T>& b, const Image<T>& weights) {
    check_same_shape(a, b);
    if (weights.width != a.width || weights.height != a.height || weights.channels != 1)
        throw std::invalid_argument("weight map must be H x W x 1");
    LossValueGrad<T> out;
    out.grad_a = Image<T>(a.width, a.height, a.channels);
    double wsum = 0.0;
    for (const T& w : weights.data) wsum += static_cast<double>(w);
    if (wsum <= 0.0) return out;
    const T norm = T(1.0 / (wsum * a.channels));
    double acc = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const T w = weights.at(y, x, 0);
            if (w == T(0)) continue;
            for (int c = 0; c < a.channels; ++c) {
                const T d = a.at(y, x, c) - b.at(y, x, c);
                acc += static_cast<double>(w) * std::abs(static_cast<double>(d));
                out.grad_a.at(y, x, c) = d > T(0) ? w * norm : (d < T(0) ? -w * norm : T(0));
            }
        }
    out.value = T(acc / (wsum * a.channels));
    return out;
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

template <class T>
std::array<T, kSsimWindow> ssim_window_1d() {
    std::array<T, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - (kSsimWindow - 1) / 2.0;
        const double v = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        w[i] = T(v);
        sum += v;
    }
    for (auto& v : w) v = T(static_cast<double>(v) / sum);
    return w;
}

// Valid-region separable 11-tap filter of one channel plane.
template <class T, class Getter>
void ssim_filter_valid(int width, int height, const std::array<T, kSsimWindow>& w, Getter&& get,
                       std::vector<T>& out, std::vector<T>& scratch) {
    const int vw = width - kSsimWindow + 1;
    const int vh = height - kSsimWindow + 1;
    scratch.assign(static_cast<std::size_t>(vw) * height, T(0));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < vw; ++x) {
            T acc = T(0);
            for (int k = 0; k < kSsimWindow; ++k) acc += w[k] * get(y, x + k);
            scratch[static_cast<std::size_t>(y) * vw + x] = acc;
        }
    out.assign(static_cast<std::size_t>(vw) * vh, T(0));
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            T acc = T(0);
            for (int k = 0; k < kSsimWindow; ++k)
                acc += w[k] * scratch[static_cast<std::size_t>(y + k) * vw + x];
            out[static_cast<std::size_t>(y) * vw + x] = acc;
        }
}

// Transpose of ssim_filter_valid: scatters a valid-grid map back onto the
// full image grid.
template <class T>
void ssim_scatter_full(int width, int height, const std::array<T, kSsimWindow>& w,
                       const std::vector<T>& valid, std::vector<T>& out, std::vector<T>& scratch) {
    const int vw = width - kSsimWindow + 1;
    const int vh = height - kSsimWindow + 1;
    scratch.assign(static_cast<std::size_t>(vw) * height, T(0));
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            const T v = valid[static_cast<std::size_t>(y) * vw + x];
            if (v == T(0)) continue;
            for (int k = 0; k < kSsimWindow; ++k)
                scratch[static_cast<std::size_t>(y + k) * vw + x] += w[k] * v;
        }
    out.assign(static_cast<std::size_t>(width) * height, T(0));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < vw; ++x) {
            const T v = scratch[static_cast<std::size_t>(y) * vw + x];
            if (v == T(0)) continue;
            for (int k = 0; k < kSsimWindow; ++k)
                out[static_cast<std::size_t>(y) * width + x + k] += w[k] * v;
        }
}

}  // namespace detail

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), valid region,
// C1 = 0.01^2 and C2 = 0.03^2 for [0,1]-range images, channel-averaged.
// Returns the score and its gradient with respect to `a`.
template <class T>
LossValueGrad<T> ssim(const Image<T>& a, const Image<T>& b) {
    check_same_shape(a, b);
    if (a.width < detail::kSsimWindow || a.height < detail::kSsimWindow)
        throw std::invalid_argument("image smaller than the SSIM window");

    const auto w = detail::ssim_window_1d<T>();
    const T c1 = T(0.01) * T(0.01);
    const T c2 = T(0.03) * T(0.03);
    const int vw = a.width - detail::kSsimWindow + 1;
    const int vh = a.height - detail::kSsimWindow + 1;
    const std::size_t vcount = static_cast<std::size_t>(vw) * vh;

    LossValueGrad<T> out;
    out.grad_a = Image<T>(a.width, a.height, a.channels);
    const T mean_norm = T(1) / T(vcount * static_cast<std::size_t>(a.channels));

    std::vector<T> mu_a, mu_b, e_aa, e_bb, e_ab, scratch;
    std::vector<T> g_mu(vcount), g_eaa(vcount), g_eab(vcount), full, full2;
    double total = 0.0;
    for (int ch = 0; ch < a.channels; ++ch) {
        auto ga = [&](int y, int x) { return a.at(y, x, ch); };
        auto gb = [&](int y, int x) { return b.at(y, x, ch); };
        auto gaa = [&](int y, int x) { return a.at(y, x, ch) * a.at(y, x, ch); };
        auto gbb = [&](int y, int x) { return b.at(y, x, ch) * b.at(y, x, ch); };
        auto gab = [&](int y, int x) { return a.at(y, x, ch) * b.at(y, x, ch); };
        detail::ssim_filter_valid(a.width, a.height, w, ga, mu_a, scratch);
        detail::ssim_filter_valid(a.width, a.height, w, gb, mu_b, scratch);
        detail::ssim_filter_valid(a.width, a.height, w, gaa, e_aa, scratch);
        detail::ssim_filter_valid(a.width, a.height, w, gbb, e_bb, scratch);
        detail::ssim_filter_valid(a.width, a.height, w, gab, e_ab, scratch);

        for (std::size_t q = 0; q < vcount; ++q) {
            const T ma = mu_a[q], mb = mu_b[q];
            const T var_a = e_aa[q] - ma * ma;
            const T var_b = e_bb[q] - mb * mb;
            const T cov = e_ab[q] - ma * mb;
            const T a1 = T(2) * ma * mb + c1;
            const T b1 = ma * ma + mb * mb + c1;
            const T a2 = T(2) * cov + c2;
            const T b2 = var_a + var_b + c2;
            const T lum = a1 / b1;
            const T con = a2 / b2;
            total += static_cast<double>(lum * con);

            // Partials of lum*con wrt (mu_a, E[a^2], E[ab]).
            const T d_lum_dmu = (T(2) * mb * b1 - a1 * T(2) * ma) / (b1 * b1);
            const T d_con_dvar = -a2 / (b2 * b2);
            const T d_con_dcov = T(2) / b2;
            const T d_var_dmu = T(-2) * ma;
            const T d_cov_dmu = -mb;
            g_mu[q] = mean_norm * (con * d_lum_dmu +
                                   lum * (d_con_dvar * d_var_dmu + d_con_dcov * d_cov_dmu));
            g_eaa[q] = mean_norm * lum * d_con_dvar;
            g_eab[q] = mean_norm * lum * d_con_dcov;
        }

        detail::ssim_scatter_full(a.width, a.height, w, g_mu, full, scratch);
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x)
                out.grad_a.at(y, x, ch) += full[static_cast<std::size_t>(y) * a.width + x];
        detail::ssim_scatter_full(a.width, a.height, w, g_eaa, full, scratch);
        detail::ssim_scatter_full(a.width, a.height, w, g_eab, full2, scratch);
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * a.width + x;
                out.grad_a.at(y, x, ch) +=
                    T(2) * a.at(y, x, ch) * full[p] + b.at(y, x, ch) * full2[p];
            }
    }
    out.value = T(total * static_cast<double>(mean_norm));
    return out;
}

template <class T>
T mse(const Image<T>& a, const Image<T>& b) {
    check_same_shape(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return T(acc / static_cast<double>(a.size()));
}

// PSNR in dB for [0,1] images; the 1e-12 MSE floor caps it at 120 dB.
template <class T>
T psnr(const Image<T>& a, const Image<T>& b) {
    const double m = std::max(static_cast<double>(mse(a, b)), 1e-12);
    return T(10.0 * std::log10(1.0 / m));
}

}  // namespace ngs
