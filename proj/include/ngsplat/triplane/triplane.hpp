#pragma once

#include "ngsplat/core/rng.hpp"
#include "ngsplat/core/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ngs {

template <class T>
using FeatureVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using TokenMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Square 2D feature grid. at(i, j, ch): i indexes the first projected
// coordinate, j the second.
template <class T>
struct FeatureGrid {
    int resolution = 0;
    int channels = 0;
    std::vector<T> data;

    FeatureGrid() = default;
    FeatureGrid(int res, int ch)
        : resolution(res), channels(ch),
          data(static_cast<std::size_t>(res) * res * ch, T(0)) {}

    T& at(int i, int j, int ch) {
        return data[(static_cast<std::size_t>(i) * resolution + j) * channels + ch];
    }
    const T& at(int i, int j, int ch) const {
        return data[(static_cast<std::size_t>(i) * resolution + j) * channels + ch];
    }

    Eigen::Map<const FeatureVector<T>> node(int i, int j) const {
        return {&data[(static_cast<std::size_t>(i) * resolution + j) * channels], channels};
    }
};

template <class T>
using ImageFeatureMap = FeatureGrid<T>;

enum class PlaneDirection { XY = 0, YZ = 1, ZX = 2 };

inline const char* plane_direction_name(PlaneDirection d) {
    switch (d) {
        case PlaneDirection::XY: return "xy";
        case PlaneDirection::YZ: return "yz";
        case PlaneDirection::ZX: return "zx";
    }
    return "?";
}

template <class T>
struct Triplane {
    std::array<FeatureGrid<T>, 3> planes;  // xy, yz, zx
    int resolution = 0;
    int channels = 0;
};

template <class T>
struct TriplaneStack {
    std::vector<Triplane<T>> scales;  // resolution doubles, channels halve per scale
};

struct OccupancyGrid {
    int side = 0;
    std::vector<std::uint8_t> occupied;
    std::size_t occupied_count = 0;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * side + j) * side + k;
    }
    bool is_occupied(int i, int j, int k) const { return occupied[index(i, j, k)] != 0; }
};

// Per-occupied-voxel feature tokens.
template <class T>
struct OccupancyFeature {
    int channels = 0;
    TokenMatrix<T> tokens;  // n_tokens x channels
};

// ---------------------------------------------------------------------------
// Seeded linear maps stand in for the learned layers; the geometry and
// dataflow are what is under test, not the weights.
// ---------------------------------------------------------------------------

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
}

template <class T>
TokenMatrix<T> seeded_linear_weights(int out_dim, int in_dim, std::uint64_t seed) {
    SeededRng rng(seed);
    TokenMatrix<T> w(out_dim, in_dim);
    const T scale = T(1) / std::sqrt(T(in_dim));
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c) w(r, c) = T(rng.normal()) * scale;
    return w;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

template <class T>
OccupancyGrid voxelize(const std::vector<Vec3<T>>& points, int side) {
    if (points.empty()) throw std::invalid_argument("voxelize: empty point cloud");
    if (side < 1) throw std::invalid_argument("voxelize: side must be positive");
    OccupancyGrid grid;
    grid.side = side;
    grid.occupied.assign(static_cast<std::size_t>(side) * side * side, 0);
    for (const auto& p : points) {
        if (p.cwiseAbs().maxCoeff() > T(1) + T(1e-6))
            throw std::invalid_argument("voxelize: point outside [-1,1]^3");
        int idx[3];
        for (int a = 0; a < 3; ++a) {
            const int v = static_cast<int>(std::floor((p[a] + T(1)) / T(2) * side));
            idx[a] = std::clamp(v, 0, side - 1);  // coordinate exactly 1 clamps down
        }
        auto& cell = grid.occupied[grid.index(idx[0], idx[1], idx[2])];
        if (!cell) {
            cell = 1;
            ++grid.occupied_count;
        }
    }
    return grid;
}

template <class T>
std::array<Vec2<T>, 3> project_to_planes(const Vec3<T>& p) {
    return {Vec2<T>(p.x(), p.y()), Vec2<T>(p.y(), p.z()), Vec2<T>(p.z(), p.x())};
}

namespace detail {

// Align-corners bilinear sample of one plane at a 2D point in [-1,1]^2.
template <class T>
void bilinear_fetch(const FeatureGrid<T>& plane, const Vec2<T>& p, T* out) {
    const int r = plane.resolution;
    const T gi = (p.x() + T(1)) / T(2) * T(r - 1);
    const T gj = (p.y() + T(1)) / T(2) * T(r - 1);
    const int i0 = std::clamp(static_cast<int>(std::floor(gi)), 0, r - 1);
    const int j0 = std::clamp(static_cast<int>(std::floor(gj)), 0, r - 1);
    const int i1 = std::min(i0 + 1, r - 1);
    const int j1 = std::min(j0 + 1, r - 1);
    const T fi = gi - T(i0);
    const T fj = gj - T(j0);
    const T w00 = (T(1) - fi) * (T(1) - fj);
    const T w01 = (T(1) - fi) * fj;
    const T w10 = fi * (T(1) - fj);
    const T w11 = fi * fj;
    for (int c = 0; c < plane.channels; ++c)
        out[c] = w00 * plane.at(i0, j0, c) + w01 * plane.at(i0, j1, c) +
                 w10 * plane.at(i1, j0, c) + w11 * plane.at(i1, j1, c);
}

}  // namespace detail

// Bilinear sample of all three planes, concatenated in (xy, yz, zx) order.
template <class T>
FeatureVector<T> fetch(const Triplane<T>& t, const Vec3<T>& p) {
    if (p.cwiseAbs().maxCoeff() > T(1) + T(1e-6))
        throw std::invalid_argument("fetch: point outside [-1,1]^3");
    const auto projections = project_to_planes(p);
    FeatureVector<T> out(3 * t.channels);
    for (int d = 0; d < 3; ++d)
        detail::bilinear_fetch(t.planes[d], projections[d], out.data() + d * t.channels);
    return out;
}

namespace detail {

template <class T>
FeatureGrid<T> linear_channel_map(const FeatureGrid<T>& in, const TokenMatrix<T>& weights) {
    FeatureGrid<T> out(in.resolution, static_cast<int>(weights.rows()));
    for (int i = 0; i < in.resolution; ++i)
        for (int j = 0; j < in.resolution; ++j) {
            Eigen::Map<FeatureVector<T>> dst(
                &out.data[(static_cast<std::size_t>(i) * out.resolution + j) * out.channels],
                out.channels);
            dst = weights * in.node(i, j);
        }
    return out;
}

// Deterministic align-corners bilinear 2x upsample.
template <class T>
FeatureGrid<T> upsample_2x(const FeatureGrid<T>& in) {
    const int ro = 2 * in.resolution;
    FeatureGrid<T> out(ro, in.channels);
    for (int i = 0; i < ro; ++i)
        for (int j = 0; j < ro; ++j) {
            const T si = T(i) * T(in.resolution - 1) / T(ro - 1);
            const T sj = T(j) * T(in.resolution - 1) / T(ro - 1);
            const int i0 = std::min(static_cast<int>(std::floor(si)), in.resolution - 1);
            const int j0 = std::min(static_cast<int>(std::floor(sj)), in.resolution - 1);
            const int i1 = std::min(i0 + 1, in.resolution - 1);
            const int j1 = std::min(j0 + 1, in.resolution - 1);
            const T fi = si - T(i0);
            const T fj = sj - T(j0);
            for (int c = 0; c < in.channels; ++c)
                out.at(i, j, c) = (T(1) - fi) * ((T(1) - fj) * in.at(i0, j0, c) +
                                                 fj * in.at(i0, j1, c)) +
                                  fi * ((T(1) - fj) * in.at(i1, j0, c) + fj * in.at(i1, j1, c));
        }
    return out;
}

}  // namespace detail

// Multi-scale triplane construction. Scale 0 applies a per-direction seeded
// channel map to the base feature map; each following scale bilinearly
// doubles the resolution and halves the channels with per-(direction, scale)
// seeded weights.
template <class T>
TriplaneStack<T> build_multiscale(const ImageFeatureMap<T>& base, int n_scales,
                                  std::uint64_t seed) {
    if (n_scales < 1) throw std::invalid_argument("build_multiscale: need at least one scale");
    if (base.resolution < 2) throw std::invalid_argument("build_multiscale: base too small");

    TriplaneStack<T> stack;
    stack.scales.resize(n_scales);
    for (int d = 0; d < 3; ++d) {
        const auto w0 = seeded_linear_weights<T>(base.channels, base.channels,
                                                 derive_seed(seed, d * 97));
        stack.scales[0].planes[d] = detail::linear_channel_map(base, w0);
    }
    stack.scales[0].resolution = base.resolution;
    stack.scales[0].channels = base.channels;

    for (int s = 1; s < n_scales; ++s) {
        const int in_ch = stack.scales[s - 1].channels;
        if (in_ch % 2 != 0)
            throw std::invalid_argument("build_multiscale: channel count must halve evenly");
        for (int d = 0; d < 3; ++d) {
            const auto up = detail::upsample_2x(stack.scales[s - 1].planes[d]);
            const auto w = seeded_linear_weights<T>(in_ch / 2, in_ch,
                                                    derive_seed(seed, d * 97 + s));
            stack.scales[s].planes[d] = detail::linear_channel_map(up, w);
        }
        stack.scales[s].resolution = 2 * stack.scales[s - 1].resolution;
        stack.scales[s].channels = in_ch / 2;
    }
    return stack;
}

template <class T>
struct CrossAttendResult {
    FeatureGrid<T> output;   // same token layout as the query map
    TokenMatrix<T> weights;  // n_query x (n_query + n_occupancy)
};

// Single-head scaled dot-product attention with seeded projections. The
// image features are the queries; keys and values run over the image tokens
// concatenated with the occupancy tokens.
template <class T>
CrossAttendResult<T> cross_attend_detail(const ImageFeatureMap<T>& f,
                                         const OccupancyFeature<T>& occ, std::uint64_t seed) {
    const int c = f.channels;
    if (occ.tokens.rows() > 0 && occ.channels != c)
        throw std::invalid_argument("cross_attend: occupancy channel width must match");

    const int nf = f.resolution * f.resolution;
    const int no = static_cast<int>(occ.tokens.rows());
    TokenMatrix<T> ftok(nf, c);
    for (int i = 0; i < f.resolution; ++i)
        for (int j = 0; j < f.resolution; ++j)
            ftok.row(i * f.resolution + j) = f.node(i, j).transpose();

    TokenMatrix<T> kv(nf + no, c);
    kv.topRows(nf) = ftok;
    if (no > 0) kv.bottomRows(no) = occ.tokens;

    const auto wq = seeded_linear_weights<T>(c, c, derive_seed(seed, 11));
    const auto wk = seeded_linear_weights<T>(c, c, derive_seed(seed, 12));
    const auto wv = seeded_linear_weights<T>(c, c, derive_seed(seed, 13));

    const TokenMatrix<T> q = ftok * wq.transpose();
    const TokenMatrix<T> k = kv * wk.transpose();
    const TokenMatrix<T> v = kv * wv.transpose();

    CrossAttendResult<T> res;
    res.weights = TokenMatrix<T>(nf, nf + no);
    const T inv_sqrt_d = T(1) / std::sqrt(T(c));
    for (int row = 0; row < nf; ++row) {
        Eigen::Matrix<T, Eigen::Dynamic, 1> scores = (k * q.row(row).transpose()) * inv_sqrt_d;
        const T m = scores.maxCoeff();
        scores = (scores.array() - m).exp();
        res.weights.row(row) = (scores / scores.sum()).transpose();
    }
    const TokenMatrix<T> out = res.weights * v;

    res.output = FeatureGrid<T>(f.resolution, c);
    for (int i = 0; i < f.resolution; ++i)
        for (int j = 0; j < f.resolution; ++j)
            for (int ch = 0; ch < c; ++ch)
                res.output.at(i, j, ch) = out(i * f.resolution + j, ch);
    return res;
}

template <class T>
ImageFeatureMap<T> cross_attend(const ImageFeatureMap<T>& f, const OccupancyFeature<T>& occ,
                                std::uint64_t seed) {
    return cross_attend_detail(f, occ, seed).output;
}

// Projects the fetched triplane feature to the occupancy feature's width
// with a seeded linear map, then adds.
template <class T>
FeatureVector<T> inject(const FeatureVector<T>& occ_feature, const FeatureVector<T>& fetched,
                        std::uint64_t seed) {
    const auto w = seeded_linear_weights<T>(static_cast<int>(occ_feature.size()),
                                            static_cast<int>(fetched.size()),
                                            derive_seed(seed, 29));
    return occ_feature + w * fetched;
}

template <class T>
FeatureVector<T> mixup(const FeatureVector<T>& f0, const FeatureVector<T>& f1, T alpha) {
    if (f0.size() != f1.size()) throw std::invalid_argument("mixup: size mismatch");
    return alpha * f0 + (T(1) - alpha) * f1;
}

}  // namespace ngs
