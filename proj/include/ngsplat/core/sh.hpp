#pragma once

#include "ngsplat/core/types.hpp"

#include <algorithm>

namespace ngs {

// SH coefficient block for degrees 0..1: one row per color channel, one
// column per basis function (DC, then the three linear terms).
template <class T> using ShBlock = Eigen::Matrix<T, 3, 4>;

inline constexpr int kShBasisCount = 4;

// Basis values in the usual splatting order for a unit direction:
// (C0, -C1*y, C1*z, -C1*x). Degree 0 uses only the first entry.
template <class T>
inline Vec4<T> sh_basis(const Vec3<T>& dir, int degree) {
    Vec4<T> b = Vec4<T>::Zero();
    b[0] = T(kShC0);
    if (degree >= 1) {
        b[1] = T(-kShC1) * dir.y();
        b[2] = T(kShC1) * dir.z();
        b[3] = T(-kShC1) * dir.x();
    }
    return b;
}

// Color before the [0,1] clamp: sum_k basis_k(dir) * sh(:,k) + 0.5.
template <class T>
inline Vec3<T> sh_evaluate_raw(const ShBlock<T>& sh, const Vec3<T>& dir, int degree) {
    return sh * sh_basis(dir, degree) + Vec3<T>::Constant(T(0.5));
}

template <class T>
inline Vec3<T> sh_evaluate(const ShBlock<T>& sh, const Vec3<T>& dir, int degree) {
    Vec3<T> c = sh_evaluate_raw(sh, dir, degree);
    return c.cwiseMax(T(0)).cwiseMin(T(1));
}

// Backward through sh_evaluate: accumulates dL/dsh and returns dL/ddir.
// Channels sitting on the clamp boundary pass no gradient.
template <class T>
inline Vec3<T> sh_evaluate_backward(const ShBlock<T>& sh, const Vec3<T>& dir, int degree,
                                    const Vec3<T>& d_color, ShBlock<T>& d_sh) {
    const Vec3<T> raw = sh_evaluate_raw(sh, dir, degree);
    const Vec4<T> basis = sh_basis(dir, degree);
    Vec3<T> d_dir = Vec3<T>::Zero();
    for (int ch = 0; ch < 3; ++ch) {
        if (raw[ch] <= T(0) || raw[ch] >= T(1)) continue;
        const T g = d_color[ch];
        d_sh.row(ch) += g * basis.transpose();
        if (degree >= 1) {
            d_dir.x() += g * sh(ch, 3) * T(-kShC1);
            d_dir.y() += g * sh(ch, 1) * T(-kShC1);
            d_dir.z() += g * sh(ch, 2) * T(kShC1);
        }
    }
    return d_dir;
}

}  // namespace ngs
