#pragma once

#include "ngsplat/core/types.hpp"

#include <cmath>

namespace ngs {

template <class T>
inline Mat3<T> skew(const Vec3<T>& v) {
    Mat3<T> m;
    m << T(0), -v.z(), v.y(),
         v.z(), T(0), -v.x(),
        -v.y(), v.x(), T(0);
    return m;
}

// Threshold below which n x z is treated as degenerate (n parallel to +-z).
inline constexpr double kParallelEps = 1e-8;

// Rotation that carries the world z-axis onto the unit normal n, i.e.
// R * e_z = n. The rotation axis is z x n (angle acos(n.z)); for unit n
// Rodrigues' formula collapses to the closed form
//     R = I + [z x n]_x + [z x n]_x^2 / (1 + n.z),
// smooth everywhere except n = -z.
//
// Degenerate cases: n ~ +z gives the identity, n ~ -z gives a pi rotation
// about the x-axis, diag(1,-1,-1).
template <class T>
inline Mat3<T> normal_to_rotation(const Vec3<T>& n) {
    const Vec3<T> z(T(0), T(0), T(1));
    const Vec3<T> u = z.cross(n);
    const T c = n.z();
    if (u.norm() < T(kParallelEps)) {
        Mat3<T> r = Mat3<T>::Identity();
        if (c < T(0)) {
            r(1, 1) = T(-1);
            r(2, 2) = T(-1);
        }
        return r;
    }
    const Mat3<T> k = skew(u);
    return Mat3<T>::Identity() + k + k * k / (T(1) + c);
}

// Chain rule through normal_to_rotation: given dL/dR and the unit normal,
// returns dL/dn. Zero in the antipodal branch where the map is discontinuous.
template <class T>
inline Vec3<T> normal_to_rotation_backward(const Vec3<T>& n, const Mat3<T>& d_rotation) {
    const Vec3<T> z(T(0), T(0), T(1));
    const T c = n.z();
    if (c < T(-1) + T(1e-7)) return Vec3<T>::Zero();

    const Vec3<T> u = z.cross(n);
    const Mat3<T> k = skew(u);
    const Mat3<T> k2 = k * k;
    const T inv1c = T(1) / (T(1) + c);

    Vec3<T> grad;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3<T> e = Vec3<T>::Zero();
        e[axis] = T(1);
        const Mat3<T> w = skew<T>(z.cross(e));  // d[u]_x / dn_axis
        Mat3<T> dr = w + (w * k + k * w) * inv1c;
        if (axis == 2) dr -= k2 * (inv1c * inv1c);
        grad[axis] = (d_rotation.array() * dr.array()).sum();
    }
    return grad;
}

// Gradient of v/|v| composed with a downstream gradient on the unit vector.
template <class T>
inline Vec3<T> normalize_backward(const Vec3<T>& raw, const Vec3<T>& d_unit) {
    const T norm = raw.norm();
    if (norm < T(kParallelEps)) return Vec3<T>::Zero();
    const Vec3<T> n = raw / norm;
    return (d_unit - n * n.dot(d_unit)) / norm;
}

// Quaternion (w, x, y, z) to rotation matrix. Non-unit input is normalized
// internally; gradients flow through the normalization (see backward below).
template <class T>
inline Mat3<T> quat_to_matrix(const Vec4<T>& q_raw) {
    const Vec4<T> q = q_raw.normalized();
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
         T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
         T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

// Shepperd's method; returns the quaternion with the largest-magnitude
// component taken from the numerically dominant diagonal branch.
template <class T>
inline Vec4<T> matrix_to_quat(const Mat3<T>& r) {
    Vec4<T> q;
    const T trace = r.trace();
    if (trace > T(0)) {
        T s = std::sqrt(trace + T(1)) * T(2);
        q = Vec4<T>(T(0.25) * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
                    (r(1, 0) - r(0, 1)) / s);
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        T s = std::sqrt(T(1) + r(0, 0) - r(1, 1) - r(2, 2)) * T(2);
        q = Vec4<T>((r(2, 1) - r(1, 2)) / s, T(0.25) * s, (r(0, 1) + r(1, 0)) / s,
                    (r(0, 2) + r(2, 0)) / s);
    } else if (r(1, 1) > r(2, 2)) {
        T s = std::sqrt(T(1) + r(1, 1) - r(0, 0) - r(2, 2)) * T(2);
        q = Vec4<T>((r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, T(0.25) * s,
                    (r(1, 2) + r(2, 1)) / s);
    } else {
        T s = std::sqrt(T(1) + r(2, 2) - r(0, 0) - r(1, 1)) * T(2);
        q = Vec4<T>((r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s,
                    T(0.25) * s);
    }
    return q.normalized();
}

// dL/dq_raw given dL/dR, chaining through the internal normalization.
template <class T>
inline Vec4<T> quat_to_matrix_backward(const Vec4<T>& q_raw, const Mat3<T>& d_rotation) {
    const T norm = q_raw.norm();
    const Vec4<T> q = q_raw / norm;
    const T w = q[0], x = q[1], y = q[2], z = q[3];

    Mat3<T> dw, dx, dy, dz;
    dw << T(0), -z, y,
          z, T(0), -x,
         -y, x, T(0);
    dx << T(0), y, z,
          y, T(-2) * x, -w,
          z, w, T(-2) * x;
    dy << T(-2) * y, x, w,
          x, T(0), z,
         -w, z, T(-2) * y;
    dz << T(-2) * z, -w, x,
          w, T(-2) * z, y,
          x, y, T(0);

    Vec4<T> d_unit;
    d_unit[0] = T(2) * (d_rotation.array() * dw.array()).sum();
    d_unit[1] = T(2) * (d_rotation.array() * dx.array()).sum();
    d_unit[2] = T(2) * (d_rotation.array() * dy.array()).sum();
    d_unit[3] = T(2) * (d_rotation.array() * dz.array()).sum();
    return (d_unit - q * q.dot(d_unit)) / norm;
}

// Sigma = R diag(s^2) R^T.
template <class T>
inline Mat3<T> covariance_from(const Mat3<T>& rotation, const Vec3<T>& scales) {
    const Vec3<T> s2 = scales.array().square();
    return rotation * s2.asDiagonal() * rotation.transpose();
}

}  // namespace ngs
