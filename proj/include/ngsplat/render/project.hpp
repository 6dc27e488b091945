#pragma once

#include "ngsplat/core/camera.hpp"
#include "ngsplat/core/gaussian.hpp"
#include "ngsplat/render/fragment.hpp"

#include <cmath>
#include <optional>

namespace ngs {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPassPx2 = 0.3;  // anti-aliasing floor added to cov2d

// Projection Jacobian of (u, v) = (fx*x/z + cx, fy*y/z + cy) at p_cam.
template <class T>
inline Mat23<T> projection_jacobian(const Vec3<T>& p_cam, const Camera<T>& cam) {
    const T z = p_cam.z();
    const T inv_z = T(1) / z;
    const T inv_z2 = inv_z * inv_z;
    Mat23<T> j;
    j << cam.fx * inv_z, T(0), -cam.fx * p_cam.x() * inv_z2,
         T(0), cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z2;
    return j;
}

template <class T>
inline T max_eigenvalue_2x2(const Mat2<T>& m) {
    const T mid = (m(0, 0) + m(1, 1)) / T(2);
    const T det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const T disc = std::sqrt(std::max(T(0), mid * mid - det));
    return mid + disc;
}

// EWA projection of one Gaussian. Returns nullopt when the Gaussian is
// behind the near plane or its mean lies more than 3 sigma outside the
// image bounds. The payload is left for the renderer to fill.
template <class T>
inline std::optional<SplatFragment<T>> project(const Gaussian3D<T>& g, const Camera<T>& cam,
                                               ParamMode mode) {
    const Vec3<T> p_cam = cam.to_camera(g.position);
    if (!(p_cam.z() > T(kNearPlane))) return std::nullopt;

    SplatFragment<T> frag;
    frag.view_depth = p_cam.z();
    frag.mean2d = cam.project_point(p_cam);

    const Mat23<T> j = projection_jacobian(p_cam, cam);
    const Mat3<T> cov_cam = cam.rotation * g.covariance(mode) * cam.rotation.transpose();
    frag.cov2d = j * cov_cam * j.transpose() + Mat2<T>::Identity() * T(kLowPassPx2);

    const T radius = T(3) * std::sqrt(max_eigenvalue_2x2(frag.cov2d));
    if (frag.mean2d.x() + radius < T(0) || frag.mean2d.x() - radius > T(cam.width) ||
        frag.mean2d.y() + radius < T(0) || frag.mean2d.y() - radius > T(cam.height))
        return std::nullopt;

    frag.alpha_scale = g.opacity();
    return frag;
}

}  // namespace ngs
