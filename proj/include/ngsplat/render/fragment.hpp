#pragma once

#include "ngsplat/core/image.hpp"
#include "ngsplat/core/types.hpp"

namespace ngs {

enum class RenderMode { Rgb, Normal, Depth };

inline const char* render_mode_name(RenderMode m) {
    switch (m) {
        case RenderMode::Rgb: return "rgb";
        case RenderMode::Normal: return "normal";
        case RenderMode::Depth: return "depth";
    }
    return "unknown";
}

// A Gaussian after perspective projection, ready for compositing.
template <class T>
struct SplatFragment {
    int gaussian_index = -1;
    Vec2<T> mean2d = Vec2<T>::Zero();   // pixels
    Mat2<T> cov2d = Mat2<T>::Zero();    // pixels^2, after low-pass dilation
    T view_depth = T(0);                // camera-space z
    Vec3<T> payload = Vec3<T>::Zero();  // RGB color or world-frame normal
    T alpha_scale = T(0);               // logistic(opacity_raw)
};

template <class T>
struct RenderOutput {
    Image<T> payload_image;        // H x W x 3
    Image<T> alpha_image;          // H x W, accumulated sum_i alpha_i T_i
    Image<T> depth_image;          // H x W, expected depth sum_i z_i alpha_i T_i
    Image<T> transmittance_image;  // H x W, T after the last composited fragment
};

}  // namespace ngs
