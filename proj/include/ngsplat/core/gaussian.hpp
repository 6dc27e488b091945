#pragma once

#include "ngsplat/core/rotation.hpp"
#include "ngsplat/core/sh.hpp"
#include "ngsplat/core/types.hpp"

#include <cstdint>
#include <vector>

namespace ngs {

// How the per-Gaussian rotation is parameterized during fitting.
//  Unconstrained: free quaternion.
//  Isotropic:     identity rotation, one shared scale per Gaussian.
//  NormalGuided:  rotation derived from the stored normal, never stored.
enum class ParamMode { Unconstrained, Isotropic, NormalGuided };

inline const char* param_mode_name(ParamMode m) {
    switch (m) {
        case ParamMode::Unconstrained: return "unconstrained";
        case ParamMode::Isotropic: return "isotropic";
        case ParamMode::NormalGuided: return "normal_guided";
    }
    return "unknown";
}

template <class T>
struct Gaussian3D {
    Vec3<T> position = Vec3<T>::Zero();
    Vec4<T> rotation_raw = Vec4<T>(T(1), T(0), T(0), T(0));  // (w,x,y,z)
    Vec3<T> scales_log = Vec3<T>::Zero();                    // log std-devs
    T opacity_raw = T(0);                                    // pre-logistic
    ShBlock<T> sh = ShBlock<T>::Zero();
    Vec3<T> normal_raw = Vec3<T>(T(0), T(0), T(1));

    Vec3<T> scales() const { return scales_log.array().exp(); }
    T opacity() const { return logistic(opacity_raw); }

    // Unit normal; falls back to world-up for vanishing raw normals so the
    // map stays total during optimization.
    Vec3<T> unit_normal() const {
        const T norm = normal_raw.norm();
        if (norm < T(kParallelEps)) return Vec3<T>(T(0), T(0), T(1));
        return normal_raw / norm;
    }

    Mat3<T> rotation(ParamMode mode) const {
        switch (mode) {
            case ParamMode::Unconstrained: return quat_to_matrix(rotation_raw);
            case ParamMode::Isotropic: return Mat3<T>::Identity();
            case ParamMode::NormalGuided: return normal_to_rotation(unit_normal());
        }
        return Mat3<T>::Identity();
    }

    Mat3<T> covariance(ParamMode mode) const {
        return covariance_from(rotation(mode), scales());
    }
};

template <class T>
struct GaussianField {
    std::vector<Gaussian3D<T>> gaussians;
    ParamMode param_mode = ParamMode::Unconstrained;
    int sh_degree = 0;  // active degree, 0 or 1

    std::size_t size() const { return gaussians.size(); }

    template <class U>
    GaussianField<U> cast() const {
        GaussianField<U> out;
        out.param_mode = param_mode;
        out.sh_degree = sh_degree;
        out.gaussians.reserve(gaussians.size());
        for (const auto& g : gaussians) {
            Gaussian3D<U> h;
            h.position = g.position.template cast<U>();
            h.rotation_raw = g.rotation_raw.template cast<U>();
            h.scales_log = g.scales_log.template cast<U>();
            h.opacity_raw = U(g.opacity_raw);
            h.sh = g.sh.template cast<U>();
            h.normal_raw = g.normal_raw.template cast<U>();
            out.gaussians.push_back(h);
        }
        return out;
    }
};

}  // namespace ngs
