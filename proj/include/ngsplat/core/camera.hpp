#pragma once

#include "ngsplat/core/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ngs {

// Pinhole camera with a rigid world-to-camera transform. Pixel (ix, iy)
// covers [ix, ix+1) x [iy, iy+1); its center sits at (ix+0.5, iy+0.5).
template <class T>
struct Camera {
    T fx = T(1), fy = T(1), cx = T(0), cy = T(0);
    int width = 0, height = 0;
    Mat3<T> rotation = Mat3<T>::Identity();  // world -> camera
    Vec3<T> translation = Vec3<T>::Zero();

    Vec3<T> to_camera(const Vec3<T>& p_world) const {
        return rotation * p_world + translation;
    }

    Vec3<T> center_in_world() const {
        return -(rotation.transpose() * translation);
    }

    Vec2<T> project_point(const Vec3<T>& p_cam) const {
        return Vec2<T>(fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy);
    }

    // World-space ray through a pixel center.
    Vec3<T> pixel_ray(int ix, int iy) const {
        Vec3<T> d_cam((T(ix) + T(0.5) - cx) / fx, (T(iy) + T(0.5) - cy) / fy, T(1));
        return (rotation.transpose() * d_cam).normalized();
    }

    bool valid() const {
        if (!(fx > T(0)) || !(fy > T(0))) return false;
        if (width <= 0 || height <= 0) return false;
        if (!(cx >= T(0)) || !(cx < T(width))) return false;
        if (!(cy >= T(0)) || !(cy < T(height))) return false;
        if (!rotation.allFinite() || !translation.allFinite()) return false;
        const Mat3<T> rtr = rotation.transpose() * rotation;
        return (rtr - Mat3<T>::Identity()).cwiseAbs().maxCoeff() < T(1e-5);
    }

    template <class U>
    Camera<U> cast() const {
        Camera<U> c;
        c.fx = U(fx); c.fy = U(fy); c.cx = U(cx); c.cy = U(cy);
        c.width = width; c.height = height;
        c.rotation = rotation.template cast<U>();
        c.translation = translation.template cast<U>();
        return c;
    }
};

template <class T>
struct CameraRig {
    std::vector<Camera<T>> cameras;

    std::size_t size() const { return cameras.size(); }

    void validate_for_fitting() const {
        if (cameras.size() < 2)
            throw std::invalid_argument("camera rig needs at least 2 views");
        for (const auto& c : cameras)
            if (!c.valid()) throw std::invalid_argument("invalid camera in rig");
    }
};

// Camera at `eye` looking at `target`, +z world up. Rows of the returned
// rotation are the camera axes expressed in world coordinates.
template <class T>
inline Camera<T> look_at_camera(const Vec3<T>& eye, const Vec3<T>& target, T fx, T fy,
                                int width, int height) {
    Vec3<T> forward = (target - eye).normalized();
    Vec3<T> up(T(0), T(0), T(1));
    if (std::abs(forward.dot(up)) > T(0.999)) up = Vec3<T>(T(0), T(1), T(0));
    const Vec3<T> right = forward.cross(up).normalized();
    const Vec3<T> down = forward.cross(right).normalized();

    Camera<T> cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = T(width) / T(2);
    cam.cy = T(height) / T(2);
    cam.width = width;
    cam.height = height;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -(cam.rotation * eye);
    return cam;
}

}  // namespace ngs
