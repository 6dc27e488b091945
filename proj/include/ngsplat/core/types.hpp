#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace ngs {

template <class T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <class T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <class T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T> using Mat23 = Eigen::Matrix<T, 2, 3>;

using Vec3f = Vec3<float>;
using Vec3d = Vec3<double>;

// Real SH basis constants (graphics convention, see Ramamoorthi & Hanrahan).
inline constexpr double kShC0 = 0.28209479177387814;  // 1/(2*sqrt(pi))
inline constexpr double kShC1 = 0.4886025119029199;   // sqrt(3/(4*pi))

template <class T>
inline T logistic(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
inline T logit(T p) {
    return std::log(p / (T(1) - p));
}

// d logistic(x)/dx expressed through the activated value a = logistic(x).
template <class T>
inline T logistic_grad_from_value(T a) {
    return a * (T(1) - a);
}

}  // namespace ngs
