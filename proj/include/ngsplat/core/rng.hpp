#pragma once

#include "ngsplat/core/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace ngs {

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distributions below are hand-rolled because std::*_distribution is
// implementation-defined and would break run-to-run reproducibility across
// library versions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    std::uint64_t next_u64() { return gen_(); }

    // Box-Muller standard normal.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    Vec3<T> unit_vec3() {
        Vec3<T> v;
        do {
            v = Vec3<T>(T(normal()), T(normal()), T(normal()));
        } while (v.norm() < T(1e-6));
        return v.normalized();
    }

    template <class T>
    Vec4<T> unit_quat() {
        Vec4<T> q;
        do {
            q = Vec4<T>(T(normal()), T(normal()), T(normal()), T(normal()));
        } while (q.norm() < T(1e-6));
        return q.normalized();
    }

    // Derive an independent stream, e.g. one per sub-module or direction.
    SeededRng fork(std::uint64_t stream) const {
        std::mt19937_64 g = gen_;
        const std::uint64_t base = g();
        return SeededRng(base ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ngs
