#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ngs {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First and second moment estimates for one parameter group. Moments are
// kept in double regardless of the parameter scalar type.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state, double lr,
               const AdamParams& hp = {}) {
    if (params.size() != grads.size()) throw std::invalid_argument("param/grad size mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] = T(static_cast<double>(params[i]) - lr * m_hat / (std::sqrt(v_hat) + hp.eps));
    }
}

}  // namespace ngs
