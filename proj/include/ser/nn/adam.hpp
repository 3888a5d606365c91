#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ser/nn/network.hpp"

namespace ser::nn {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment estimates per parameter tensor plus the shared step
// counter, aligned with Network::parameters() order.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::int64_t step = 0;

    static AdamState init_for(Network<T>& net) {
        AdamState s;
        for (const auto& p : net.parameters()) {
            s.m.push_back(p.value->zeros_like());
            s.v.push_back(p.value->zeros_like());
        }
        return s;
    }
};

// One bias-corrected Adam update from the gradients currently stored in the
// network. Increments the step count exactly once per call.
template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state, const AdamConfig& cfg) {
    auto params = net.parameters();
    if (params.size() != state.m.size()) {
        throw ConfigError("adam state does not match parameter count");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& value = *params[i].value;
        const Tensor<T>& grad = *params[i].grad;
        Tensor<T>& m = state.m[i];
        Tensor<T>& v = state.v[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = static_cast<double>(grad.data[k]);
            const double mk = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * g;
            const double vk = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * g * g;
            m.data[k] = static_cast<T>(mk);
            v.data[k] = static_cast<T>(vk);
            const double m_hat = mk / bc1;
            const double v_hat = vk / bc2;
            value.data[k] = static_cast<T>(value.data[k] -
                                           cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

}  // namespace ser::nn
