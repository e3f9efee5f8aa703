#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/params.hpp"
#include "signet/tensor.hpp"

namespace signet {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam state over a parameter store. Moments are kept per
/// trainable entry, aligned with the store's order.
struct AdamState {
    AdamConfig hyper;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;  // first moments
    std::vector<std::vector<double>> v;  // second moments, nonnegative

    static AdamState make(const ParamStore& params, AdamConfig cfg = {}) {
        AdamState s;
        s.hyper = cfg;
        for (const auto& e : params.entries()) {
            if (!e.trainable) continue;
            s.m.emplace_back(e.tensor.size(), 0.0);
            s.v.emplace_back(e.tensor.size(), 0.0);
        }
        return s;
    }
};

/// One Adam update from the .grad slots. Rejects non-finite gradients,
/// naming the offending parameter.
inline void adam_step(ParamStore& params, AdamState& state) {
    state.step += 1;
    double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    std::size_t slot = 0;
    for (auto& e : params.entries()) {
        if (!e.trainable) continue;
        require(slot < state.m.size(), "adam: state has fewer slots than the store");
        auto& m = state.m[slot];
        auto& v = state.v[slot];
        require(m.size() == e.tensor.size(), "adam: moment shape mismatch at '" + e.name + "'");
        auto& g = e.tensor.grad();
        auto& p = e.tensor.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = static_cast<double>(g[i]);
            if (!std::isfinite(gi))
                throw std::runtime_error("adam: non-finite gradient in parameter '" + e.name + "'");
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            double mhat = m[i] / corr1;
            double vhat = v[i] / corr2;
            p[i] = static_cast<float>(static_cast<double>(p[i]) -
                                      state.hyper.learning_rate * mhat /
                                          (std::sqrt(vhat) + state.hyper.epsilon));
        }
        ++slot;
    }
}

/// Single-tensor variant used by the latent-vector attack and small tests.
struct AdamScalarState {
    AdamConfig hyper;
    std::size_t step = 0;
    std::vector<double> m, v;
};

inline void adam_step_vector(std::vector<float>& param, const std::vector<float>& grad,
                             AdamScalarState& state) {
    if (state.m.empty()) {
        state.m.assign(param.size(), 0.0);
        state.v.assign(param.size(), 0.0);
    }
    require(grad.size() == param.size(), "adam: gradient length mismatch");
    state.step += 1;
    double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
    double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double gi = static_cast<double>(grad[i]);
        if (!std::isfinite(gi)) throw std::runtime_error("adam: non-finite gradient in vector parameter");
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * gi;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * gi * gi;
        double mhat = state.m[i] / corr1;
        double vhat = state.v[i] / corr2;
        param[i] = static_cast<float>(static_cast<double>(param[i]) -
                                      state.hyper.learning_rate * mhat / (std::sqrt(vhat) + state.hyper.epsilon));
    }
}

}  // namespace signet
