#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "epg/autodiff/tape.hpp"

namespace epg::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
};

template <class Scalar>
struct AdamState {
    std::vector<Vector<Scalar>> m;
    std::vector<Vector<Scalar>> v;
    long step = 0;
};

// One Adam update with bias correction over every parameter in `params`.
template <class Scalar>
void adam_step(std::span<Parameter<Scalar>> params, AdamState<Scalar>& state, const AdamConfig& cfg)
{
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.push_back(Vector<Scalar>::Zero(p.value.size()));
            state.v.push_back(Vector<Scalar>::Zero(p.value.size()));
        }
    }
    if (state.m.size() != params.size()) throw DimensionError("adam state does not match parameter list");
    ++state.step;
    const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
    const Scalar c1 = Scalar(1) - Scalar(std::pow(cfg.beta1, static_cast<double>(state.step)));
    const Scalar c2 = Scalar(1) - Scalar(std::pow(cfg.beta2, static_cast<double>(state.step)));
    const Scalar lr = Scalar(cfg.lr), eps = Scalar(cfg.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p.grad.size() != p.value.size()) throw DimensionError("gradient shape of '" + p.name + "' differs from value");
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = p.grad.data();
        m = b1 * m + (Scalar(1) - b1) * g;
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        p.value.data().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
}

}  // namespace epg::ad
