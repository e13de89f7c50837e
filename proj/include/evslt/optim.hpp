#pragma once

// SGD with momentum and a cosine-annealed learning rate.

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "evslt/errors.hpp"
#include "evslt/params.hpp"

namespace evslt {

struct OptimizerState {
    double lr0 = 0.01;
    double lr_min = 0.0;
    int64_t total_steps = 1;
    int64_t step = 0;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

inline double cosine_lr(const OptimizerState& st) {
    const double frac = double(st.step) / double(st.total_steps);
    return st.lr_min + 0.5 * (st.lr0 - st.lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

// v <- momentum*v + g; p <- p - lr*v
template <typename Real>
void sgd_step(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
              const std::unordered_map<int64_t, std::vector<Real>>& grads, OptimizerState& st) {
    const Real lr = Real(cosine_lr(st));
    for (size_t i = 0; i < store.size(); ++i) {
        auto& p = store.at(i);
        if (!p.trainable) continue;
        const auto it = grads.find(bound.leaves[i].id);
        if (p.velocity.size() != p.value.size()) p.velocity.assign(p.value.size(), Real(0));
        if (it != grads.end() && it->second.size() != p.value.size())
            throw ShapeMismatch("gradient size for " + p.name);
        for (size_t j = 0; j < p.value.size(); ++j) {
            Real g = it != grads.end() ? it->second[j] : Real(0);
            if (st.weight_decay != 0.0) g += Real(st.weight_decay) * p.value[j];
            p.velocity[j] = Real(st.momentum) * p.velocity[j] + g;
            p.value[j] -= lr * p.velocity[j];
        }
    }
    ++st.step;
}

}  // namespace evslt
