#pragma once

// Gradient checking for whole modules: perturbs every trainable entry of a
// 64-bit ParamStore and compares tape gradients against central differences.
// The store is copied inside the probe so train-mode running-stat updates
// cannot leak between evaluations.

#include <functional>
#include <vector>

#include "evslt/gradcheck.hpp"
#include "evslt/ops.hpp"
#include "evslt/params.hpp"
#include "evslt/rng.hpp"
#include "evslt/tensor.hpp"

namespace evslt_test {

using DTape = evslt::TapeT<double>;
using DTensor = evslt::TensorT<double>;
using DStore = evslt::ParamStoreT<double>;
using DBound = evslt::BoundParamsT<double>;

// fwd: (tape, store, bound) -> output tensor; the loss is a fixed random
// weighting of the output so every element contributes a gradient
template <typename F>
double module_grad_check(DStore& master, F&& fwd, uint64_t salt, double eps = 1e-4) {
    std::vector<std::vector<double>*> params;
    std::vector<size_t> trainable;
    for (size_t i = 0; i < master.size(); ++i)
        if (master.at(i).trainable) {
            params.push_back(&master.at(i).value);
            trainable.push_back(i);
        }
    evslt::GradProbe probe = [&](std::vector<std::vector<double>>* grads_out) -> double {
        DStore store = master;
        DTape tape;
        auto bound = evslt::bind_params(tape, store);
        DTensor y = fwd(tape, store, bound);
        evslt::Rng r(salt);
        std::vector<double> w(static_cast<size_t>(y.numel()));
        for (auto& v : w) v = r.uniform(-1.0, 1.0);
        auto loss = evslt::sum_all(evslt::mul(y, tape.constant(y.shape(), std::move(w))));
        const double lv = loss.value()[0];
        if (grads_out) {
            auto g = tape.backward(loss);
            grads_out->clear();
            for (size_t i : trainable) grads_out->push_back(g.at(bound.leaves[i].id));
        }
        return lv;
    };
    return evslt::grad_check(probe, params, eps);
}

}  // namespace evslt_test
