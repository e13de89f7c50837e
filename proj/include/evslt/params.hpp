#pragma once

// Persistent parameter storage. Values survive across training steps; each
// step binds them onto a fresh tape as leaves. Non-trainable entries hold
// running statistics and are serialized but never updated by the optimizer.

#include <cstdint>
#include <string>
#include <vector>

#include "evslt/errors.hpp"
#include "evslt/tensor.hpp"

namespace evslt {

template <typename Real>
struct ParamT {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<Real> value;
    std::vector<Real> velocity;  // momentum buffer, sized on first optimizer use
    bool trainable = true;
};

template <typename Real>
class ParamStoreT {
  public:
    size_t add(std::string name, std::vector<int64_t> shape, std::vector<Real> value,
               bool trainable = true) {
        if (static_cast<int64_t>(value.size()) != numel_of(shape))
            throw ShapeMismatch("param " + name + " value/shape");
        if (find(name) != nullptr) throw ConfigError("duplicate parameter " + name);
        ParamT<Real> p;
        p.name = std::move(name);
        p.shape = std::move(shape);
        p.value = std::move(value);
        p.trainable = trainable;
        params_.push_back(std::move(p));
        return params_.size() - 1;
    }

    ParamT<Real>& at(size_t i) { return params_[i]; }
    const ParamT<Real>& at(size_t i) const { return params_[i]; }
    size_t size() const { return params_.size(); }

    ParamT<Real>* find(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return &p;
        return nullptr;
    }

  private:
    std::vector<ParamT<Real>> params_;
};

// per-step tape leaves, one per trainable param, indexed like the store
template <typename Real>
struct BoundParamsT {
    std::vector<TensorT<Real>> leaves;
    TensorT<Real> operator[](size_t i) const { return leaves[i]; }
};

template <typename Real>
BoundParamsT<Real> bind_params(TapeT<Real>& tape, const ParamStoreT<Real>& store) {
    BoundParamsT<Real> bound;
    bound.leaves.resize(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        const auto& p = store.at(i);
        if (p.trainable) bound.leaves[i] = tape.leaf(p.shape, p.value, true);
    }
    return bound;
}

using ParamStore = ParamStoreT<float>;

}  // namespace evslt
