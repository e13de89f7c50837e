#pragma once

// Minimal reverse-mode autodiff tape. Values live on the tape; a TensorT is a
// cheap handle (tape pointer + node id). Ops append one node per output and
// install a backward closure that accumulates into per-node gradient buffers.

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "evslt/errors.hpp"

namespace evslt {

inline int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename Real>
class TapeT;

template <typename Real>
struct TensorT {
    TapeT<Real>* tape = nullptr;
    int64_t id = -1;

    bool defined() const { return tape != nullptr && id >= 0; }
    const std::vector<int64_t>& shape() const;
    const std::vector<Real>& value() const;
    int64_t numel() const { return numel_of(shape()); }
    bool requires_grad() const;
};

template <typename Real>
class TapeT {
  public:
    // gradient buffers indexed by node id; empty vector = not yet reached
    using Grads = std::vector<std::vector<Real>>;
    using BackwardFn = std::function<void(const std::vector<Real>& gout, Grads& grads)>;

    struct Node {
        std::vector<int64_t> shape;
        std::vector<Real> value;
        bool requires_grad = false;
        bool is_leaf = false;
        BackwardFn backward;
    };

    TensorT<Real> leaf(std::vector<int64_t> shape, std::vector<Real> value,
                       bool requires_grad = true) {
        check_sized(shape, value);
        Node n;
        n.shape = std::move(shape);
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.is_leaf = true;
        nodes_.push_back(std::move(n));
        return TensorT<Real>{this, static_cast<int64_t>(nodes_.size() - 1)};
    }

    TensorT<Real> constant(std::vector<int64_t> shape, std::vector<Real> value) {
        return leaf(std::move(shape), std::move(value), false);
    }

    TensorT<Real> scalar(Real v) { return constant({}, {v}); }

    TensorT<Real> make(std::vector<int64_t> shape, std::vector<Real> value, bool requires_grad) {
        check_sized(shape, value);
        Node n;
        n.shape = std::move(shape);
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return TensorT<Real>{this, static_cast<int64_t>(nodes_.size() - 1)};
    }

    void set_backward(int64_t id, BackwardFn fn) { nodes_[size_t(id)].backward = std::move(fn); }

    Node& node(int64_t id) { return nodes_[size_t(id)]; }
    const Node& node(int64_t id) const { return nodes_[size_t(id)]; }
    size_t size() const { return nodes_.size(); }

    // lazily allocate the zero-filled gradient buffer for a node
    std::vector<Real>& grad_buf(Grads& grads, int64_t id) {
        auto& g = grads[size_t(id)];
        if (g.empty()) g.assign(size_t(numel_of(nodes_[size_t(id)].shape)), Real(0));
        return g;
    }

    // gradients of loss w.r.t. every requires_grad leaf; unused leaves get zeros
    std::unordered_map<int64_t, std::vector<Real>> backward(const TensorT<Real>& loss) {
        if (loss.tape != this || loss.id < 0) throw NumericError("loss does not belong to this tape");
        if (!node(loss.id).shape.empty())
            throw NonScalarLoss("loss has shape " + shape_str(node(loss.id).shape));
        Grads grads(nodes_.size());
        grad_buf(grads, loss.id)[0] = Real(1);
        for (int64_t i = loss.id; i >= 0; --i) {
            Node& n = nodes_[size_t(i)];
            if (grads[size_t(i)].empty()) continue;  // not an ancestor of the loss
            if (n.backward) n.backward(grads[size_t(i)], grads);
        }
        std::unordered_map<int64_t, std::vector<Real>> out;
        for (int64_t i = 0; i < static_cast<int64_t>(nodes_.size()); ++i) {
            const Node& n = nodes_[size_t(i)];
            if (!n.is_leaf || !n.requires_grad) continue;
            if (grads[size_t(i)].empty())
                out[i] = std::vector<Real>(size_t(numel_of(n.shape)), Real(0));
            else
                out[i] = std::move(grads[size_t(i)]);
        }
        return out;
    }

  private:
    static void check_sized(const std::vector<int64_t>& shape, const std::vector<Real>& value) {
        if (static_cast<int64_t>(value.size()) != numel_of(shape))
            throw ShapeMismatch("value size " + std::to_string(value.size()) +
                                " does not match shape " + shape_str(shape));
    }

    std::vector<Node> nodes_;
};

template <typename Real>
const std::vector<int64_t>& TensorT<Real>::shape() const {
    return tape->node(id).shape;
}
template <typename Real>
const std::vector<Real>& TensorT<Real>::value() const {
    return tape->node(id).value;
}
template <typename Real>
bool TensorT<Real>::requires_grad() const {
    return tape->node(id).requires_grad;
}

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace evslt
