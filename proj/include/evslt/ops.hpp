#pragma once

// Elementwise, shape, and reduction primitives. Binary ops broadcast the
// right operand when its shape is a suffix of the left one (scalar included).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "evslt/tensor.hpp"

namespace evslt {

namespace detail {

template <typename Real>
bool is_suffix_of(const std::vector<int64_t>& small, const std::vector<int64_t>& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename Real>
void require_suffix(const TensorT<Real>& a, const TensorT<Real>& b, const char* op) {
    if (!is_suffix_of<Real>(b.shape(), a.shape()))
        throw ShapeMismatch(std::string(op) + ": " + shape_str(b.shape()) +
                            " is not a suffix of " + shape_str(a.shape()));
}

}  // namespace detail

template <typename Real>
TensorT<Real> add(TensorT<Real> a, TensorT<Real> b) {
    detail::require_suffix(a, b, "add");
    auto* tp = a.tape;
    const auto& av = a.value();
    const auto& bv = b.value();
    const size_t nb = bv.size();
    std::vector<Real> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % nb];
    const bool rg = a.requires_grad() || b.requires_grad();
    auto shp = a.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ia = a.id, ib = b.id, nb, ra = a.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            if (ra) {
                auto& ga = tp->grad_buf(grads, ia);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i];
            }
        });
    return y;
}

template <typename Real>
TensorT<Real> mul(TensorT<Real> a, TensorT<Real> b) {
    detail::require_suffix(a, b, "mul");
    auto* tp = a.tape;
    const auto& av = a.value();
    const auto& bv = b.value();
    const size_t nb = bv.size();
    std::vector<Real> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % nb];
    const bool rg = a.requires_grad() || b.requires_grad();
    auto shp = a.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ia = a.id, ib = b.id, nb, ra = a.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& av = tp->node(ia).value;
            const auto& bv = tp->node(ib).value;
            if (ra) {
                auto& ga = tp->grad_buf(grads, ia);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i % nb];
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * av[i];
            }
        });
    return y;
}

template <typename Real>
TensorT<Real> scale(TensorT<Real> x, Real c) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * c;
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, c](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
        });
    return y;
}

template <typename Real>
TensorT<Real> sub(TensorT<Real> a, TensorT<Real> b) {
    return add(a, scale(b, Real(-1)));
}

template <typename Real>
TensorT<Real> add_const(TensorT<Real> x, Real c) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + c;
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    return y;
}

template <typename Real>
TensorT<Real> relu(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > Real(0) ? xv[i] : Real(0);
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i)
                if (xv[i] > Real(0)) gx[i] += g[i];
        });
    return y;
}

template <typename Real>
TensorT<Real> silu(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        const Real s = Real(1) / (Real(1) + std::exp(-xv[i]));
        out[i] = xv[i] * s;
    }
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) {
                const Real s = Real(1) / (Real(1) + std::exp(-xv[i]));
                gx[i] += g[i] * s * (Real(1) + xv[i] * (Real(1) - s));
            }
        });
    return y;
}

template <typename Real>
TensorT<Real> exp_op(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iy = y.id](const std::vector<Real>& g, auto& grads) {
            const auto& yv = tp->node(iy).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i];
        });
    return y;
}

template <typename Real>
TensorT<Real> log_op(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = std::log(xv[i]);
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
        });
    return y;
}

template <typename Real>
TensorT<Real> sin_op(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = std::sin(xv[i]);
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * std::cos(xv[i]);
        });
    return y;
}

template <typename Real>
Real softplus_val(Real v) {
    return v > Real(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

template <typename Real>
TensorT<Real> softplus(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = softplus_val(xv[i]);
    const bool rg = x.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i)
                gx[i] += g[i] / (Real(1) + std::exp(-xv[i]));
        });
    return y;
}

template <typename Real>
TensorT<Real> reshape(TensorT<Real> x, std::vector<int64_t> shape) {
    auto* tp = x.tape;
    if (numel_of(shape) != x.numel())
        throw ShapeMismatch("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    const bool rg = x.requires_grad();
    auto y = tp->make(std::move(shape), x.value(), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    return y;
}

namespace detail {

inline std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * shape[i + 1];
    return st;
}

// flat index map realizing out[i] = in[map[i]] for a permutation of axes
inline std::vector<int64_t> permute_map(const std::vector<int64_t>& in_shape,
                                        const std::vector<int>& perm) {
    const auto in_st = strides_of(in_shape);
    std::vector<int64_t> out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[size_t(perm[i])];
    const auto out_st = strides_of(out_shape);
    const int64_t n = numel_of(in_shape);
    std::vector<int64_t> map(static_cast<size_t>(n));
    std::vector<int64_t> idx(perm.size(), 0);
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o, src = 0;
        for (size_t d = 0; d < perm.size(); ++d) {
            const int64_t q = rem / out_st[d];
            rem -= q * out_st[d];
            src += q * in_st[size_t(perm[d])];
        }
        map[size_t(o)] = src;
    }
    return map;
}

}  // namespace detail

template <typename Real>
TensorT<Real> permute(TensorT<Real> x, std::vector<int> perm) {
    auto* tp = x.tape;
    const auto in_shape = x.shape();
    if (perm.size() != in_shape.size()) throw ShapeMismatch("permute rank mismatch");
    auto map = detail::permute_map(in_shape, perm);
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[size_t(map[i])];
    std::vector<int64_t> out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[size_t(perm[i])];
    const bool rg = x.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, map = std::move(map)](const std::vector<Real>& g,
                                                                     auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[size_t(map[i])] += g[i];
        });
    return y;
}

template <typename Real>
TensorT<Real> slice_lastdim(TensorT<Real> x, int64_t lo, int64_t hi) {
    auto* tp = x.tape;
    const auto in_shape = x.shape();
    const int64_t last = in_shape.back();
    if (lo < 0 || hi > last || lo >= hi) throw ShapeMismatch("slice bounds");
    const int64_t width = hi - lo;
    const int64_t rows = x.numel() / last;
    const auto& xv = x.value();
    std::vector<Real> out(size_t(rows * width));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < width; ++j)
            out[size_t(r * width + j)] = xv[size_t(r * last + lo + j)];
    auto out_shape = in_shape;
    out_shape.back() = width;
    const bool rg = x.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, lo, last, width, rows](const std::vector<Real>& g,
                                                                      auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < width; ++j)
                    gx[size_t(r * last + lo + j)] += g[size_t(r * width + j)];
        });
    return y;
}

template <typename Real>
TensorT<Real> concat_lastdim(TensorT<Real> a, TensorT<Real> b) {
    auto* tp = a.tape;
    const auto sa = a.shape();
    const auto sb = b.shape();
    if (sa.size() != sb.size() ||
        !std::equal(sa.begin(), sa.end() - 1, sb.begin()))
        throw ShapeMismatch("concat " + shape_str(sa) + " with " + shape_str(sb));
    const int64_t la = sa.back(), lb = sb.back();
    const int64_t rows = a.numel() / la;
    const auto& av = a.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(rows * (la + lb)));
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < la; ++j) out[size_t(r * (la + lb) + j)] = av[size_t(r * la + j)];
        for (int64_t j = 0; j < lb; ++j)
            out[size_t(r * (la + lb) + la + j)] = bv[size_t(r * lb + j)];
    }
    auto out_shape = sa;
    out_shape.back() = la + lb;
    const bool rg = a.requires_grad() || b.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ia = a.id, ib = b.id, la, lb, rows, ra = a.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const int64_t w = la + lb;
            if (ra) {
                auto& ga = tp->grad_buf(grads, ia);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < la; ++j)
                        ga[size_t(r * la + j)] += g[size_t(r * w + j)];
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < lb; ++j)
                        gb[size_t(r * lb + j)] += g[size_t(r * w + la + j)];
            }
        });
    return y;
}

// tile a trailing size-1 axis out to n
template <typename Real>
TensorT<Real> expand_lastdim(TensorT<Real> x, int64_t n) {
    auto* tp = x.tape;
    const auto in_shape = x.shape();
    if (in_shape.empty() || in_shape.back() != 1) throw ShapeMismatch("expand needs trailing 1");
    const int64_t rows = x.numel();
    const auto& xv = x.value();
    std::vector<Real> out(size_t(rows * n));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n; ++j) out[size_t(r * n + j)] = xv[size_t(r)];
    auto out_shape = in_shape;
    out_shape.back() = n;
    const bool rg = x.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, rows, n](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (int64_t r = 0; r < rows; ++r) {
                Real acc = 0;
                for (int64_t j = 0; j < n; ++j) acc += g[size_t(r * n + j)];
                gx[size_t(r)] += acc;
            }
        });
    return y;
}

// flip axis 1 of a rank-3 tensor [B,T,C]
template <typename Real>
TensorT<Real> reverse_time(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto in_shape = x.shape();
    if (in_shape.size() != 3) throw ShapeMismatch("reverse_time needs rank 3");
    const int64_t B = in_shape[0], T = in_shape[1], C = in_shape[2];
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < T; ++t)
            for (int64_t c = 0; c < C; ++c)
                out[size_t((b * T + t) * C + c)] = xv[size_t((b * T + (T - 1 - t)) * C + c)];
    const bool rg = x.requires_grad();
    auto shp = in_shape;
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, B, T, C](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (int64_t b = 0; b < B; ++b)
                for (int64_t t = 0; t < T; ++t)
                    for (int64_t c = 0; c < C; ++c)
                        gx[size_t((b * T + (T - 1 - t)) * C + c)] += g[size_t((b * T + t) * C + c)];
        });
    return y;
}

template <typename Real>
TensorT<Real> sum_all(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto& xv = x.value();
    Real acc = 0;
    for (Real v : xv) acc += v;
    const bool rg = x.requires_grad();
    auto y = tp->make({}, {acc}, rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
        });
    return y;
}

template <typename Real>
TensorT<Real> mean_all(TensorT<Real> x) {
    return scale(sum_all(x), Real(1) / Real(x.numel()));
}

}  // namespace evslt
