#pragma once

// State-space primitives: zero-order-hold discretization of a diagonal
// continuous system and the sequential selective scan.

#include <cmath>
#include <cstdint>
#include <vector>

#include "evslt/tensor.hpp"

namespace evslt {

namespace detail {

// phi(u) = (e^u - 1)/u with the removable singularity handled by a
// truncated series below |u| = 1e-4
template <typename Real>
Real phi(Real u) {
    if (std::abs(u) < Real(1e-4)) return Real(1) + u / Real(2) + u * u / Real(6);
    return Real(std::expm1(double(u))) / u;
}

// phi'(u) = (e^u(u-1) + 1)/u^2
template <typename Real>
Real phi_prime(Real u) {
    if (std::abs(u) < Real(1e-4)) return Real(0.5) + u / Real(3) + u * u / Real(8);
    return (std::exp(u) * (u - Real(1)) + Real(1)) / (u * u);
}

}  // namespace detail

// Abar[b,t,c,s] = exp(delta[b,t,c] * A[c,s])
template <typename Real>
TensorT<Real> zoh_abar(TensorT<Real> delta, TensorT<Real> A) {
    auto* tp = delta.tape;
    const auto ds = delta.shape();
    const auto as = A.shape();
    if (ds.size() != 3 || as.size() != 2 || ds[2] != as[0])
        throw ShapeMismatch("zoh_abar " + shape_str(ds) + " x " + shape_str(as));
    const int64_t B = ds[0], T = ds[1], C = ds[2], S = as[1];
    const auto& dv = delta.value();
    const auto& av = A.value();
    std::vector<Real> out(size_t(B * T * C * S));
    for (int64_t r = 0; r < B * T * C; ++r) {
        const int64_t c = r % C;
        for (int64_t s = 0; s < S; ++s)
            out[size_t(r * S + s)] = std::exp(dv[size_t(r)] * av[size_t(c * S + s)]);
    }
    const bool rg = delta.requires_grad() || A.requires_grad();
    auto y = tp->make({B, T, C, S}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, idl = delta.id, ia = A.id, iy = y.id, B, T, C, S,
                                rd = delta.requires_grad(),
                                ra = A.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& dv = tp->node(idl).value;
            const auto& av = tp->node(ia).value;
            const auto& yv = tp->node(iy).value;
            std::vector<Real>* gd = rd ? &tp->grad_buf(grads, idl) : nullptr;
            std::vector<Real>* ga = ra ? &tp->grad_buf(grads, ia) : nullptr;
            for (int64_t r = 0; r < B * T * C; ++r) {
                const int64_t c = r % C;
                for (int64_t s = 0; s < S; ++s) {
                    const size_t i = size_t(r * S + s);
                    const Real ge = g[i] * yv[i];
                    if (gd) (*gd)[size_t(r)] += ge * av[size_t(c * S + s)];
                    if (ga) (*ga)[size_t(c * S + s)] += ge * dv[size_t(r)];
                }
            }
        });
    return y;
}

// Bbar[b,t,c,s] = phi(delta*A) * delta[b,t,c] * Bt[b,t,s]
template <typename Real>
TensorT<Real> zoh_bbar(TensorT<Real> delta, TensorT<Real> A, TensorT<Real> Bt) {
    auto* tp = delta.tape;
    const auto ds = delta.shape();
    const auto as = A.shape();
    const auto bs = Bt.shape();
    if (ds.size() != 3 || as.size() != 2 || bs.size() != 3 || ds[2] != as[0] ||
        bs[0] != ds[0] || bs[1] != ds[1] || bs[2] != as[1])
        throw ShapeMismatch("zoh_bbar shapes");
    const int64_t B = ds[0], T = ds[1], C = ds[2], S = as[1];
    const auto& dv = delta.value();
    const auto& av = A.value();
    const auto& bv = Bt.value();
    std::vector<Real> out(size_t(B * T * C * S));
    for (int64_t bt = 0; bt < B * T; ++bt)
        for (int64_t c = 0; c < C; ++c) {
            const Real d = dv[size_t(bt * C + c)];
            for (int64_t s = 0; s < S; ++s) {
                const Real u = d * av[size_t(c * S + s)];
                out[size_t((bt * C + c) * S + s)] = detail::phi(u) * d * bv[size_t(bt * S + s)];
            }
        }
    const bool rg = delta.requires_grad() || A.requires_grad() || Bt.requires_grad();
    auto y = tp->make({B, T, C, S}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, idl = delta.id, ia = A.id, ib = Bt.id, B, T, C, S,
                                rd = delta.requires_grad(), ra = A.requires_grad(),
                                rb = Bt.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& dv = tp->node(idl).value;
            const auto& av = tp->node(ia).value;
            const auto& bv = tp->node(ib).value;
            std::vector<Real>* gd = rd ? &tp->grad_buf(grads, idl) : nullptr;
            std::vector<Real>* ga = ra ? &tp->grad_buf(grads, ia) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ib) : nullptr;
            for (int64_t bt = 0; bt < B * T; ++bt)
                for (int64_t c = 0; c < C; ++c) {
                    const Real d = dv[size_t(bt * C + c)];
                    for (int64_t s = 0; s < S; ++s) {
                        const size_t i = size_t((bt * C + c) * S + s);
                        const Real a = av[size_t(c * S + s)];
                        const Real b = bv[size_t(bt * S + s)];
                        const Real u = d * a;
                        // d(phi(u)·d·b)/dd = b·(phi'(u)·a·d + phi(u)) = b·e^u
                        if (gd) (*gd)[size_t(bt * C + c)] += g[i] * b * std::exp(u);
                        if (ga) (*ga)[size_t(c * S + s)] += g[i] * detail::phi_prime(u) * d * d * b;
                        if (gb) (*gb)[size_t(bt * S + s)] += g[i] * detail::phi(u) * d;
                    }
                }
        });
    return y;
}

// h_t = Abar_t ⊙ h_{t-1} + Bbar_t · x_t;  y_t = <C_t, h_t> + d_skip ⊙ x_t
// abar,bbar: [B,T,C,S]; ct: [B,T,S]; x: [B,T,C]; d_skip: [C] -> y: [B,T,C]
template <typename Real>
TensorT<Real> selective_scan_core(TensorT<Real> abar, TensorT<Real> bbar, TensorT<Real> ct,
                                  TensorT<Real> x, TensorT<Real> d_skip) {
    auto* tp = abar.tape;
    const auto as = abar.shape();
    if (as.size() != 4) throw ShapeMismatch("scan abar rank");
    const int64_t B = as[0], T = as[1], C = as[2], S = as[3];
    if (bbar.shape() != as || ct.shape() != std::vector<int64_t>{B, T, S} ||
        x.shape() != std::vector<int64_t>{B, T, C} || d_skip.numel() != C)
        throw ShapeMismatch("scan input shapes");
    const auto& av = abar.value();
    const auto& bv = bbar.value();
    const auto& cv = ct.value();
    const auto& xv = x.value();
    const auto& dv = d_skip.value();

    std::vector<Real> h(size_t(B * T * C * S));  // every state, kept for backward
    std::vector<Real> out(size_t(B * T * C));
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            for (int64_t t = 0; t < T; ++t) {
                const size_t base = size_t(((b * T + t) * C + c) * S);
                const size_t prev = size_t(((b * T + (t - 1)) * C + c) * S);
                const Real xt = xv[size_t((b * T + t) * C + c)];
                Real acc = 0;
                for (int64_t s = 0; s < S; ++s) {
                    const Real hp = t > 0 ? h[prev + size_t(s)] : Real(0);
                    const Real ht = av[base + size_t(s)] * hp + bv[base + size_t(s)] * xt;
                    h[base + size_t(s)] = ht;
                    acc += cv[size_t((b * T + t) * S + s)] * ht;
                }
                out[size_t((b * T + t) * C + c)] = acc + dv[size_t(c)] * xt;
            }
        }
    const bool rg = abar.requires_grad() || bbar.requires_grad() || ct.requires_grad() ||
                    x.requires_grad() || d_skip.requires_grad();
    auto y = tp->make({B, T, C}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, iab = abar.id, ibb = bbar.id, ic = ct.id, ix = x.id,
                                idk = d_skip.id, B, T, C, S, h = std::move(h),
                                ra = abar.requires_grad(), rb = bbar.requires_grad(),
                                rc = ct.requires_grad(), rx = x.requires_grad(),
                                rd = d_skip.requires_grad()](const std::vector<Real>& g,
                                                             auto& grads) {
            const auto& av = tp->node(iab).value;
            const auto& bv = tp->node(ibb).value;
            const auto& cv = tp->node(ic).value;
            const auto& xv = tp->node(ix).value;
            const auto& dv = tp->node(idk).value;
            std::vector<Real>* ga = ra ? &tp->grad_buf(grads, iab) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ibb) : nullptr;
            std::vector<Real>* gc = rc ? &tp->grad_buf(grads, ic) : nullptr;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gd = rd ? &tp->grad_buf(grads, idk) : nullptr;
            std::vector<Real> gh(static_cast<size_t>(S));
            for (int64_t b = 0; b < B; ++b)
                for (int64_t c = 0; c < C; ++c) {
                    std::fill(gh.begin(), gh.end(), Real(0));
                    for (int64_t t = T - 1; t >= 0; --t) {
                        const size_t base = size_t(((b * T + t) * C + c) * S);
                        const size_t prev = size_t(((b * T + (t - 1)) * C + c) * S);
                        const size_t xi = size_t((b * T + t) * C + c);
                        const Real gy = g[xi];
                        const Real xt = xv[xi];
                        if (gd) (*gd)[size_t(c)] += gy * xt;
                        Real gxt = gy * dv[size_t(c)];
                        for (int64_t s = 0; s < S; ++s) {
                            const size_t ci = size_t((b * T + t) * S + s);
                            Real ghs = gh[size_t(s)] + gy * cv[ci];
                            if (gc) (*gc)[ci] += gy * h[base + size_t(s)];
                            const Real hp = t > 0 ? h[prev + size_t(s)] : Real(0);
                            if (ga) (*ga)[base + size_t(s)] += ghs * hp;
                            if (gb) (*gb)[base + size_t(s)] += ghs * xt;
                            gxt += ghs * bv[base + size_t(s)];
                            gh[size_t(s)] = ghs * av[base + size_t(s)];
                        }
                        if (gx) (*gx)[xi] += gxt;
                    }
                }
        });
    return y;
}

// literal 64-bit recurrence, the verification twin of selective_scan_core
struct ScanOracleInputs {
    int64_t B = 0, T = 0, C = 0, S = 0;
    std::vector<double> abar;    // B*T*C*S
    std::vector<double> bbar;    // B*T*C*S
    std::vector<double> ct;      // B*T*S
    std::vector<double> x;       // B*T*C
    std::vector<double> d_skip;  // C
};

inline std::vector<double> scan_oracle(const ScanOracleInputs& in) {
    std::vector<double> y(size_t(in.B * in.T * in.C), 0.0);
    std::vector<double> h(static_cast<size_t>(in.S));
    for (int64_t b = 0; b < in.B; ++b)
        for (int64_t c = 0; c < in.C; ++c) {
            std::fill(h.begin(), h.end(), 0.0);
            for (int64_t t = 0; t < in.T; ++t) {
                const size_t base = size_t(((b * in.T + t) * in.C + c) * in.S);
                const double xt = in.x[size_t((b * in.T + t) * in.C + c)];
                double acc = 0.0;
                for (int64_t s = 0; s < in.S; ++s) {
                    h[size_t(s)] = in.abar[base + size_t(s)] * h[size_t(s)] +
                                   in.bbar[base + size_t(s)] * xt;
                    acc += in.ct[size_t((b * in.T + t) * in.S + s)] * h[size_t(s)];
                }
                y[size_t((b * in.T + t) * in.C + c)] = acc + in.d_skip[size_t(c)] * xt;
            }
        }
    return y;
}

}  // namespace evslt
