#pragma once

// Neural-network primitives: linear maps, batched matmul, convolutions,
// normalizations, pooling, softmax, fused cross-entropy, and embedding lookup.

#include <cmath>
#include <cstdint>
#include <vector>

#include "evslt/ops.hpp"
#include "evslt/tensor.hpp"

namespace evslt {

namespace detail {

// C[M,N] (+)= op(A) * op(B), row-major
template <typename Real>
void mm(const Real* A, const Real* B, Real* C, int64_t M, int64_t N, int64_t K, bool ta, bool tb) {
    for (int64_t i = 0; i < M; ++i)
        for (int64_t k = 0; k < K; ++k) {
            const Real a = ta ? A[k * M + i] : A[i * K + k];
            if (a == Real(0)) continue;
            const Real* brow = tb ? nullptr : B + k * N;
            Real* crow = C + i * N;
            if (tb)
                for (int64_t j = 0; j < N; ++j) crow[j] += a * B[j * K + k];
            else
                for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
}

}  // namespace detail

// y[*, N] = x[*, K] · w[N, K]^T + b[N]
template <typename Real>
TensorT<Real> linear(TensorT<Real> x, TensorT<Real> w, TensorT<Real> b) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const auto ws = w.shape();
    if (xs.empty() || ws.size() != 2 || xs.back() != ws[1])
        throw ShapeMismatch("linear " + shape_str(xs) + " x " + shape_str(ws));
    const int64_t K = ws[1], N = ws[0];
    const int64_t R = x.numel() / K;
    if (b.numel() != N) throw ShapeMismatch("linear bias");
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(R * N));
    for (int64_t r = 0; r < R; ++r)
        for (int64_t j = 0; j < N; ++j) out[size_t(r * N + j)] = bv[size_t(j)];
    detail::mm(xv.data(), wv.data(), out.data(), R, N, K, false, true);
    auto out_shape = xs;
    out_shape.back() = N;
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iw = w.id, ib = b.id, R, N, K,
                                rx = x.requires_grad(), rw = w.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            const auto& wv = tp->node(iw).value;
            if (rx) {
                auto& gx = tp->grad_buf(grads, ix);
                detail::mm(g.data(), wv.data(), gx.data(), R, K, N, false, false);
            }
            if (rw) {
                auto& gw = tp->grad_buf(grads, iw);
                detail::mm(g.data(), xv.data(), gw.data(), N, K, R, true, false);
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (int64_t r = 0; r < R; ++r)
                    for (int64_t j = 0; j < N; ++j) gb[size_t(j)] += g[size_t(r * N + j)];
            }
        });
    return y;
}

namespace detail {

template <typename Real>
int64_t bmm_batch(const TensorT<Real>& a, const TensorT<Real>& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() < 2 || sa.size() != sb.size() ||
        !std::equal(sa.begin(), sa.end() - 2, sb.begin()))
        throw ShapeMismatch("bmm " + shape_str(sa) + " x " + shape_str(sb));
    int64_t batch = 1;
    for (size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
    return batch;
}

}  // namespace detail

// y[*, M, N] = a[*, M, K] · b[*, K, N]
template <typename Real>
TensorT<Real> bmm(TensorT<Real> a, TensorT<Real> b) {
    auto* tp = a.tape;
    const auto sa = a.shape();
    const auto sb = b.shape();
    const int64_t batch = detail::bmm_batch(a, b);
    const int64_t M = sa[sa.size() - 2], K = sa.back(), N = sb.back();
    if (sb[sb.size() - 2] != K) throw ShapeMismatch("bmm inner dims");
    const auto& av = a.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(batch * M * N), Real(0));
    for (int64_t i = 0; i < batch; ++i)
        detail::mm(av.data() + i * M * K, bv.data() + i * K * N, out.data() + i * M * N, M, N, K,
                   false, false);
    auto out_shape = sa;
    out_shape.back() = N;
    const bool rg = a.requires_grad() || b.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ia = a.id, ib = b.id, batch, M, N, K, ra = a.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& av = tp->node(ia).value;
            const auto& bv = tp->node(ib).value;
            if (ra) {
                auto& ga = tp->grad_buf(grads, ia);
                for (int64_t i = 0; i < batch; ++i)
                    detail::mm(g.data() + i * M * N, bv.data() + i * K * N, ga.data() + i * M * K,
                               M, K, N, false, true);
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (int64_t i = 0; i < batch; ++i)
                    detail::mm(av.data() + i * M * K, g.data() + i * M * N, gb.data() + i * K * N,
                               K, N, M, true, false);
            }
        });
    return y;
}

// y[*, M, N] = a[*, M, K] · b[*, N, K]^T
template <typename Real>
TensorT<Real> bmm_nt(TensorT<Real> a, TensorT<Real> b) {
    auto* tp = a.tape;
    const auto sa = a.shape();
    const auto sb = b.shape();
    const int64_t batch = detail::bmm_batch(a, b);
    const int64_t M = sa[sa.size() - 2], K = sa.back(), N = sb[sb.size() - 2];
    if (sb.back() != K) throw ShapeMismatch("bmm_nt inner dims");
    const auto& av = a.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(batch * M * N), Real(0));
    for (int64_t i = 0; i < batch; ++i)
        detail::mm(av.data() + i * M * K, bv.data() + i * N * K, out.data() + i * M * N, M, N, K,
                   false, true);
    auto out_shape = sa;
    out_shape.back() = N;
    const bool rg = a.requires_grad() || b.requires_grad();
    auto y = tp->make(std::move(out_shape), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ia = a.id, ib = b.id, batch, M, N, K, ra = a.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& av = tp->node(ia).value;
            const auto& bv = tp->node(ib).value;
            if (ra) {
                auto& ga = tp->grad_buf(grads, ia);
                for (int64_t i = 0; i < batch; ++i)
                    detail::mm(g.data() + i * M * N, bv.data() + i * N * K, ga.data() + i * M * K,
                               M, K, N, false, false);
            }
            if (rb) {
                auto& gb = tp->grad_buf(grads, ib);
                for (int64_t i = 0; i < batch; ++i)
                    detail::mm(g.data() + i * M * N, av.data() + i * M * K, gb.data() + i * N * K,
                               N, K, M, true, false);
            }
        });
    return y;
}

// x[B,Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout] -> [B,Cout,Ho,Wo]
template <typename Real>
TensorT<Real> conv2d(TensorT<Real> x, TensorT<Real> w, TensorT<Real> b, int64_t stride,
                     int64_t pad) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const auto ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
        throw ShapeMismatch("conv2d " + shape_str(xs) + " x " + shape_str(ws));
    const int64_t B = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const int64_t Cout = ws[0], kh = ws[2], kw = ws[3];
    const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1) throw SpatialUnderflow("conv2d output would be empty");
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(B * Cout * Ho * Wo));
    auto xat = [&](int64_t n, int64_t c, int64_t i, int64_t j) {
        return xv[size_t(((n * Cin + c) * H + i) * W + j)];
    };
    for (int64_t n = 0; n < B; ++n)
        for (int64_t co = 0; co < Cout; ++co)
            for (int64_t oi = 0; oi < Ho; ++oi)
                for (int64_t oj = 0; oj < Wo; ++oj) {
                    Real acc = bv[size_t(co)];
                    for (int64_t ci = 0; ci < Cin; ++ci)
                        for (int64_t u = 0; u < kh; ++u) {
                            const int64_t i = oi * stride - pad + u;
                            if (i < 0 || i >= H) continue;
                            for (int64_t v = 0; v < kw; ++v) {
                                const int64_t j = oj * stride - pad + v;
                                if (j < 0 || j >= W) continue;
                                acc += wv[size_t(((co * Cin + ci) * kh + u) * kw + v)] *
                                       xat(n, ci, i, j);
                            }
                        }
                    out[size_t(((n * Cout + co) * Ho + oi) * Wo + oj)] = acc;
                }
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    auto y = tp->make({B, Cout, Ho, Wo}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iw = w.id, ibi = b.id, B, Cin, H, W, Cout, kh, kw,
                                Ho, Wo, stride, pad, rx = x.requires_grad(),
                                rw = w.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            const auto& wv = tp->node(iw).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gw = rw ? &tp->grad_buf(grads, iw) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ibi) : nullptr;
            for (int64_t n = 0; n < B; ++n)
                for (int64_t co = 0; co < Cout; ++co)
                    for (int64_t oi = 0; oi < Ho; ++oi)
                        for (int64_t oj = 0; oj < Wo; ++oj) {
                            const Real go = g[size_t(((n * Cout + co) * Ho + oi) * Wo + oj)];
                            if (gb) (*gb)[size_t(co)] += go;
                            if (go == Real(0)) continue;
                            for (int64_t ci = 0; ci < Cin; ++ci)
                                for (int64_t u = 0; u < kh; ++u) {
                                    const int64_t i = oi * stride - pad + u;
                                    if (i < 0 || i >= H) continue;
                                    for (int64_t v = 0; v < kw; ++v) {
                                        const int64_t j = oj * stride - pad + v;
                                        if (j < 0 || j >= W) continue;
                                        const size_t xi = size_t(((n * Cin + ci) * H + i) * W + j);
                                        const size_t wi =
                                            size_t(((co * Cin + ci) * kh + u) * kw + v);
                                        if (gx) (*gx)[xi] += go * wv[wi];
                                        if (gw) (*gw)[wi] += go * xv[xi];
                                    }
                                }
                        }
        });
    return y;
}

// x[B,Cin,L] * w[Cout,Cin,k] + b[Cout] -> [B,Cout,L] with symmetric padding
template <typename Real>
TensorT<Real> conv1d_same(TensorT<Real> x, TensorT<Real> w, TensorT<Real> b) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const auto ws = w.shape();
    if (xs.size() != 3 || ws.size() != 3 || xs[1] != ws[1])
        throw ShapeMismatch("conv1d " + shape_str(xs) + " x " + shape_str(ws));
    if (ws[2] % 2 == 0) throw ConfigError("conv1d_same needs an odd kernel");
    const int64_t B = xs[0], Cin = xs[1], L = xs[2];
    const int64_t Cout = ws[0], k = ws[2], pad = (k - 1) / 2;
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(B * Cout * L));
    for (int64_t n = 0; n < B; ++n)
        for (int64_t co = 0; co < Cout; ++co)
            for (int64_t t = 0; t < L; ++t) {
                Real acc = bv[size_t(co)];
                for (int64_t ci = 0; ci < Cin; ++ci)
                    for (int64_t u = 0; u < k; ++u) {
                        const int64_t s = t - pad + u;
                        if (s < 0 || s >= L) continue;
                        acc += wv[size_t((co * Cin + ci) * k + u)] *
                               xv[size_t((n * Cin + ci) * L + s)];
                    }
                out[size_t((n * Cout + co) * L + t)] = acc;
            }
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    auto y = tp->make({B, Cout, L}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iw = w.id, ibi = b.id, B, Cin, L, Cout, k, pad,
                                rx = x.requires_grad(), rw = w.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            const auto& wv = tp->node(iw).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gw = rw ? &tp->grad_buf(grads, iw) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ibi) : nullptr;
            for (int64_t n = 0; n < B; ++n)
                for (int64_t co = 0; co < Cout; ++co)
                    for (int64_t t = 0; t < L; ++t) {
                        const Real go = g[size_t((n * Cout + co) * L + t)];
                        if (gb) (*gb)[size_t(co)] += go;
                        if (go == Real(0)) continue;
                        for (int64_t ci = 0; ci < Cin; ++ci)
                            for (int64_t u = 0; u < k; ++u) {
                                const int64_t s = t - pad + u;
                                if (s < 0 || s >= L) continue;
                                const size_t xi = size_t((n * Cin + ci) * L + s);
                                const size_t wi = size_t((co * Cin + ci) * k + u);
                                if (gx) (*gx)[xi] += go * wv[wi];
                                if (gw) (*gw)[wi] += go * xv[xi];
                            }
                    }
        });
    return y;
}

// depthwise causal conv along T: x[B,T,C], w[C,k], b[C]; kernel tap k-1 sits on t
template <typename Real>
TensorT<Real> dwconv1d_causal(TensorT<Real> x, TensorT<Real> w, TensorT<Real> b) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const auto ws = w.shape();
    if (xs.size() != 3 || ws.size() != 2 || xs[2] != ws[0])
        throw ShapeMismatch("dwconv " + shape_str(xs) + " x " + shape_str(ws));
    const int64_t B = xs[0], T = xs[1], C = xs[2], k = ws[1];
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    std::vector<Real> out(size_t(B * T * C));
    for (int64_t n = 0; n < B; ++n)
        for (int64_t t = 0; t < T; ++t)
            for (int64_t c = 0; c < C; ++c) {
                Real acc = bv[size_t(c)];
                for (int64_t u = 0; u < k; ++u) {
                    const int64_t s = t - (k - 1) + u;
                    if (s < 0) continue;
                    acc += wv[size_t(c * k + u)] * xv[size_t((n * T + s) * C + c)];
                }
                out[size_t((n * T + t) * C + c)] = acc;
            }
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    auto y = tp->make({B, T, C}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iw = w.id, ibi = b.id, B, T, C, k,
                                rx = x.requires_grad(), rw = w.requires_grad(),
                                rb = b.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            const auto& wv = tp->node(iw).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gw = rw ? &tp->grad_buf(grads, iw) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ibi) : nullptr;
            for (int64_t n = 0; n < B; ++n)
                for (int64_t t = 0; t < T; ++t)
                    for (int64_t c = 0; c < C; ++c) {
                        const Real go = g[size_t((n * T + t) * C + c)];
                        if (gb) (*gb)[size_t(c)] += go;
                        if (go == Real(0)) continue;
                        for (int64_t u = 0; u < k; ++u) {
                            const int64_t s = t - (k - 1) + u;
                            if (s < 0) continue;
                            const size_t xi = size_t((n * T + s) * C + c);
                            if (gx) (*gx)[xi] += go * wv[size_t(c * k + u)];
                            if (gw) (*gw)[size_t(c * k + u)] += go * xv[xi];
                        }
                    }
        });
    return y;
}

// x[B,C,L] -> [B,C,L/k], window max, gradient to the first maximal element
template <typename Real>
TensorT<Real> maxpool1d(TensorT<Real> x, int64_t k) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    if (xs.size() != 3) throw ShapeMismatch("maxpool1d needs rank 3");
    if (k < 1 || xs[2] < k) throw TemporalUnderflow("maxpool window exceeds length");
    const int64_t B = xs[0], C = xs[1], L = xs[2], Lo = L / k;
    const auto& xv = x.value();
    std::vector<Real> out(size_t(B * C * Lo));
    std::vector<int64_t> arg(size_t(B * C * Lo));
    for (int64_t n = 0; n < B; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t o = 0; o < Lo; ++o) {
                int64_t best = o * k;
                Real bv = xv[size_t((n * C + c) * L + best)];
                for (int64_t u = 1; u < k; ++u) {
                    const Real v = xv[size_t((n * C + c) * L + o * k + u)];
                    if (v > bv) {
                        bv = v;
                        best = o * k + u;
                    }
                }
                out[size_t((n * C + c) * Lo + o)] = bv;
                arg[size_t((n * C + c) * Lo + o)] = (n * C + c) * L + best;
            }
    const bool rg = x.requires_grad();
    auto y = tp->make({B, C, Lo}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, arg = std::move(arg)](const std::vector<Real>& g,
                                                                     auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t i = 0; i < g.size(); ++i) gx[size_t(arg[i])] += g[i];
        });
    return y;
}

// x[B,C,H,W] -> [B,C]
template <typename Real>
TensorT<Real> global_avg_pool2d(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    if (xs.size() != 4) throw ShapeMismatch("gap needs rank 4");
    const int64_t B = xs[0], C = xs[1], HW = xs[2] * xs[3];
    const auto& xv = x.value();
    std::vector<Real> out(size_t(B * C), Real(0));
    for (int64_t n = 0; n < B * C; ++n) {
        Real acc = 0;
        for (int64_t i = 0; i < HW; ++i) acc += xv[size_t(n * HW + i)];
        out[size_t(n)] = acc / Real(HW);
    }
    const bool rg = x.requires_grad();
    auto y = tp->make({B, C}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, HW](const std::vector<Real>& g, auto& grads) {
            auto& gx = tp->grad_buf(grads, ix);
            for (size_t n = 0; n < g.size(); ++n) {
                const Real go = g[n] / Real(HW);
                for (int64_t i = 0; i < HW; ++i) gx[n * size_t(HW) + size_t(i)] += go;
            }
        });
    return y;
}

// normalize the last axis; gamma/beta length = last dim
template <typename Real>
TensorT<Real> layer_norm(TensorT<Real> x, TensorT<Real> gamma, TensorT<Real> beta,
                         Real eps = Real(1e-5)) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const int64_t C = xs.back();
    const int64_t R = x.numel() / C;
    if (gamma.numel() != C || beta.numel() != C) throw ShapeMismatch("layer_norm affine");
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    std::vector<Real> out(xv.size());
    std::vector<Real> xhat(xv.size());
    std::vector<Real> inv_std(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        Real m = 0;
        for (int64_t j = 0; j < C; ++j) m += xv[size_t(r * C + j)];
        m /= Real(C);
        Real v = 0;
        for (int64_t j = 0; j < C; ++j) {
            const Real d = xv[size_t(r * C + j)] - m;
            v += d * d;
        }
        v /= Real(C);
        const Real is = Real(1) / std::sqrt(v + eps);
        inv_std[size_t(r)] = is;
        for (int64_t j = 0; j < C; ++j) {
            const Real h = (xv[size_t(r * C + j)] - m) * is;
            xhat[size_t(r * C + j)] = h;
            out[size_t(r * C + j)] = gv[size_t(j)] * h + bv[size_t(j)];
        }
    }
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    auto shp = xs;
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, ig = gamma.id, ib = beta.id, R, C,
                                xhat = std::move(xhat), inv_std = std::move(inv_std),
                                rx = x.requires_grad(), rgm = gamma.requires_grad(),
                                rb = beta.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& gv = tp->node(ig).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gg = rgm ? &tp->grad_buf(grads, ig) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ib) : nullptr;
            for (int64_t r = 0; r < R; ++r) {
                Real sum_dh = 0, sum_dh_h = 0;
                for (int64_t j = 0; j < C; ++j) {
                    const size_t i = size_t(r * C + j);
                    const Real dh = g[i] * gv[size_t(j)];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat[i];
                    if (gg) (*gg)[size_t(j)] += g[i] * xhat[i];
                    if (gb) (*gb)[size_t(j)] += g[i];
                }
                if (gx) {
                    const Real is = inv_std[size_t(r)];
                    for (int64_t j = 0; j < C; ++j) {
                        const size_t i = size_t(r * C + j);
                        const Real dh = g[i] * gv[size_t(j)];
                        (*gx)[i] += is * (dh - sum_dh / Real(C) - xhat[i] * sum_dh_h / Real(C));
                    }
                }
            }
        });
    return y;
}

// x / rms(x) * gamma over the last axis
template <typename Real>
TensorT<Real> rms_norm(TensorT<Real> x, TensorT<Real> gamma, Real eps = Real(1e-5)) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const int64_t C = xs.back();
    const int64_t R = x.numel() / C;
    if (gamma.numel() != C) throw ShapeMismatch("rms_norm affine");
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    std::vector<Real> out(xv.size());
    std::vector<Real> inv_rms(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        Real v = 0;
        for (int64_t j = 0; j < C; ++j) {
            const Real u = xv[size_t(r * C + j)];
            v += u * u;
        }
        const Real ir = Real(1) / std::sqrt(v / Real(C) + eps);
        inv_rms[size_t(r)] = ir;
        for (int64_t j = 0; j < C; ++j)
            out[size_t(r * C + j)] = xv[size_t(r * C + j)] * ir * gv[size_t(j)];
    }
    const bool rg = x.requires_grad() || gamma.requires_grad();
    auto shp = xs;
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, ig = gamma.id, R, C, inv_rms = std::move(inv_rms),
                                eps, rx = x.requires_grad(),
                                rgm = gamma.requires_grad()](const std::vector<Real>& g,
                                                            auto& grads) {
            const auto& xv = tp->node(ix).value;
            const auto& gv = tp->node(ig).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gg = rgm ? &tp->grad_buf(grads, ig) : nullptr;
            for (int64_t r = 0; r < R; ++r) {
                const Real ir = inv_rms[size_t(r)];
                Real dot = 0;
                for (int64_t j = 0; j < C; ++j) {
                    const size_t i = size_t(r * C + j);
                    const Real dyh = g[i] * gv[size_t(j)];
                    dot += dyh * xv[i];
                    if (gg) (*gg)[size_t(j)] += g[i] * xv[i] * ir;
                }
                if (gx)
                    for (int64_t j = 0; j < C; ++j) {
                        const size_t i = size_t(r * C + j);
                        const Real dyh = g[i] * gv[size_t(j)];
                        (*gx)[i] += ir * dyh - xv[i] * ir * ir * ir * dot / Real(C);
                    }
            }
        });
    return y;
}

// shared batch-norm core: x viewed as [outer, C, inner], stats per channel.
// running stats are plain storage owned by the caller and updated in train mode.
template <typename Real>
TensorT<Real> batch_norm(TensorT<Real> x, TensorT<Real> gamma, TensorT<Real> beta,
                         std::vector<Real>& running_mean, std::vector<Real>& running_var,
                         int64_t outer, int64_t C, int64_t inner, bool training,
                         Real momentum = Real(0.1), Real eps = Real(1e-5)) {
    auto* tp = x.tape;
    if (x.numel() != outer * C * inner) throw ShapeMismatch("batch_norm view");
    if (gamma.numel() != C || beta.numel() != C ||
        static_cast<int64_t>(running_mean.size()) != C ||
        static_cast<int64_t>(running_var.size()) != C)
        throw ShapeMismatch("batch_norm affine/stats");
    const int64_t cnt = outer * inner;
    if (training && cnt < 2) throw DegenerateBatch("batch_norm needs > 1 value per channel");
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();

    std::vector<Real> mean(static_cast<size_t>(C)), var(static_cast<size_t>(C));
    if (training) {
        for (int64_t c = 0; c < C; ++c) {
            Real m = 0;
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < inner; ++i) m += xv[size_t((o * C + c) * inner + i)];
            m /= Real(cnt);
            Real v = 0;
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < inner; ++i) {
                    const Real d = xv[size_t((o * C + c) * inner + i)] - m;
                    v += d * d;
                }
            v /= Real(cnt);
            mean[size_t(c)] = m;
            var[size_t(c)] = v;
            running_mean[size_t(c)] = (Real(1) - momentum) * running_mean[size_t(c)] + momentum * m;
            running_var[size_t(c)] = (Real(1) - momentum) * running_var[size_t(c)] + momentum * v;
        }
    } else {
        mean.assign(running_mean.begin(), running_mean.end());
        var.assign(running_var.begin(), running_var.end());
    }

    std::vector<Real> out(xv.size());
    std::vector<Real> xhat(xv.size());
    std::vector<Real> inv_std(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) inv_std[size_t(c)] = Real(1) / std::sqrt(var[size_t(c)] + eps);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < inner; ++i) {
                const size_t idx = size_t((o * C + c) * inner + i);
                const Real h = (xv[idx] - mean[size_t(c)]) * inv_std[size_t(c)];
                xhat[idx] = h;
                out[idx] = gv[size_t(c)] * h + bv[size_t(c)];
            }
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    auto shp = x.shape();
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, ig = gamma.id, ib = beta.id, outer, C, inner,
                                xhat = std::move(xhat), inv_std = std::move(inv_std), training,
                                rx = x.requires_grad(), rgm = gamma.requires_grad(),
                                rb = beta.requires_grad()](const std::vector<Real>& g, auto& grads) {
            const auto& gv = tp->node(ig).value;
            std::vector<Real>* gx = rx ? &tp->grad_buf(grads, ix) : nullptr;
            std::vector<Real>* gg = rgm ? &tp->grad_buf(grads, ig) : nullptr;
            std::vector<Real>* gb = rb ? &tp->grad_buf(grads, ib) : nullptr;
            const int64_t cnt = outer * inner;
            for (int64_t c = 0; c < C; ++c) {
                Real sum_g = 0, sum_gh = 0;
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t i = 0; i < inner; ++i) {
                        const size_t idx = size_t((o * C + c) * inner + i);
                        sum_g += g[idx];
                        sum_gh += g[idx] * xhat[idx];
                    }
                if (gg) (*gg)[size_t(c)] += sum_gh;
                if (gb) (*gb)[size_t(c)] += sum_g;
                if (gx) {
                    const Real k = gv[size_t(c)] * inv_std[size_t(c)];
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < inner; ++i) {
                            const size_t idx = size_t((o * C + c) * inner + i);
                            if (training)
                                (*gx)[idx] += k * (g[idx] - sum_g / Real(cnt) -
                                                   xhat[idx] * sum_gh / Real(cnt));
                            else
                                (*gx)[idx] += k * g[idx];
                        }
                }
            }
        });
    return y;
}

template <typename Real>
TensorT<Real> softmax_lastdim(TensorT<Real> x) {
    auto* tp = x.tape;
    const auto xs = x.shape();
    const int64_t C = xs.back();
    const int64_t R = x.numel() / C;
    const auto& xv = x.value();
    std::vector<Real> out(xv.size());
    for (int64_t r = 0; r < R; ++r) {
        Real mx = xv[size_t(r * C)];
        for (int64_t j = 1; j < C; ++j) mx = std::max(mx, xv[size_t(r * C + j)]);
        Real z = 0;
        for (int64_t j = 0; j < C; ++j) {
            const Real e = std::exp(xv[size_t(r * C + j)] - mx);
            out[size_t(r * C + j)] = e;
            z += e;
        }
        for (int64_t j = 0; j < C; ++j) out[size_t(r * C + j)] /= z;
    }
    const bool rg = x.requires_grad();
    auto shp = xs;
    auto y = tp->make(std::move(shp), std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = x.id, iy = y.id, R, C](const std::vector<Real>& g,
                                                                auto& grads) {
            const auto& yv = tp->node(iy).value;
            auto& gx = tp->grad_buf(grads, ix);
            for (int64_t r = 0; r < R; ++r) {
                Real dot = 0;
                for (int64_t j = 0; j < C; ++j) dot += g[size_t(r * C + j)] * yv[size_t(r * C + j)];
                for (int64_t j = 0; j < C; ++j) {
                    const size_t i = size_t(r * C + j);
                    gx[i] += yv[i] * (g[i] - dot);
                }
            }
        });
    return y;
}

// mean over rows whose target != ignore_index of -log softmax(logit)[target],
// fused with log-sum-exp for stability
template <typename Real>
TensorT<Real> cross_entropy_logits(TensorT<Real> logits, const std::vector<int>& targets,
                                   int ignore_index = -1) {
    auto* tp = logits.tape;
    const auto xs = logits.shape();
    if (xs.size() != 2 || static_cast<int64_t>(targets.size()) != xs[0])
        throw ShapeMismatch("cross_entropy logits " + shape_str(xs));
    const int64_t R = xs[0], V = xs[1];
    const auto& xv = logits.value();
    int64_t counted = 0;
    Real total = 0;
    std::vector<Real> lse(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        if (targets[size_t(r)] == ignore_index) continue;
        if (targets[size_t(r)] < 0 || targets[size_t(r)] >= V)
            throw ShapeMismatch("target id out of range");
        Real mx = xv[size_t(r * V)];
        for (int64_t j = 1; j < V; ++j) mx = std::max(mx, xv[size_t(r * V + j)]);
        Real z = 0;
        for (int64_t j = 0; j < V; ++j) z += std::exp(xv[size_t(r * V + j)] - mx);
        lse[size_t(r)] = mx + std::log(z);
        total += lse[size_t(r)] - xv[size_t(r * V + targets[size_t(r)])];
        ++counted;
    }
    if (counted == 0) throw AllPadded("cross_entropy saw only ignored targets");
    const Real loss = total / Real(counted);
    const bool rg = logits.requires_grad();
    auto y = tp->make({}, {loss}, rg);
    if (rg)
        tp->set_backward(y.id, [tp, ix = logits.id, R, V, targets, ignore_index, counted,
                                lse = std::move(lse)](const std::vector<Real>& g, auto& grads) {
            const auto& xv = tp->node(ix).value;
            auto& gx = tp->grad_buf(grads, ix);
            const Real go = g[0] / Real(counted);
            for (int64_t r = 0; r < R; ++r) {
                if (targets[size_t(r)] == ignore_index) continue;
                for (int64_t j = 0; j < V; ++j) {
                    const size_t i = size_t(r * V + j);
                    Real p = std::exp(xv[i] - lse[size_t(r)]);
                    if (j == targets[size_t(r)]) p -= Real(1);
                    gx[i] += go * p;
                }
            }
        });
    return y;
}

// table[V,D] rows gathered by ids -> [R,D]
template <typename Real>
TensorT<Real> embed(TensorT<Real> table, const std::vector<int>& ids) {
    auto* tp = table.tape;
    const auto ts = table.shape();
    if (ts.size() != 2) throw ShapeMismatch("embed table rank");
    const int64_t V = ts[0], D = ts[1];
    const int64_t R = static_cast<int64_t>(ids.size());
    const auto& tv = table.value();
    std::vector<Real> out(size_t(R * D));
    for (int64_t r = 0; r < R; ++r) {
        const int id = ids[size_t(r)];
        if (id < 0 || id >= V) throw ShapeMismatch("embed id out of range");
        for (int64_t j = 0; j < D; ++j) out[size_t(r * D + j)] = tv[size_t(id * D + j)];
    }
    const bool rg = table.requires_grad();
    auto y = tp->make({R, D}, std::move(out), rg);
    if (rg)
        tp->set_backward(y.id, [tp, it = table.id, ids, D](const std::vector<Real>& g,
                                                           auto& grads) {
            auto& gt = tp->grad_buf(grads, it);
            for (size_t r = 0; r < ids.size(); ++r)
                for (int64_t j = 0; j < D; ++j)
                    gt[size_t(ids[r] * D + j)] += g[r * size_t(D) + size_t(j)];
        });
    return y;
}

}  // namespace evslt
