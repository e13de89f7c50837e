#pragma once

// Bidirectional selective state-space block. Tokens are normalized, projected
// into a feature path x and a gate path z, each direction runs a depthwise
// causal conv, input-dependent (B, C, Delta) projection, ZOH discretization
// and a linear-time scan; the gated sum of both directions is projected back
// to the token dimension with a residual connection.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evslt/errors.hpp"
#include "evslt/init.hpp"
#include "evslt/nn_ops.hpp"
#include "evslt/ops.hpp"
#include "evslt/params.hpp"
#include "evslt/rng.hpp"
#include "evslt/ssm_ops.hpp"
#include "evslt/tensor.hpp"

namespace evslt {

enum class NormKind { LayerNorm, RmsNorm };
enum class ScanDirection { Forward, Backward };

struct MambaConfig {
    int64_t token_dim = 128;  // N
    int64_t d_inner = 256;
    int64_t state_dim = 16;  // S
    int64_t conv_width = 4;  // K
    NormKind norm = NormKind::LayerNorm;
    bool share_directions = false;  // test mode: backward reuses forward weights
};

struct MambaDirParams {
    size_t conv_w = 0, conv_b = 0;
    size_t bcd_w = 0, bcd_b = 0;
    size_t dt_bias = 0;
    size_t a_log = 0;
};

struct MambaParams {
    MambaConfig cfg;
    size_t norm_g = 0, norm_b = 0;
    size_t in_x_w = 0, in_x_b = 0;
    size_t in_z_w = 0, in_z_b = 0;
    size_t out_w = 0, out_b = 0;
    size_t d_skip = 0;
    MambaDirParams fwd, bwd;
};

template <typename Real>
struct ScanInputsT {
    TensorT<Real> x;      // [B, T, D_inner], post conv+SiLU
    TensorT<Real> delta;  // [B, T, D_inner], post softplus
    TensorT<Real> bt;     // [B, T, S]
    TensorT<Real> ct;     // [B, T, S]
};

namespace detail {

template <typename Real>
MambaDirParams init_mamba_dir(ParamStoreT<Real>& store, const MambaConfig& cfg,
                              const std::string& pre, Rng& rng) {
    const int64_t D = cfg.d_inner, S = cfg.state_dim, K = cfg.conv_width;
    MambaDirParams dp;
    dp.conv_w = store.add(pre + "conv.weight", {D, K}, init_uniform_fan_in<Real>(rng, D * K, K));
    dp.conv_b = store.add(pre + "conv.bias", {D}, init_zeros<Real>(D));
    dp.bcd_w = store.add(pre + "bcd_proj.weight", {2 * S + 1, D},
                         init_uniform_fan_in<Real>(rng, (2 * S + 1) * D, D));
    dp.bcd_b = store.add(pre + "bcd_proj.bias", {2 * S + 1}, init_zeros<Real>(2 * S + 1));
    dp.dt_bias = store.add(pre + "dt_bias", {D}, init_dt_bias<Real>(rng, D));
    dp.a_log = store.add(pre + "A_log", {D, S}, init_a_log<Real>(D, S));
    return dp;
}

}  // namespace detail

template <typename Real>
MambaParams init_mamba(ParamStoreT<Real>& store, const MambaConfig& cfg, Rng& rng) {
    if (cfg.token_dim < 1 || cfg.d_inner < 1 || cfg.state_dim < 1)
        throw ConfigError("mamba dims must be >= 1");
    if (cfg.conv_width < 1) throw ConfigError("mamba conv_width must be >= 1");
    const int64_t N = cfg.token_dim, D = cfg.d_inner;
    MambaParams mp;
    mp.cfg = cfg;
    mp.norm_g = store.add("mamba.norm.gamma", {N}, init_ones<Real>(N));
    mp.norm_b = store.add("mamba.norm.beta", {N}, init_zeros<Real>(N));
    mp.in_x_w = store.add("mamba.in_proj_x.weight", {D, N}, init_uniform_fan_in<Real>(rng, D * N, N));
    mp.in_x_b = store.add("mamba.in_proj_x.bias", {D}, init_zeros<Real>(D));
    mp.in_z_w = store.add("mamba.in_proj_z.weight", {D, N}, init_uniform_fan_in<Real>(rng, D * N, N));
    mp.in_z_b = store.add("mamba.in_proj_z.bias", {D}, init_zeros<Real>(D));
    mp.out_w = store.add("mamba.out_proj.weight", {N, D}, init_uniform_fan_in<Real>(rng, N * D, D));
    mp.out_b = store.add("mamba.out_proj.bias", {N}, init_zeros<Real>(N));
    mp.d_skip = store.add("mamba.d_skip", {D}, init_ones<Real>(D));
    mp.fwd = detail::init_mamba_dir(store, cfg, "mamba.fwd.", rng);
    mp.bwd = cfg.share_directions ? mp.fwd : detail::init_mamba_dir(store, cfg, "mamba.bwd.", rng);
    return mp;
}

// F_s -> (x, z), both [B, T, D_inner]
template <typename Real>
std::pair<TensorT<Real>, TensorT<Real>> project_xz(const BoundParamsT<Real>& bound,
                                                   const MambaParams& mp, TensorT<Real> fs) {
    auto n = mp.cfg.norm == NormKind::RmsNorm
                 ? rms_norm(fs, bound[mp.norm_g])
                 : layer_norm(fs, bound[mp.norm_g], bound[mp.norm_b]);
    auto x = linear(n, bound[mp.in_x_w], bound[mp.in_x_b]);
    auto z = linear(n, bound[mp.in_z_w], bound[mp.in_z_b]);
    return {x, z};
}

// Depthwise causal conv along T then SiLU. The backward direction reverses
// time first; the caller undoes the reversal after the scan.
template <typename Real>
TensorT<Real> causal_conv_silu(const BoundParamsT<Real>& bound, const MambaParams& mp,
                               TensorT<Real> x, ScanDirection dir) {
    const auto& dp = dir == ScanDirection::Forward ? mp.fwd : mp.bwd;
    if (dir == ScanDirection::Backward) x = reverse_time(x);
    return silu(dwconv1d_causal(x, bound[dp.conv_w], bound[dp.conv_b]));
}

// x' -> (B_t, C_t, Delta) via a single linear map; Delta_raw is a scalar per
// position, broadcast across channels, shifted by a per-channel bias, then
// pushed through softplus so Delta > 0.
template <typename Real>
ScanInputsT<Real> project_bcd(const BoundParamsT<Real>& bound, const MambaParams& mp,
                              TensorT<Real> xp, ScanDirection dir) {
    const auto& dp = dir == ScanDirection::Forward ? mp.fwd : mp.bwd;
    const int64_t S = mp.cfg.state_dim;
    auto full = linear(xp, bound[dp.bcd_w], bound[dp.bcd_b]);
    ScanInputsT<Real> si;
    si.x = xp;
    si.bt = slice_lastdim(full, 0, S);
    si.ct = slice_lastdim(full, S, 2 * S);
    auto draw = expand_lastdim(slice_lastdim(full, 2 * S, 2 * S + 1), mp.cfg.d_inner);
    si.delta = softplus(add(draw, bound[dp.dt_bias]));
    return si;
}

// (A, Delta, B_t) -> (Abar, Bbar), both [B, T, D_inner, S]
template <typename Real>
std::pair<TensorT<Real>, TensorT<Real>> discretize_zoh(TensorT<Real> A, TensorT<Real> delta,
                                                       TensorT<Real> bt) {
    return {zoh_abar(delta, A), zoh_bbar(delta, A, bt)};
}

// One direction: conv -> projections -> ZOH -> scan. Output in the original
// time order (the backward branch is re-reversed here).
template <typename Real>
TensorT<Real> mamba_direction(const BoundParamsT<Real>& bound, const MambaParams& mp,
                              TensorT<Real> x, ScanDirection dir) {
    const auto& dp = dir == ScanDirection::Forward ? mp.fwd : mp.bwd;
    auto xp = causal_conv_silu(bound, mp, x, dir);
    auto si = project_bcd(bound, mp, xp, dir);
    auto A = scale(exp_op(bound[dp.a_log]), Real(-1));
    auto [abar, bbar] = discretize_zoh(A, si.delta, si.bt);
    auto y = selective_scan_core(abar, bbar, si.ct, si.x, bound[mp.d_skip]);
    if (dir == ScanDirection::Backward) y = reverse_time(y);
    return y;
}

// F_s [B, T, N] -> y' [B, T, N]
template <typename Real>
TensorT<Real> mamba_block(const BoundParamsT<Real>& bound, const MambaParams& mp,
                          TensorT<Real> fs) {
    auto [x, z] = project_xz(bound, mp, fs);
    auto y_for = mamba_direction(bound, mp, x, ScanDirection::Forward);
    auto y_back = mamba_direction(bound, mp, x, ScanDirection::Backward);
    auto gate = silu(z);
    auto mixed = add(mul(y_for, gate), mul(y_back, gate));
    auto out = linear(mixed, bound[mp.out_w], bound[mp.out_b]);
    return add(out, fs);
}

}  // namespace evslt
