#pragma once

// Residual convolutional encoder: maps binned event frames to one feature
// token per frame. Stages follow conv3x3 -> BN -> ReLU -> conv3x3 -> BN with
// an identity or 1x1-projected skip, then ReLU; the last stage is globally
// average-pooled and linearly mapped to the token dimension.

#include <cstdint>
#include <string>
#include <vector>

#include "evslt/errors.hpp"
#include "evslt/init.hpp"
#include "evslt/nn_ops.hpp"
#include "evslt/ops.hpp"
#include "evslt/params.hpp"
#include "evslt/rng.hpp"
#include "evslt/tensor.hpp"

namespace evslt {

struct EncoderStageCfg {
    int64_t out_channels = 0;
    int64_t stride = 1;
};

struct EncoderConfig {
    std::vector<EncoderStageCfg> stages{{16, 2}, {32, 2}, {64, 2}};
    int64_t token_dim = 128;
};

// Indices into the ParamStore, fixed at init time.
struct EncoderStageParams {
    int64_t in_ch = 0, out_ch = 0, stride = 1;
    size_t conv1_w = 0, conv1_b = 0, bn1_g = 0, bn1_b = 0, bn1_rm = 0, bn1_rv = 0;
    size_t conv2_w = 0, conv2_b = 0, bn2_g = 0, bn2_b = 0, bn2_rm = 0, bn2_rv = 0;
    bool has_proj = false;
    size_t proj_w = 0, proj_b = 0;
};

struct EncoderParams {
    EncoderConfig cfg;
    int64_t in_channels = 2;
    std::vector<EncoderStageParams> stages;
    size_t head_w = 0, head_b = 0;
};

template <typename Real>
EncoderParams init_encoder(ParamStoreT<Real>& store, const EncoderConfig& cfg,
                           int64_t in_channels, Rng& rng) {
    if (cfg.stages.empty()) throw ConfigError("encoder needs at least one stage");
    if (cfg.token_dim < 1) throw ConfigError("encoder token_dim must be >= 1");
    for (const auto& s : cfg.stages) {
        if (s.stride != 1 && s.stride != 2) throw ConfigError("encoder stage stride must be 1 or 2");
        if (s.out_channels < 1) throw ConfigError("encoder stage channels must be >= 1");
    }

    EncoderParams ep;
    ep.cfg = cfg;
    ep.in_channels = in_channels;
    int64_t cin = in_channels;
    for (size_t i = 0; i < cfg.stages.size(); ++i) {
        const auto& sc = cfg.stages[i];
        const int64_t cout = sc.out_channels;
        const std::string pre = "encoder.stage" + std::to_string(i) + ".";
        EncoderStageParams sp;
        sp.in_ch = cin;
        sp.out_ch = cout;
        sp.stride = sc.stride;
        sp.conv1_w = store.add(pre + "conv1.weight", {cout, cin, 3, 3},
                               init_uniform_fan_in<Real>(rng, cout * cin * 9, cin * 9));
        sp.conv1_b = store.add(pre + "conv1.bias", {cout}, init_zeros<Real>(cout));
        sp.bn1_g = store.add(pre + "bn1.gamma", {cout}, init_ones<Real>(cout));
        sp.bn1_b = store.add(pre + "bn1.beta", {cout}, init_zeros<Real>(cout));
        sp.bn1_rm = store.add(pre + "bn1.running_mean", {cout}, init_zeros<Real>(cout), false);
        sp.bn1_rv = store.add(pre + "bn1.running_var", {cout}, init_ones<Real>(cout), false);
        sp.conv2_w = store.add(pre + "conv2.weight", {cout, cout, 3, 3},
                               init_uniform_fan_in<Real>(rng, cout * cout * 9, cout * 9));
        sp.conv2_b = store.add(pre + "conv2.bias", {cout}, init_zeros<Real>(cout));
        sp.bn2_g = store.add(pre + "bn2.gamma", {cout}, init_ones<Real>(cout));
        sp.bn2_b = store.add(pre + "bn2.beta", {cout}, init_zeros<Real>(cout));
        sp.bn2_rm = store.add(pre + "bn2.running_mean", {cout}, init_zeros<Real>(cout), false);
        sp.bn2_rv = store.add(pre + "bn2.running_var", {cout}, init_ones<Real>(cout), false);
        sp.has_proj = (sc.stride != 1 || cin != cout);
        if (sp.has_proj) {
            sp.proj_w = store.add(pre + "proj.weight", {cout, cin, 1, 1},
                                  init_uniform_fan_in<Real>(rng, cout * cin, cin));
            sp.proj_b = store.add(pre + "proj.bias", {cout}, init_zeros<Real>(cout));
        }
        ep.stages.push_back(sp);
        cin = cout;
    }
    ep.head_w = store.add("encoder.head.weight", {cfg.token_dim, cin},
                          init_uniform_fan_in<Real>(rng, cfg.token_dim * cin, cin));
    ep.head_b = store.add("encoder.head.bias", {cfg.token_dim}, init_zeros<Real>(cfg.token_dim));
    return ep;
}

// frames: [B, T, C, H, W] -> tokens [B, T, N]. Mutates running stats when training.
template <typename Real>
TensorT<Real> encode_frames(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                            const EncoderParams& ep, TensorT<Real> frames, bool training) {
    const auto fs = frames.shape();
    if (fs.size() != 5) throw ShapeMismatch("encode_frames expects B,T,C,H,W, got " + shape_str(fs));
    const int64_t B = fs[0], T = fs[1], C = fs[2], H = fs[3], W = fs[4];
    if (C != ep.in_channels) throw ShapeMismatch("encoder channel count");

    int64_t down = 0;
    for (const auto& s : ep.stages)
        if (s.stride == 2) ++down;
    const int64_t need = int64_t(1) << down;
    if (H < need || W < need)
        throw SpatialUnderflow("frames " + std::to_string(H) + "x" + std::to_string(W) +
                               " too small for " + std::to_string(down) + " stride-2 stages");

    const int64_t BT = B * T;
    auto x = reshape(frames, {BT, C, H, W});
    for (const auto& sp : ep.stages) {
        auto y = conv2d(x, bound[sp.conv1_w], bound[sp.conv1_b], sp.stride, 1);
        {
            const auto ys = y.shape();
            y = batch_norm(y, bound[sp.bn1_g], bound[sp.bn1_b], store.at(sp.bn1_rm).value,
                           store.at(sp.bn1_rv).value, BT, sp.out_ch, ys[2] * ys[3], training);
        }
        y = relu(y);
        y = conv2d(y, bound[sp.conv2_w], bound[sp.conv2_b], 1, 1);
        {
            const auto ys = y.shape();
            y = batch_norm(y, bound[sp.bn2_g], bound[sp.bn2_b], store.at(sp.bn2_rm).value,
                           store.at(sp.bn2_rv).value, BT, sp.out_ch, ys[2] * ys[3], training);
        }
        auto skip = sp.has_proj ? conv2d(x, bound[sp.proj_w], bound[sp.proj_b], sp.stride, 0) : x;
        x = relu(add(y, skip));
    }
    auto pooled = global_avg_pool2d(x);
    auto tok = linear(pooled, bound[ep.head_w], bound[ep.head_b]);
    return reshape(tok, {B, T, ep.cfg.token_dim});
}

}  // namespace evslt
