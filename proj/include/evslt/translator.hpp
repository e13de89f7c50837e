#pragma once

// Language head: backbone aggregation, temporal convolution, sign embedding,
// a small pre-norm transformer encoder-decoder over the vocabulary, the
// padded cross-entropy objective, and greedy/beam generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "evslt/errors.hpp"
#include "evslt/init.hpp"
#include "evslt/nn_ops.hpp"
#include "evslt/ops.hpp"
#include "evslt/params.hpp"
#include "evslt/rng.hpp"
#include "evslt/tensor.hpp"
#include "evslt/vocab.hpp"

namespace evslt {

enum class AggMode { Concatenate, Add, Multiply, Series };

inline AggMode parse_agg_mode(const std::string& s) {
    if (s == "concatenate") return AggMode::Concatenate;
    if (s == "add") return AggMode::Add;
    if (s == "multiply") return AggMode::Multiply;
    if (s == "series") return AggMode::Series;
    throw UnknownMode("aggregation '" + s + "'");
}

inline std::string agg_mode_name(AggMode m) {
    switch (m) {
        case AggMode::Concatenate: return "concatenate";
        case AggMode::Add: return "add";
        case AggMode::Multiply: return "multiply";
        case AggMode::Series: return "series";
    }
    throw UnknownMode("aggregation");
}

struct TemporalStageCfg {
    int64_t kernel = 5;
    int64_t pool = 2;
};

struct HeadConfig {
    AggMode aggregation = AggMode::Concatenate;
    std::vector<TemporalStageCfg> plan{{5, 2}, {5, 2}};
    int64_t d_model = 128;
    int64_t enc_layers = 3;
    int64_t dec_layers = 3;
    int64_t heads = 4;
    int64_t ff_dim = 0;  // 0 -> 4 * d_model
    int64_t max_len = 32;
    int64_t vocab_size = 0;
};

struct AttnParams {
    size_t q_w = 0, q_b = 0, k_w = 0, k_b = 0, v_w = 0, v_b = 0, o_w = 0, o_b = 0;
};

struct EncLayerParams {
    size_t ln1_g = 0, ln1_b = 0, ln2_g = 0, ln2_b = 0;
    AttnParams attn;
    size_t ff1_w = 0, ff1_b = 0, ff2_w = 0, ff2_b = 0;
};

struct DecLayerParams {
    size_t ln1_g = 0, ln1_b = 0, ln2_g = 0, ln2_b = 0, ln3_g = 0, ln3_b = 0;
    AttnParams self_attn, cross_attn;
    size_t ff1_w = 0, ff1_b = 0, ff2_w = 0, ff2_b = 0;
};

struct TemporalStageParams {
    int64_t kernel = 0, pool = 1;
    size_t conv_w = 0, conv_b = 0, bn_g = 0, bn_b = 0, bn_rm = 0, bn_rv = 0;
};

struct HeadParams {
    HeadConfig cfg;
    int64_t token_dim = 0;
    size_t agg_w = 0, agg_b = 0;  // concatenate mode only
    std::vector<TemporalStageParams> tstages;
    size_t se_w = 0, se_b = 0, se_bn_g = 0, se_bn_b = 0, se_bn_rm = 0, se_bn_rv = 0;
    std::vector<EncLayerParams> enc;
    std::vector<DecLayerParams> dec;
    size_t enc_norm_g = 0, enc_norm_b = 0, dec_norm_g = 0, dec_norm_b = 0;
    size_t tok_embed = 0, lm_w = 0, lm_b = 0;
};

namespace detail {

template <typename Real>
AttnParams init_attn(ParamStoreT<Real>& store, const std::string& pre, int64_t d, Rng& rng) {
    AttnParams ap;
    ap.q_w = store.add(pre + "q.weight", {d, d}, init_uniform_fan_in<Real>(rng, d * d, d));
    ap.q_b = store.add(pre + "q.bias", {d}, init_zeros<Real>(d));
    ap.k_w = store.add(pre + "k.weight", {d, d}, init_uniform_fan_in<Real>(rng, d * d, d));
    ap.k_b = store.add(pre + "k.bias", {d}, init_zeros<Real>(d));
    ap.v_w = store.add(pre + "v.weight", {d, d}, init_uniform_fan_in<Real>(rng, d * d, d));
    ap.v_b = store.add(pre + "v.bias", {d}, init_zeros<Real>(d));
    ap.o_w = store.add(pre + "o.weight", {d, d}, init_uniform_fan_in<Real>(rng, d * d, d));
    ap.o_b = store.add(pre + "o.bias", {d}, init_zeros<Real>(d));
    return ap;
}

template <typename Real>
void init_ln(ParamStoreT<Real>& store, const std::string& pre, int64_t d, size_t& g, size_t& b) {
    g = store.add(pre + ".gamma", {d}, init_ones<Real>(d));
    b = store.add(pre + ".beta", {d}, init_zeros<Real>(d));
}

}  // namespace detail

template <typename Real>
HeadParams init_head(ParamStoreT<Real>& store, const HeadConfig& cfg, int64_t token_dim,
                     Rng& rng) {
    if (token_dim < 1) throw ConfigError("head token_dim must be >= 1");
    if (cfg.d_model < 1) throw ConfigError("d_model must be >= 1");
    if (cfg.heads < 1 || cfg.d_model % cfg.heads != 0)
        throw ConfigError("d_model must be divisible by heads");
    if (cfg.enc_layers < 1 || cfg.dec_layers < 1) throw ConfigError("layers must be >= 1");
    if (cfg.max_len < 2) throw ConfigError("max_len must be >= 2");
    if (cfg.vocab_size < Vocabulary::kReserved + 1)
        throw ConfigError("vocab_size must exceed the reserved ids");
    for (const auto& st : cfg.plan) {
        if (st.kernel < 1 || st.kernel % 2 == 0)
            throw ConfigError("temporal kernel must be odd and >= 1");
        if (st.pool != 1 && st.pool != 2) throw ConfigError("temporal pool must be 1 or 2");
    }

    HeadParams hp;
    hp.cfg = cfg;
    if (hp.cfg.ff_dim == 0) hp.cfg.ff_dim = 4 * cfg.d_model;
    hp.token_dim = token_dim;
    const int64_t N = token_dim, d = cfg.d_model, ff = hp.cfg.ff_dim, V = cfg.vocab_size;

    if (cfg.aggregation == AggMode::Concatenate) {
        hp.agg_w = store.add("head.agg_proj.weight", {N, 2 * N},
                             init_uniform_fan_in<Real>(rng, N * 2 * N, 2 * N));
        hp.agg_b = store.add("head.agg_proj.bias", {N}, init_zeros<Real>(N));
    }
    for (size_t i = 0; i < cfg.plan.size(); ++i) {
        const std::string si = std::to_string(i);
        TemporalStageParams ts;
        ts.kernel = cfg.plan[i].kernel;
        ts.pool = cfg.plan[i].pool;
        ts.conv_w = store.add("head.tconv" + si + ".weight", {N, N, ts.kernel},
                              init_uniform_fan_in<Real>(rng, N * N * ts.kernel, N * ts.kernel));
        ts.conv_b = store.add("head.tconv" + si + ".bias", {N}, init_zeros<Real>(N));
        ts.bn_g = store.add("head.tbn" + si + ".gamma", {N}, init_ones<Real>(N));
        ts.bn_b = store.add("head.tbn" + si + ".beta", {N}, init_zeros<Real>(N));
        ts.bn_rm = store.add("head.tbn" + si + ".running_mean", {N}, init_zeros<Real>(N), false);
        ts.bn_rv = store.add("head.tbn" + si + ".running_var", {N}, init_ones<Real>(N), false);
        hp.tstages.push_back(ts);
    }
    hp.se_w = store.add("head.sign_embed.weight", {d, N}, init_uniform_fan_in<Real>(rng, d * N, N));
    hp.se_b = store.add("head.sign_embed.bias", {d}, init_zeros<Real>(d));
    hp.se_bn_g = store.add("head.sign_bn.gamma", {d}, init_ones<Real>(d));
    hp.se_bn_b = store.add("head.sign_bn.beta", {d}, init_zeros<Real>(d));
    hp.se_bn_rm = store.add("head.sign_bn.running_mean", {d}, init_zeros<Real>(d), false);
    hp.se_bn_rv = store.add("head.sign_bn.running_var", {d}, init_ones<Real>(d), false);

    for (int64_t l = 0; l < cfg.enc_layers; ++l) {
        const std::string pre = "head.enc" + std::to_string(l) + ".";
        EncLayerParams ep;
        detail::init_ln(store, pre + "ln1", d, ep.ln1_g, ep.ln1_b);
        detail::init_ln(store, pre + "ln2", d, ep.ln2_g, ep.ln2_b);
        ep.attn = detail::init_attn(store, pre + "attn.", d, rng);
        ep.ff1_w = store.add(pre + "ff1.weight", {ff, d}, init_uniform_fan_in<Real>(rng, ff * d, d));
        ep.ff1_b = store.add(pre + "ff1.bias", {ff}, init_zeros<Real>(ff));
        ep.ff2_w = store.add(pre + "ff2.weight", {d, ff}, init_uniform_fan_in<Real>(rng, d * ff, ff));
        ep.ff2_b = store.add(pre + "ff2.bias", {d}, init_zeros<Real>(d));
        hp.enc.push_back(ep);
    }
    detail::init_ln(store, "head.enc_norm", d, hp.enc_norm_g, hp.enc_norm_b);

    for (int64_t l = 0; l < cfg.dec_layers; ++l) {
        const std::string pre = "head.dec" + std::to_string(l) + ".";
        DecLayerParams dp;
        detail::init_ln(store, pre + "ln1", d, dp.ln1_g, dp.ln1_b);
        detail::init_ln(store, pre + "ln2", d, dp.ln2_g, dp.ln2_b);
        detail::init_ln(store, pre + "ln3", d, dp.ln3_g, dp.ln3_b);
        dp.self_attn = detail::init_attn(store, pre + "self.", d, rng);
        dp.cross_attn = detail::init_attn(store, pre + "cross.", d, rng);
        dp.ff1_w = store.add(pre + "ff1.weight", {ff, d}, init_uniform_fan_in<Real>(rng, ff * d, d));
        dp.ff1_b = store.add(pre + "ff1.bias", {ff}, init_zeros<Real>(ff));
        dp.ff2_w = store.add(pre + "ff2.weight", {d, ff}, init_uniform_fan_in<Real>(rng, d * ff, ff));
        dp.ff2_b = store.add(pre + "ff2.bias", {d}, init_zeros<Real>(d));
        hp.dec.push_back(dp);
    }
    detail::init_ln(store, "head.dec_norm", d, hp.dec_norm_g, hp.dec_norm_b);

    hp.tok_embed = store.add("head.tok_embed.weight", {V, d},
                             init_uniform_fan_in<Real>(rng, V * d, d));
    hp.lm_w = store.add("head.lm_head.weight", {V, d}, init_uniform_fan_in<Real>(rng, V * d, d));
    hp.lm_b = store.add("head.lm_head.bias", {V}, init_zeros<Real>(V));
    return hp;
}

// F_s and y' are both [B, T, N]; see HeadConfig::aggregation.
template <typename Real>
TensorT<Real> aggregate(const BoundParamsT<Real>& bound, const HeadParams& hp, TensorT<Real> fs,
                        TensorT<Real> yp) {
    if (fs.shape() != yp.shape()) throw ShapeMismatch("aggregate inputs");
    switch (hp.cfg.aggregation) {
        case AggMode::Series: return yp;
        case AggMode::Add: return add(fs, yp);
        case AggMode::Multiply: return mul(fs, yp);
        case AggMode::Concatenate:
            return linear(concat_lastdim(fs, yp), bound[hp.agg_w], bound[hp.agg_b]);
    }
    throw UnknownMode("aggregation");
}

// [B, T, N] -> [B, T', N]; each stage is conv1d (same padding) -> BN -> ReLU
// -> max-pool. Mutates running stats when training.
template <typename Real>
TensorT<Real> temporal_conv(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                            const HeadParams& hp, TensorT<Real> x, bool training) {
    const auto xs = x.shape();
    if (xs.size() != 3) throw ShapeMismatch("temporal_conv expects B,T,N");
    int64_t pool_prod = 1;
    for (const auto& ts : hp.tstages) pool_prod *= ts.pool;
    if (xs[1] < pool_prod)
        throw TemporalUnderflow("T=" + std::to_string(xs[1]) + " shorter than pool product " +
                                std::to_string(pool_prod));
    auto h = permute(x, {0, 2, 1});  // channels-first for conv1d
    for (const auto& ts : hp.tstages) {
        h = conv1d_same(h, bound[ts.conv_w], bound[ts.conv_b]);
        const auto hs = h.shape();
        h = batch_norm(h, bound[ts.bn_g], bound[ts.bn_b], store.at(ts.bn_rm).value,
                       store.at(ts.bn_rv).value, hs[0], hs[1], hs[2], training);
        h = relu(h);
        if (ts.pool > 1) h = maxpool1d(h, ts.pool);
    }
    return permute(h, {0, 2, 1});
}

// [B, T', N] -> [B, T', d_model]; linear -> BN -> ReLU
template <typename Real>
TensorT<Real> sign_embed(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                         const HeadParams& hp, TensorT<Real> x, bool training) {
    auto y = linear(x, bound[hp.se_w], bound[hp.se_b]);
    const auto ys = y.shape();
    y = batch_norm(y, bound[hp.se_bn_g], bound[hp.se_bn_b], store.at(hp.se_bn_rm).value,
                   store.at(hp.se_bn_rv).value, ys[0] * ys[1], ys[2], 1, training);
    return relu(y);
}

namespace detail {

template <typename Real>
TensorT<Real> sinusoid_positions(TapeT<Real>& tape, int64_t L, int64_t d) {
    std::vector<Real> pe(static_cast<size_t>(L * d));
    for (int64_t p = 0; p < L; ++p)
        for (int64_t i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -double(i) / double(d));
            pe[size_t(p * d + i)] = Real(std::sin(double(p) * freq));
            if (i + 1 < d) pe[size_t(p * d + i + 1)] = Real(std::cos(double(p) * freq));
        }
    return tape.constant({L, d}, std::move(pe));
}

template <typename Real>
TensorT<Real> causal_mask(TapeT<Real>& tape, int64_t U) {
    std::vector<Real> m(static_cast<size_t>(U * U), Real(0));
    for (int64_t i = 0; i < U; ++i)
        for (int64_t j = i + 1; j < U; ++j) m[size_t(i * U + j)] = Real(-1e9);
    return tape.constant({U, U}, std::move(m));
}

template <typename Real>
TensorT<Real> split_heads(TensorT<Real> x, int64_t B, int64_t L, int64_t h, int64_t dh) {
    return reshape(permute(reshape(x, {B, L, h, dh}), {0, 2, 1, 3}), {B * h, L, dh});
}

template <typename Real>
TensorT<Real> merge_heads(TensorT<Real> x, int64_t B, int64_t L, int64_t h, int64_t dh) {
    return reshape(permute(reshape(x, {B, h, L, dh}), {0, 2, 1, 3}), {B, L, h * dh});
}

// q_in [B, Lq, d] attends over kv_in [B, Lk, d]; mask (optional) is an
// additive [Lq, Lk] constant applied to the scores.
template <typename Real>
TensorT<Real> mha(const BoundParamsT<Real>& bound, const AttnParams& ap, TensorT<Real> q_in,
                  TensorT<Real> kv_in, int64_t heads,
                  std::type_identity_t<const TensorT<Real>*> mask) {
    const auto qs = q_in.shape();
    const int64_t B = qs[0], Lq = qs[1], d = qs[2];
    const int64_t Lk = kv_in.shape()[1];
    const int64_t dh = d / heads;
    auto q = split_heads(linear(q_in, bound[ap.q_w], bound[ap.q_b]), B, Lq, heads, dh);
    auto k = split_heads(linear(kv_in, bound[ap.k_w], bound[ap.k_b]), B, Lk, heads, dh);
    auto v = split_heads(linear(kv_in, bound[ap.v_w], bound[ap.v_b]), B, Lk, heads, dh);
    auto scores = scale(bmm_nt(q, k), Real(1.0 / std::sqrt(double(dh))));
    if (mask != nullptr) scores = add(scores, *mask);
    auto ctx = bmm(softmax_lastdim(scores), v);
    return linear(merge_heads(ctx, B, Lq, heads, dh), bound[ap.o_w], bound[ap.o_b]);
}

template <typename Real>
TensorT<Real> ffn(const BoundParamsT<Real>& bound, size_t w1, size_t b1, size_t w2, size_t b2,
                  TensorT<Real> x) {
    return linear(relu(linear(x, bound[w1], bound[b1])), bound[w2], bound[b2]);
}

}  // namespace detail

// visual [B, T', d_model] -> encoder memory of the same shape
template <typename Real>
TensorT<Real> transformer_encode(const BoundParamsT<Real>& bound, const HeadParams& hp,
                                 TensorT<Real> visual) {
    auto* tape = visual.tape;
    const auto vs = visual.shape();
    auto x = add(visual, detail::sinusoid_positions(*tape, vs[1], vs[2]));
    for (const auto& lp : hp.enc) {
        auto n1 = layer_norm(x, bound[lp.ln1_g], bound[lp.ln1_b]);
        x = add(x, detail::mha(bound, lp.attn, n1, n1, hp.cfg.heads, nullptr));
        auto n2 = layer_norm(x, bound[lp.ln2_g], bound[lp.ln2_b]);
        x = add(x, detail::ffn(bound, lp.ff1_w, lp.ff1_b, lp.ff2_w, lp.ff2_b, n2));
    }
    return layer_norm(x, bound[hp.enc_norm_g], bound[hp.enc_norm_b]);
}

// memory [B, T', d_model], dec_inputs: B rows of U ids each (BOS-led,
// PAD-padded) -> logits [B, U, V]
template <typename Real>
TensorT<Real> decode_teacher_forced(const BoundParamsT<Real>& bound, const HeadParams& hp,
                                    TensorT<Real> memory,
                                    const std::vector<std::vector<int>>& dec_inputs) {
    auto* tape = memory.tape;
    const int64_t B = static_cast<int64_t>(dec_inputs.size());
    if (B == 0) throw ShapeMismatch("decode needs at least one row");
    if (memory.shape()[0] != B) throw ShapeMismatch("decode batch mismatch");
    const int64_t U = static_cast<int64_t>(dec_inputs[0].size());
    if (U < 1) throw ShapeMismatch("decode needs at least one position");
    std::vector<int> flat;
    flat.reserve(static_cast<size_t>(B * U));
    for (const auto& row : dec_inputs) {
        if (static_cast<int64_t>(row.size()) != U) throw ShapeMismatch("ragged decoder inputs");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    const int64_t d = hp.cfg.d_model;
    auto x = reshape(embed(bound[hp.tok_embed], flat), {B, U, d});
    x = add(x, detail::sinusoid_positions(*tape, U, d));
    auto mask = detail::causal_mask(*tape, U);
    for (const auto& lp : hp.dec) {
        auto n1 = layer_norm(x, bound[lp.ln1_g], bound[lp.ln1_b]);
        x = add(x, detail::mha(bound, lp.self_attn, n1, n1, hp.cfg.heads, &mask));
        auto n2 = layer_norm(x, bound[lp.ln2_g], bound[lp.ln2_b]);
        x = add(x, detail::mha(bound, lp.cross_attn, n2, memory, hp.cfg.heads, nullptr));
        auto n3 = layer_norm(x, bound[lp.ln3_g], bound[lp.ln3_b]);
        x = add(x, detail::ffn(bound, lp.ff1_w, lp.ff1_b, lp.ff2_w, lp.ff2_b, n3));
    }
    x = layer_norm(x, bound[hp.dec_norm_g], bound[hp.dec_norm_b]);
    return linear(x, bound[hp.lm_w], bound[hp.lm_b]);
}

// mean cross-entropy over non-PAD label positions
template <typename Real>
TensorT<Real> translation_loss(TensorT<Real> logits, const std::vector<std::vector<int>>& labels) {
    const auto ls = logits.shape();
    if (ls.size() != 3) throw ShapeMismatch("translation_loss expects B,U,V");
    std::vector<int> flat;
    flat.reserve(static_cast<size_t>(ls[0] * ls[1]));
    for (const auto& row : labels) {
        if (static_cast<int64_t>(row.size()) != ls[1]) throw ShapeMismatch("ragged labels");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    if (static_cast<int64_t>(labels.size()) != ls[0]) throw ShapeMismatch("label batch mismatch");
    return cross_entropy_logits(reshape(logits, {ls[0] * ls[1], ls[2]}), flat, Vocabulary::kPad);
}

enum class DecodeStrategy { Greedy, Beam };

namespace detail {

// log-softmax of the final position's logits, with PAD and BOS masked out so
// generated sentences stay well-formed
template <typename Real>
std::vector<double> next_logprobs(const BoundParamsT<Real>& bound, const HeadParams& hp,
                                  TensorT<Real> memory, const std::vector<int>& ids) {
    auto logits = decode_teacher_forced(bound, hp, memory, {ids});
    const auto& lv = logits.value();
    const int64_t V = hp.cfg.vocab_size;
    const size_t off = static_cast<size_t>((static_cast<int64_t>(ids.size()) - 1) * V);
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t v = 0; v < V; ++v) mx = std::max(mx, double(lv[off + size_t(v)]));
    double lse = 0;
    for (int64_t v = 0; v < V; ++v) lse += std::exp(double(lv[off + size_t(v)]) - mx);
    lse = mx + std::log(lse);
    std::vector<double> lp(static_cast<size_t>(V));
    for (int64_t v = 0; v < V; ++v) lp[size_t(v)] = double(lv[off + size_t(v)]) - lse;
    lp[Vocabulary::kPad] = -std::numeric_limits<double>::infinity();
    lp[Vocabulary::kBos] = -std::numeric_limits<double>::infinity();
    return lp;
}

inline double length_penalty(int64_t gen_len) {
    return std::pow(5.0 + double(gen_len), 0.6) / std::pow(6.0, 0.6);
}

}  // namespace detail

// memory must be a single-sample [1, T', d_model] slice; returns a complete
// BOS..EOS sentence of total length <= max_len (EOS forced at truncation)
template <typename Real>
std::vector<int> generate(const BoundParamsT<Real>& bound, const HeadParams& hp,
                          TensorT<Real> memory, int64_t max_len, DecodeStrategy strategy,
                          int beam_width = 4) {
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (memory.shape()[0] != 1) throw ShapeMismatch("generate expects a single sample");

    if (strategy == DecodeStrategy::Greedy) {
        std::vector<int> ids{Vocabulary::kBos};
        while (static_cast<int64_t>(ids.size()) < max_len - 1) {
            const auto lp = detail::next_logprobs(bound, hp, memory, ids);
            int best = 0;
            for (size_t v = 1; v < lp.size(); ++v)
                if (lp[v] > lp[size_t(best)]) best = static_cast<int>(v);
            ids.push_back(best);
            if (best == Vocabulary::kEos) break;
        }
        if (ids.back() != Vocabulary::kEos) ids.push_back(Vocabulary::kEos);
        return ids;
    }

    if (beam_width < 1) throw ConfigError("beam width must be >= 1");
    struct Hyp {
        std::vector<int> ids;
        double logp = 0;
        bool done = false;
    };
    auto norm_score = [](const Hyp& h) {
        return h.logp / detail::length_penalty(static_cast<int64_t>(h.ids.size()) - 1);
    };
    std::vector<Hyp> beams{{{Vocabulary::kBos}, 0.0, false}};
    for (;;) {
        bool any_open = false;
        for (const auto& h : beams)
            if (!h.done) any_open = true;
        if (!any_open) break;
        std::vector<Hyp> cands;
        for (const auto& h : beams) {
            if (h.done) {
                cands.push_back(h);
                continue;
            }
            if (static_cast<int64_t>(h.ids.size()) >= max_len - 1) {
                Hyp t = h;
                t.ids.push_back(Vocabulary::kEos);
                t.done = true;
                cands.push_back(std::move(t));
                continue;
            }
            const auto lp = detail::next_logprobs(bound, hp, memory, h.ids);
            for (size_t v = 0; v < lp.size(); ++v) {
                if (!std::isfinite(lp[v])) continue;
                Hyp t = h;
                t.ids.push_back(static_cast<int>(v));
                t.logp += lp[v];
                t.done = (static_cast<int>(v) == Vocabulary::kEos);
                cands.push_back(std::move(t));
            }
        }
        std::stable_sort(cands.begin(), cands.end(),
                         [&](const Hyp& a, const Hyp& b) { return norm_score(a) > norm_score(b); });
        if (static_cast<int>(cands.size()) > beam_width) cands.resize(size_t(beam_width));
        beams = std::move(cands);
    }
    return beams.front().ids;
}

}  // namespace evslt
