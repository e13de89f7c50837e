#pragma once

// Full pipeline composition: frames -> encoder -> bidirectional SSM ->
// aggregation -> temporal conv -> sign embedding -> transformer head.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evslt/encoder.hpp"
#include "evslt/errors.hpp"
#include "evslt/params.hpp"
#include "evslt/rng.hpp"
#include "evslt/ssm.hpp"
#include "evslt/tensor.hpp"
#include "evslt/translator.hpp"
#include "evslt/vocab.hpp"

namespace evslt {

struct ModelConfig {
    int64_t in_channels = 2;
    EncoderConfig encoder;
    MambaConfig mamba;
    HeadConfig head;
};

struct ModelParams {
    ModelConfig cfg;
    EncoderParams enc;
    MambaParams mamba;
    HeadParams head;
};

template <typename Real>
ModelParams init_model(ParamStoreT<Real>& store, const ModelConfig& cfg, Rng& rng) {
    if (cfg.mamba.token_dim != cfg.encoder.token_dim)
        throw ConfigError("mamba token_dim must match encoder token_dim");
    ModelParams mp;
    mp.cfg = cfg;
    mp.enc = init_encoder(store, cfg.encoder, cfg.in_channels, rng);
    mp.mamba = init_mamba(store, cfg.mamba, rng);
    mp.head = init_head(store, cfg.head, cfg.encoder.token_dim, rng);
    return mp;
}

// Splits full BOS..EOS sentences into decoder inputs (drop last) and labels
// (drop first), PAD-padded to a common width.
struct TeacherBatch {
    std::vector<std::vector<int>> inputs;
    std::vector<std::vector<int>> labels;
};

inline TeacherBatch make_teacher_batch(const std::vector<std::vector<int>>& sentences,
                                       int64_t vocab_size) {
    if (sentences.empty()) throw ShapeMismatch("empty sentence batch");
    size_t u = 0;
    for (const auto& s : sentences) {
        if (s.size() < 2 || s.front() != Vocabulary::kBos || s.back() != Vocabulary::kEos)
            throw DataError("sentence must be BOS..EOS framed");
        for (int id : s)
            if (id < 0 || id >= vocab_size) throw DataError("sentence id outside vocabulary");
        u = std::max(u, s.size() - 1);
    }
    TeacherBatch tb;
    for (const auto& s : sentences) {
        std::vector<int> in(s.begin(), s.end() - 1);
        std::vector<int> lab(s.begin() + 1, s.end());
        in.resize(u, Vocabulary::kPad);
        lab.resize(u, Vocabulary::kPad);
        tb.inputs.push_back(std::move(in));
        tb.labels.push_back(std::move(lab));
    }
    return tb;
}

// frames -> encoder memory (the visual half of the pipeline)
template <typename Real>
TensorT<Real> encode_visual(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                            const ModelParams& mp, TensorT<Real> frames, bool training) {
    auto tokens = encode_frames(store, bound, mp.enc, frames, training);
    auto yp = mamba_block(bound, mp.mamba, tokens);
    auto agg = aggregate(bound, mp.head, tokens, yp);
    auto tc = temporal_conv(store, bound, mp.head, agg, training);
    auto se = sign_embed(store, bound, mp.head, tc, training);
    return transformer_encode(bound, mp.head, se);
}

template <typename Real>
struct ForwardOut {
    TensorT<Real> logits;  // [B, U, V]
    TensorT<Real> loss;    // scalar
};

// frames [B, T, C, H, W] + full sentences -> teacher-forced logits and loss
template <typename Real>
ForwardOut<Real> forward_full(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                              const ModelParams& mp, TensorT<Real> frames,
                              const std::vector<std::vector<int>>& sentences, bool training) {
    const auto fs = frames.shape();
    if (fs.size() != 5) throw ShapeMismatch("forward_full expects B,T,C,H,W");
    if (fs[0] != static_cast<int64_t>(sentences.size()))
        throw ShapeMismatch("frame/sentence batch mismatch");
    auto tb = make_teacher_batch(sentences, mp.head.cfg.vocab_size);
    auto memory = encode_visual(store, bound, mp, frames, training);
    ForwardOut<Real> out;
    out.logits = decode_teacher_forced(bound, mp.head, memory, tb.inputs);
    out.loss = translation_loss(out.logits, tb.labels);
    return out;
}

// eval-mode generation for a single sample [1, T, C, H, W]
template <typename Real>
std::vector<int> generate_sample(ParamStoreT<Real>& store, const BoundParamsT<Real>& bound,
                                 const ModelParams& mp, TensorT<Real> frames,
                                 DecodeStrategy strategy = DecodeStrategy::Greedy,
                                 int beam_width = 4) {
    auto memory = encode_visual(store, bound, mp, frames, false);
    return generate(bound, mp.head, memory, mp.head.cfg.max_len, strategy, beam_width);
}

}  // namespace evslt
