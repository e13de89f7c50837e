#include <doctest.h>

#include <cstdint>
#include <vector>

#include "evslt/encoder.hpp"
#include "evslt/rng.hpp"
#include "support/module_gradcheck.hpp"

using namespace evslt;

namespace {

std::vector<float> random_frames(Rng& rng, int64_t n) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = float(rng.uniform(0.0, 1.0));
    return v;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("default three-stage encoder maps 2x8x2x64x64 to 2x8x128") {
    ParamStore store;
    Rng rng(11);
    EncoderConfig cfg;  // 16/32/64 stride-2 stages, token_dim 128
    auto ep = init_encoder(store, cfg, 2, rng);
    Tape tape;
    auto bound = bind_params(tape, store);
    Rng frng(5);
    auto frames = tape.constant({2, 8, 2, 64, 64}, random_frames(frng, 2 * 8 * 2 * 64 * 64));
    auto tokens = encode_frames(store, bound, ep, frames, false);
    CHECK(tokens.shape() == std::vector<int64_t>{2, 8, 128});
    for (float v : tokens.value()) CHECK(std::isfinite(v));
}

TEST_CASE("all-zero input with zero biases produces all-zero tokens") {
    ParamStore store;
    Rng rng(3);
    EncoderConfig cfg;
    cfg.stages = {{4, 2}, {8, 2}};
    cfg.token_dim = 6;
    auto ep = init_encoder(store, cfg, 2, rng);
    for (bool training : {false, true}) {
        CAPTURE(training);
        Tape tape;
        auto bound = bind_params(tape, store);
        auto frames = tape.constant({1, 2, 2, 8, 8}, std::vector<float>(2 * 2 * 8 * 8, 0.0f));
        auto tokens = encode_frames(store, bound, ep, frames, training);
        for (float v : tokens.value()) CHECK(v == 0.0f);
    }
}

TEST_CASE("identity-configured single stage pools [[1,2],[3,4]] to 2.5") {
    ParamStore store;
    Rng rng(1);
    EncoderConfig cfg;
    cfg.stages = {{1, 1}};
    cfg.token_dim = 1;
    auto ep = init_encoder(store, cfg, 1, rng);
    // conv1 = centered identity, conv2 = zero, so the stage reduces to the
    // skip path; head = identity map
    auto& w1 = store.find("encoder.stage0.conv1.weight")->value;
    std::fill(w1.begin(), w1.end(), 0.0f);
    w1[4] = 1.0f;
    auto& w2 = store.find("encoder.stage0.conv2.weight")->value;
    std::fill(w2.begin(), w2.end(), 0.0f);
    store.find("encoder.head.weight")->value = {1.0f};

    Tape tape;
    auto bound = bind_params(tape, store);
    auto frames = tape.constant({1, 1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    auto tokens = encode_frames(store, bound, ep, frames, false);
    CHECK(tokens.value()[0] == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("frames smaller than the stride plan raise SpatialUnderflow") {
    ParamStore store;
    Rng rng(2);
    EncoderConfig cfg;  // three stride-2 stages need H, W >= 8
    auto ep = init_encoder(store, cfg, 2, rng);
    Tape tape;
    auto bound = bind_params(tape, store);
    auto frames = tape.constant({1, 1, 2, 4, 4}, std::vector<float>(2 * 4 * 4, 0.5f));
    CHECK_THROWS_AS(encode_frames(store, bound, ep, frames, false), SpatialUnderflow);
}

TEST_CASE("encoder config validation") {
    ParamStore store;
    Rng rng(2);
    EncoderConfig bad;
    bad.stages.clear();
    CHECK_THROWS_AS(init_encoder(store, bad, 2, rng), ConfigError);
    EncoderConfig bad2;
    bad2.stages = {{8, 3}};
    CHECK_THROWS_AS(init_encoder(store, bad2, 2, rng), ConfigError);
    EncoderConfig bad3;
    bad3.token_dim = 0;
    CHECK_THROWS_AS(init_encoder(store, bad3, 2, rng), ConfigError);
}

TEST_CASE("permuting samples permutes eval-mode outputs identically") {
    ParamStore store;
    Rng rng(21);
    EncoderConfig cfg;
    cfg.stages = {{4, 2}, {8, 2}};
    cfg.token_dim = 5;
    auto ep = init_encoder(store, cfg, 2, rng);

    const int64_t B = 3, T = 2, C = 2, H = 8, W = 8;
    const int64_t per = T * C * H * W;
    Rng frng(77);
    auto base = random_frames(frng, B * per);
    const std::vector<int64_t> perm{2, 0, 1};
    std::vector<float> permuted(base.size());
    for (int64_t b = 0; b < B; ++b)
        std::copy(base.begin() + perm[size_t(b)] * per, base.begin() + (perm[size_t(b)] + 1) * per,
                  permuted.begin() + b * per);

    Tape tape;
    auto bound = bind_params(tape, store);
    auto out1 = encode_frames(store, bound, ep, tape.constant({B, T, C, H, W}, base), false);
    auto out2 = encode_frames(store, bound, ep, tape.constant({B, T, C, H, W}, permuted), false);
    const auto& v1 = out1.value();
    const auto& v2 = out2.value();
    const int64_t row = T * cfg.token_dim;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t j = 0; j < row; ++j)
            CHECK(v2[size_t(b * row + j)] == v1[size_t(perm[size_t(b)] * row + j)]);
}

TEST_CASE("tokens are frame-local in eval mode") {
    ParamStore store;
    Rng rng(31);
    EncoderConfig cfg;
    cfg.stages = {{4, 2}};
    cfg.token_dim = 4;
    auto ep = init_encoder(store, cfg, 2, rng);

    const int64_t B = 2, T = 3, C = 2, H = 4, W = 4;
    Rng frng(13);
    auto base = random_frames(frng, B * T * C * H * W);
    auto edited = base;
    const int64_t frame_sz = C * H * W;
    for (int64_t j = 0; j < frame_sz; ++j) edited[size_t((1 * T + 1) * frame_sz + j)] += 0.25f;

    Tape tape;
    auto bound = bind_params(tape, store);
    auto out1 = encode_frames(store, bound, ep, tape.constant({B, T, C, H, W}, base), false);
    auto out2 = encode_frames(store, bound, ep, tape.constant({B, T, C, H, W}, edited), false);
    const auto& v1 = out1.value();
    const auto& v2 = out2.value();
    bool changed = false;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < T; ++t)
            for (int64_t n = 0; n < cfg.token_dim; ++n) {
                const size_t i = size_t((b * T + t) * cfg.token_dim + n);
                if (b == 1 && t == 1) {
                    changed = changed || v1[i] != v2[i];
                } else {
                    CHECK(v1[i] == v2[i]);
                }
            }
    CHECK(changed);
}

TEST_CASE("full encoder gradient check at toy shape") {
    evslt_test::DStore store;
    Rng rng(42);
    EncoderConfig cfg;
    cfg.stages = {{2, 2}};
    cfg.token_dim = 2;
    auto ep = init_encoder(store, cfg, 1, rng);
    Rng frng(9);
    std::vector<double> frames(2 * 1 * 4 * 4);
    for (auto& v : frames) v = frng.uniform(0.1, 1.0);
    const double worst = evslt_test::module_grad_check(
        store,
        [&](evslt_test::DTape& tape, evslt_test::DStore& st, evslt_test::DBound& bound) {
            auto f = tape.constant({1, 2, 1, 4, 4}, frames);
            return encode_frames(st, bound, ep, f, true);
        },
        1234);
    CHECK(worst < 1e-4);
}

}  // TEST_SUITE
