#include "evslt/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "evslt/checkpoint.hpp"
#include "evslt/dataset.hpp"
#include "evslt/model.hpp"
#include "evslt/optim.hpp"
#include "evslt/rng.hpp"

namespace evslt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sample_name(int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04lld", static_cast<long long>(i));
    return buf;
}

Vocabulary load_corpus_vocab(const Manifest& m) {
    const fs::path p = fs::path(m.dir) / "vocab.txt";
    if (!fs::exists(p)) throw DataError("missing vocabulary file " + p.string());
    return Vocabulary::load(p.string());
}

ModelConfig model_config_for(const RunConfig& rc, const Vocabulary& vocab) {
    ModelConfig cfg = rc.model;
    cfg.mamba.token_dim = cfg.encoder.token_dim;
    cfg.head.vocab_size = vocab.size();
    return cfg;
}

std::vector<LoadedSample> load_split(const Manifest& m, const std::vector<size_t>& idx,
                                     const RunConfig& rc, const Vocabulary& vocab) {
    std::vector<LoadedSample> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(load_sample(m, m.entries[i], rc, vocab));
    return out;
}

double mean_sample_loss(ParamStore& store, const ModelParams& mp,
                        const std::vector<LoadedSample>& samples) {
    double total = 0;
    for (const auto& s : samples) {
        Tape tape;
        auto bound = bind_params(tape, store);
        auto batch = make_batch({&s});
        auto frames = tape.constant(batch.shape, batch.values);
        auto out = forward_full(store, bound, mp, frames, batch.sentences, false);
        total += double(out.loss.value()[0]);
    }
    return total / double(samples.size());
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

}  // namespace

SynthResult cmd_synth(const RunConfig& rc, const std::string& out_dir) {
    const auto& sc = rc.synth;
    if (sc.vocab < 1) throw ConfigError("synth.vocab must be >= 1");

    fs::create_directories(fs::path(out_dir) / "events");
    Vocabulary vocab;
    for (int64_t i = 0; i < sc.vocab; ++i) vocab.add("w" + std::to_string(i));

    SynthOptions opt;
    opt.sensor_width = static_cast<int32_t>(sc.sensor_width);
    opt.sensor_height = static_cast<int32_t>(sc.sensor_height);
    opt.min_len = static_cast<int>(sc.min_len);
    opt.max_len = static_cast<int>(sc.max_len);
    opt.token_duration_us = sc.token_duration_us;

    const int64_t n = sc.samples;
    const int64_t n_val = static_cast<int64_t>(std::floor(double(n) * sc.ratios[1]));
    const int64_t n_test = static_cast<int64_t>(std::floor(double(n) * sc.ratios[2]));
    const int64_t n_train = n - n_val - n_test;  // floor remainder goes to train

    Rng seeder(rc.seed);
    std::vector<ManifestEntry> entries;
    for (int64_t i = 0; i < n; ++i) {
        const auto sample = synth_scene(seeder.next_u64(), static_cast<int>(sc.vocab), opt);
        ManifestEntry e;
        e.id = sample_name(i);
        e.events_path = "events/" + e.id + ".evst";
        for (int idx : sample.vocab_indices) {
            if (!e.text.empty()) e.text += ' ';
            e.text += "w" + std::to_string(idx);
        }
        e.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
        write_events(sample.stream, (fs::path(out_dir) / e.events_path).string());
        entries.push_back(std::move(e));
    }

    SynthResult r;
    r.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    r.vocab_path = (fs::path(out_dir) / "vocab.txt").string();
    save_manifest(r.manifest_path, entries);
    vocab.save(r.vocab_path);
    r.train_count = n_train;
    r.val_count = n_val;
    r.test_count = n_test;
    return r;
}

TrainResult cmd_train(const RunConfig& rc, const std::string& manifest_path,
                      const std::string& out_dir) {
    const Manifest manifest = load_manifest(manifest_path);
    const Vocabulary vocab = load_corpus_vocab(manifest);
    const auto train_idx = split_indices(manifest, "train");
    if (train_idx.empty()) throw MissingSplit("train");
    const auto val_idx = split_indices(manifest, "val");

    const ModelConfig cfg = model_config_for(rc, vocab);
    ParamStore store;
    Rng rng(rc.seed);
    const ModelParams mp = init_model(store, cfg, rng);

    const auto train_set = load_split(manifest, train_idx, rc, vocab);
    const auto val_set = load_split(manifest, val_idx, rc, vocab);

    fs::create_directories(out_dir);
    TrainResult res;
    res.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
    res.best_path = (fs::path(out_dir) / "best.ckpt").string();
    res.last_path = (fs::path(out_dir) / "last.ckpt").string();

    const int64_t n = static_cast<int64_t>(train_set.size());
    const int64_t spe = (n + rc.batch_size - 1) / rc.batch_size;

    OptimizerState optim = rc.optim;
    optim.step = fs::exists(res.last_path) ? load_checkpoint(res.last_path, store) : 0;
    const int64_t step0 = optim.step;
    optim.total_steps = step0 + rc.epochs * spe;

    std::ofstream log(res.log_path, std::ios::app);
    if (!log) throw IoFailure("cannot open " + res.log_path);

    double best_val = std::numeric_limits<double>::infinity();
    for (int64_t e = 0; e < rc.epochs; ++e) {
        const int64_t epoch = step0 / spe + e;
        std::vector<size_t> order(static_cast<size_t>(n));
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng perm = Rng(rc.seed).fork(0xE40C + static_cast<uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(perm.below(int64_t(i)))]);

        for (int64_t b = 0; b < spe; ++b) {
            std::vector<const LoadedSample*> members;
            for (int64_t k = b * rc.batch_size; k < std::min(n, (b + 1) * rc.batch_size); ++k)
                members.push_back(&train_set[order[static_cast<size_t>(k)]]);
            auto batch = make_batch(members);

            Tape tape;
            auto bound = bind_params(tape, store);
            auto frames = tape.constant(batch.shape, batch.values);
            auto out = forward_full(store, bound, mp, frames, batch.sentences, true);
            const double train_loss = double(out.loss.value()[0]);
            if (!std::isfinite(train_loss))
                throw NonFiniteLoss("non-finite loss at step " + std::to_string(optim.step));
            const double lr = cosine_lr(optim);
            auto grads = tape.backward(out.loss);
            sgd_step(store, bound, grads, optim);

            json rec;
            rec["epoch"] = epoch;
            rec["step"] = optim.step - 1;
            rec["lr"] = lr;
            rec["train_loss"] = train_loss;
            if (b == spe - 1 && !val_set.empty())
                rec["val_loss"] = mean_sample_loss(store, mp, val_set);
            else
                rec["val_loss"] = nullptr;
            log << rec.dump() << '\n';
            if (!log) throw IoFailure("short write " + res.log_path);
            res.final_train_loss = train_loss;
            if (b == spe - 1 && !val_set.empty()) {
                const double vl = rec["val_loss"].get<double>();
                if (vl < best_val) {
                    best_val = vl;
                    save_checkpoint(res.best_path, store, optim.step);
                }
            }
        }
        save_checkpoint(res.last_path, store, optim.step);
        if (val_set.empty()) save_checkpoint(res.best_path, store, optim.step);
    }
    res.final_step = optim.step;
    return res;
}

EvalResult cmd_eval(const RunConfig& rc, const std::string& manifest_path,
                    const std::string& split, const std::string& out_dir) {
    const Manifest manifest = load_manifest(manifest_path);
    const Vocabulary vocab = load_corpus_vocab(manifest);
    const auto idx = split_indices(manifest, split);
    if (idx.empty()) throw MissingSplit(split);

    const ModelConfig cfg = model_config_for(rc, vocab);
    ParamStore store;
    Rng rng(rc.seed);
    const ModelParams mp = init_model(store, cfg, rng);

    fs::path ckpt = fs::path(out_dir) / "best.ckpt";
    if (!fs::exists(ckpt)) ckpt = fs::path(out_dir) / "last.ckpt";
    if (!fs::exists(ckpt)) throw DataError("no checkpoint under " + out_dir);
    load_checkpoint(ckpt.string(), store);

    EvalResult res;
    res.predictions_path = (fs::path(out_dir) / ("predictions_" + split + ".jsonl")).string();
    res.scores_path = (fs::path(out_dir) / ("scores_" + split + ".json")).string();
    std::ofstream preds(res.predictions_path, std::ios::trunc);
    if (!preds) throw IoFailure("cannot open " + res.predictions_path);

    std::vector<TokenSeq> cands, refs;
    for (size_t i : idx) {
        const auto sample = load_sample(manifest, manifest.entries[i], rc, vocab);
        Tape tape;
        auto bound = bind_params(tape, store);
        auto batch = make_batch({&sample});
        auto frames = tape.constant(batch.shape, batch.values);
        const auto ids = generate_sample(store, bound, mp, frames, rc.decode_strategy,
                                         rc.beam_width);
        const auto hyp = sentence_content(ids);
        cands.push_back(hyp);
        refs.push_back(vocab.encode(sample.text));
        json rec;
        rec["id"] = sample.id;
        rec["reference"] = sample.text;
        rec["hypothesis"] = vocab.decode(hyp);
        preds << rec.dump() << '\n';
    }
    if (!preds) throw IoFailure("short write " + res.predictions_path);

    res.report = score_corpus(cands, refs);
    json scores;
    scores["bleu1"] = res.report.bleu[0];
    scores["bleu2"] = res.report.bleu[1];
    scores["bleu3"] = res.report.bleu[2];
    scores["bleu4"] = res.report.bleu[3];
    scores["rouge_l"] = res.report.rouge_l;
    scores["corpus_size"] = res.report.corpus_size;
    std::ofstream sf(res.scores_path, std::ios::trunc);
    if (!sf) throw IoFailure("cannot open " + res.scores_path);
    sf << scores.dump(2) << '\n';
    if (!sf) throw IoFailure("short write " + res.scores_path);
    return res;
}

std::vector<BenchRow> cmd_bench(const RunConfig& rc, const std::string& out_dir) {
    constexpr int64_t kDim = 64;
    constexpr int kTrials = 5;
    const std::vector<int64_t> lengths{256, 512};

    ParamStore store;
    Rng rng(rc.seed);
    MambaConfig mcfg;
    mcfg.token_dim = kDim;
    mcfg.d_inner = 2 * kDim;
    mcfg.state_dim = 16;
    mcfg.conv_width = 4;
    const auto mp = init_mamba(store, mcfg, rng);

    auto time_trials = [&](auto&& fn) {
        std::vector<double> ms;
        for (int t = 0; t <= kTrials; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            fn();
            const auto t1 = std::chrono::steady_clock::now();
            if (t > 0) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        return median_of(ms);
    };

    std::vector<BenchRow> rows;
    for (const char* component : {"mamba", "attention"}) {
        double base = 0;
        for (int64_t T : lengths) {
            Rng in_rng = Rng(rc.seed).fork(static_cast<uint64_t>(T));
            std::vector<float> xv(static_cast<size_t>(T * kDim));
            for (auto& v : xv) v = float(in_rng.uniform(-1.0, 1.0));
            double ms = 0;
            if (std::string(component) == "mamba") {
                ms = time_trials([&] {
                    Tape tape;
                    auto bound = bind_params(tape, store);
                    auto x = tape.constant({1, T, kDim}, xv);
                    auto y = mamba_block(bound, mp, x);
                    (void)y.value();
                });
            } else {
                // reference quadratic layer: softmax(Q K^T / sqrt(d)) V with
                // Q = K = V = x, the T x T score matrix materialized
                ms = time_trials([&] {
                    Tape tape;
                    auto x = tape.constant({1, T, kDim}, xv);
                    auto scores = scale(bmm_nt(x, x), float(1.0 / std::sqrt(double(kDim))));
                    auto y = bmm(softmax_lastdim(scores), x);
                    (void)y.value();
                });
            }
            BenchRow row;
            row.component = component;
            row.T = T;
            row.median_ms = ms;
            if (T == lengths.front()) base = ms;
            row.ratio = ms / base;
            rows.push_back(std::move(row));
        }
    }

    fs::create_directories(out_dir);
    json j = json::array();
    for (const auto& r : rows) {
        json row;
        row["component"] = r.component;
        row["T"] = r.T;
        row["median_ms"] = r.median_ms;
        row["ratio"] = r.ratio;
        j.push_back(row);
    }
    const std::string path = (fs::path(out_dir) / "bench.json").string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoFailure("short write " + path);
    return rows;
}

}  // namespace evslt
