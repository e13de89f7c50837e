#include "evslt/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "evslt/errors.hpp"

namespace evslt {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& item : j.items())
        if (allowed.count(item.key()) == 0)
            throw ConfigError("unknown config key " + where + item.key());
}

int64_t get_i64(const json& j, const char* key, int64_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + key + " must be an integer");
    return v.get<int64_t>();
}

double get_f64(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + key + " must be a number");
    return v.get<double>();
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_boolean()) throw ConfigError(where + key + " must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback,
                    const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_string()) throw ConfigError(where + key + " must be a string");
    return v.get<std::string>();
}

std::vector<std::pair<int64_t, int64_t>> get_pairs(const json& j, const char* key,
                                                   const std::string& where) {
    std::vector<std::pair<int64_t, int64_t>> out;
    const auto& v = j.at(key);
    if (!v.is_array()) throw ConfigError(where + key + " must be an array of [a, b] pairs");
    for (const auto& e : v) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number_integer())
            throw ConfigError(where + key + " entries must be [a, b] integer pairs");
        out.emplace_back(e[0].get<int64_t>(), e[1].get<int64_t>());
    }
    return out;
}

void parse_encoder(const json& j, EncoderConfig& cfg) {
    require_object(j, "model.encoder");
    reject_unknown(j, {"stages", "token_dim"}, "model.encoder.");
    if (j.contains("stages")) {
        cfg.stages.clear();
        for (auto [ch, st] : get_pairs(j, "stages", "model.encoder."))
            cfg.stages.push_back({ch, st});
    }
    cfg.token_dim = get_i64(j, "token_dim", cfg.token_dim, "model.encoder.");
}

void parse_mamba(const json& j, MambaConfig& cfg) {
    require_object(j, "model.mamba");
    reject_unknown(j, {"d_inner", "state_dim", "conv_width", "norm", "share_directions"},
                   "model.mamba.");
    cfg.d_inner = get_i64(j, "d_inner", cfg.d_inner, "model.mamba.");
    cfg.state_dim = get_i64(j, "state_dim", cfg.state_dim, "model.mamba.");
    cfg.conv_width = get_i64(j, "conv_width", cfg.conv_width, "model.mamba.");
    const std::string norm = get_str(j, "norm", "layer", "model.mamba.");
    if (norm == "layer")
        cfg.norm = NormKind::LayerNorm;
    else if (norm == "rms")
        cfg.norm = NormKind::RmsNorm;
    else
        throw ConfigError("model.mamba.norm must be 'layer' or 'rms'");
    cfg.share_directions = get_bool(j, "share_directions", cfg.share_directions, "model.mamba.");
}

void parse_head(const json& j, HeadConfig& cfg) {
    require_object(j, "model.head");
    reject_unknown(j,
                   {"aggregation", "plan", "d_model", "enc_layers", "dec_layers", "heads",
                    "ff_dim", "max_len"},
                   "model.head.");
    if (j.contains("aggregation"))
        cfg.aggregation = parse_agg_mode(get_str(j, "aggregation", "", "model.head."));
    if (j.contains("plan")) {
        cfg.plan.clear();
        for (auto [k, p] : get_pairs(j, "plan", "model.head.")) cfg.plan.push_back({k, p});
    }
    cfg.d_model = get_i64(j, "d_model", cfg.d_model, "model.head.");
    cfg.enc_layers = get_i64(j, "enc_layers", cfg.enc_layers, "model.head.");
    cfg.dec_layers = get_i64(j, "dec_layers", cfg.dec_layers, "model.head.");
    cfg.heads = get_i64(j, "heads", cfg.heads, "model.head.");
    cfg.ff_dim = get_i64(j, "ff_dim", cfg.ff_dim, "model.head.");
    cfg.max_len = get_i64(j, "max_len", cfg.max_len, "model.head.");
}

void parse_model(const json& j, ModelConfig& cfg) {
    require_object(j, "model");
    reject_unknown(j, {"in_channels", "encoder", "mamba", "head"}, "model.");
    cfg.in_channels = get_i64(j, "in_channels", cfg.in_channels, "model.");
    if (j.contains("encoder")) parse_encoder(j.at("encoder"), cfg.encoder);
    if (j.contains("mamba")) parse_mamba(j.at("mamba"), cfg.mamba);
    if (j.contains("head")) parse_head(j.at("head"), cfg.head);
    cfg.mamba.token_dim = cfg.encoder.token_dim;
}

void parse_optim(const json& j, OptimizerState& st) {
    require_object(j, "optim");
    reject_unknown(j, {"lr0", "lr_min", "momentum", "weight_decay"}, "optim.");
    st.lr0 = get_f64(j, "lr0", st.lr0, "optim.");
    st.lr_min = get_f64(j, "lr_min", st.lr_min, "optim.");
    st.momentum = get_f64(j, "momentum", st.momentum, "optim.");
    st.weight_decay = get_f64(j, "weight_decay", st.weight_decay, "optim.");
    if (st.lr0 <= 0) throw ConfigError("optim.lr0 must be positive");
    if (st.lr_min < 0 || st.lr_min > st.lr0)
        throw ConfigError("optim.lr_min must lie in [0, lr0]");
    if (st.momentum < 0 || st.momentum >= 1)
        throw ConfigError("optim.momentum must lie in [0, 1)");
}

void parse_synth(const json& j, SynthConfig& sc) {
    require_object(j, "synth");
    reject_unknown(j,
                   {"samples", "vocab", "min_len", "max_len", "sensor_width", "sensor_height",
                    "token_duration_us", "ratios"},
                   "synth.");
    sc.samples = get_i64(j, "samples", sc.samples, "synth.");
    sc.vocab = get_i64(j, "vocab", sc.vocab, "synth.");
    sc.min_len = get_i64(j, "min_len", sc.min_len, "synth.");
    sc.max_len = get_i64(j, "max_len", sc.max_len, "synth.");
    sc.sensor_width = get_i64(j, "sensor_width", sc.sensor_width, "synth.");
    sc.sensor_height = get_i64(j, "sensor_height", sc.sensor_height, "synth.");
    sc.token_duration_us = get_i64(j, "token_duration_us", sc.token_duration_us, "synth.");
    if (j.contains("ratios")) {
        const auto& r = j.at("ratios");
        if (!r.is_array() || r.size() != 3) throw ConfigError("synth.ratios must have 3 entries");
        sc.ratios.clear();
        for (const auto& e : r) {
            if (!e.is_number()) throw ConfigError("synth.ratios entries must be numbers");
            sc.ratios.push_back(e.get<double>());
        }
    }
    if (sc.samples < 1) throw ConfigError("synth.samples must be >= 1");
    if (sc.min_len < 1 || sc.max_len < sc.min_len)
        throw ConfigError("synth sentence length range is invalid");
    double sum = 0;
    for (double r : sc.ratios) {
        if (r < 0) throw ConfigError("synth.ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("synth.ratios must sum to 1");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_object(j, "config root");
    reject_unknown(j,
                   {"seed", "epochs", "batch_size", "frames", "subsample", "height", "width",
                    "bin_mode", "resize_mode", "model", "optim", "decode", "synth"},
                   "");

    RunConfig rc;
    rc.seed = static_cast<uint64_t>(get_i64(j, "seed", int64_t(rc.seed), ""));
    rc.epochs = get_i64(j, "epochs", rc.epochs, "");
    rc.batch_size = get_i64(j, "batch_size", rc.batch_size, "");
    rc.frames = get_i64(j, "frames", rc.frames, "");
    rc.subsample = get_i64(j, "subsample", rc.subsample, "");
    rc.height = get_i64(j, "height", rc.height, "");
    rc.width = get_i64(j, "width", rc.width, "");

    const std::string bm = get_str(j, "bin_mode", "time", "");
    if (bm == "time")
        rc.bin_mode = BinMode::kTime;
    else if (bm == "count")
        rc.bin_mode = BinMode::kCount;
    else
        throw ConfigError("bin_mode must be 'time' or 'count'");
    const std::string rm = get_str(j, "resize_mode", "mass", "");
    if (rm == "mass")
        rc.resize_mode = ResizeMode::kMass;
    else if (rm == "mean")
        rc.resize_mode = ResizeMode::kMean;
    else
        throw ConfigError("resize_mode must be 'mass' or 'mean'");

    if (j.contains("model")) parse_model(j.at("model"), rc.model);
    rc.model.mamba.token_dim = rc.model.encoder.token_dim;
    if (j.contains("optim")) parse_optim(j.at("optim"), rc.optim);
    if (j.contains("decode")) {
        const auto& d = j.at("decode");
        require_object(d, "decode");
        reject_unknown(d, {"strategy", "beam_width"}, "decode.");
        const std::string strat = get_str(d, "strategy", "greedy", "decode.");
        if (strat == "greedy")
            rc.decode_strategy = DecodeStrategy::Greedy;
        else if (strat == "beam")
            rc.decode_strategy = DecodeStrategy::Beam;
        else
            throw ConfigError("decode.strategy must be 'greedy' or 'beam'");
        rc.beam_width = static_cast<int>(get_i64(d, "beam_width", rc.beam_width, "decode."));
    }
    if (j.contains("synth")) parse_synth(j.at("synth"), rc.synth);

    if (rc.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (rc.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (rc.frames < 1) throw ConfigError("frames must be >= 1");
    if (rc.subsample < 1) throw ConfigError("subsample must be >= 1");
    if (rc.height < 1 || rc.width < 1) throw ConfigError("resolution must be positive");
    if (rc.beam_width < 1) throw ConfigError("decode.beam_width must be >= 1");
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig rc = parse_config(ss.str());
    if (const char* env = std::getenv("EVSLT_SEED"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == nullptr || *end != '\0') throw ConfigError("EVSLT_SEED must be an integer");
        rc.seed = static_cast<uint64_t>(v);
    }
    return rc;
}

}  // namespace evslt
