#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "evslt/commands.hpp"
#include "evslt/config.hpp"
#include "evslt/errors.hpp"

using namespace evslt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ScratchDir {
    fs::path dir;
    explicit ScratchDir(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~ScratchDir() { fs::remove_all(dir); }
    std::string file(const std::string& rel) const { return (dir / rel).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

// small corpus plus a model sized for sub-second training steps
const char* kTinyDoc = R"({
  "seed": 11, "epochs": 2, "batch_size": 2, "frames": 4, "height": 8, "width": 8,
  "model": {
    "encoder": {"stages": [[4, 2]], "token_dim": 8},
    "mamba": {"d_inner": 16, "state_dim": 4, "conv_width": 2},
    "head": {"plan": [[3, 2]], "d_model": 8, "enc_layers": 1, "dec_layers": 1,
             "heads": 2, "ff_dim": 16, "max_len": 6}
  },
  "synth": {"samples": 8, "vocab": 3, "min_len": 1, "max_len": 2,
            "sensor_width": 16, "sensor_height": 16,
            "ratios": [0.5, 0.25, 0.25]}
})";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EVSLT_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic and splits by the configured ratios") {
    const RunConfig rc = parse_config(kTinyDoc);
    ScratchDir a("evslt_cli_synth_a");
    ScratchDir b("evslt_cli_synth_b");

    const SynthResult ra = cmd_synth(rc, a.dir.string());
    const SynthResult rb = cmd_synth(rc, b.dir.string());
    CHECK(ra.train_count == 4);
    CHECK(ra.val_count == 2);
    CHECK(ra.test_count == 2);

    CHECK(slurp(ra.manifest_path) == slurp(rb.manifest_path));
    CHECK(slurp(ra.vocab_path) == slurp(rb.vocab_path));
    CHECK(slurp(a.file("events/sample_0000.evst")) == slurp(b.file("events/sample_0000.evst")));
    CHECK(slurp(a.file("events/sample_0007.evst")) == slurp(b.file("events/sample_0007.evst")));

    const auto entries = read_jsonl(ra.manifest_path);
    REQUIRE(entries.size() == 8);
    CHECK(entries[0]["split"] == "train");
    CHECK(entries[4]["split"] == "val");
    CHECK(entries[6]["split"] == "test");
}

TEST_CASE("larger corpora put the floor remainder into train") {
    RunConfig rc = parse_config(kTinyDoc);
    rc.synth.samples = 32;
    rc.synth.ratios = {0.8, 0.1, 0.1};
    ScratchDir sd("evslt_cli_synth_32");
    const SynthResult r = cmd_synth(rc, sd.dir.string());
    CHECK(r.train_count == 26);
    CHECK(r.val_count == 3);
    CHECK(r.test_count == 3);
}

TEST_CASE("an empty vocabulary aborts synth before touching the filesystem") {
    RunConfig rc = parse_config(kTinyDoc);
    rc.synth.vocab = 0;
    const fs::path out = fs::temp_directory_path() / "evslt_cli_synth_none";
    fs::remove_all(out);
    CHECK_THROWS_AS((void)cmd_synth(rc, out.string()), ConfigError);
    CHECK(!fs::exists(out));
}

TEST_CASE("train logs every step and resumes from the last checkpoint") {
    const RunConfig rc = parse_config(kTinyDoc);
    ScratchDir data("evslt_cli_train_data");
    ScratchDir out("evslt_cli_train_out");
    const SynthResult sr = cmd_synth(rc, data.dir.string());

    const TrainResult t1 = cmd_train(rc, sr.manifest_path, out.dir.string());
    CHECK(t1.final_step == 4);  // 2 epochs x ceil(4 / 2) steps
    CHECK(fs::exists(t1.best_path));
    CHECK(fs::exists(t1.last_path));
    CHECK(std::isfinite(t1.final_train_loss));

    auto log = read_jsonl(t1.log_path);
    REQUIRE(log.size() == 4);
    for (size_t i = 0; i < log.size(); ++i) {
        CHECK(log[i]["step"] == int64_t(i));
        CHECK(log[i]["epoch"] == int64_t(i / 2));
        CHECK(log[i]["train_loss"].is_number());
    }
    CHECK(log[0]["lr"] == 0.01);  // cosine schedule starts exactly at lr0
    CHECK(log[0]["val_loss"].is_null());
    CHECK(log[1]["val_loss"].is_number());
    CHECK(log[2]["val_loss"].is_null());
    CHECK(log[3]["val_loss"].is_number());

    const TrainResult t2 = cmd_train(rc, sr.manifest_path, out.dir.string());
    CHECK(t2.final_step == 8);
    log = read_jsonl(t2.log_path);
    REQUIRE(log.size() == 8);  // appended, not truncated
    CHECK(log[4]["step"] == 4);
    CHECK(log[4]["epoch"] == 2);
    CHECK(log[7]["step"] == 7);
    CHECK(log[7]["epoch"] == 3);
}

TEST_CASE("eval writes deterministic predictions and scores") {
    const RunConfig rc = parse_config(kTinyDoc);
    ScratchDir data("evslt_cli_eval_data");
    ScratchDir out("evslt_cli_eval_out");
    const SynthResult sr = cmd_synth(rc, data.dir.string());
    (void)cmd_train(rc, sr.manifest_path, out.dir.string());

    const EvalResult e1 = cmd_eval(rc, sr.manifest_path, "test", out.dir.string());
    CHECK(e1.report.corpus_size == 2);
    for (double b : e1.report.bleu) {
        CHECK(b >= 0);
        CHECK(b <= 1);
    }
    CHECK(e1.report.rouge_l >= 0);
    CHECK(e1.report.rouge_l <= 1);

    const auto preds = read_jsonl(e1.predictions_path);
    REQUIRE(preds.size() == 2);
    for (const auto& p : preds) {
        CHECK(p.at("id").is_string());
        CHECK(p.at("reference").is_string());
        CHECK(p.at("hypothesis").is_string());
    }
    const json scores = json::parse(slurp(e1.scores_path));
    for (const char* key : {"bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "corpus_size"})
        CHECK(scores.contains(key));
    CHECK(scores["corpus_size"] == 2);

    const std::string preds_bytes = slurp(e1.predictions_path);
    const std::string scores_bytes = slurp(e1.scores_path);
    const EvalResult e2 = cmd_eval(rc, sr.manifest_path, "test", out.dir.string());
    CHECK(slurp(e2.predictions_path) == preds_bytes);
    CHECK(slurp(e2.scores_path) == scores_bytes);

    CHECK_THROWS_AS((void)cmd_eval(rc, sr.manifest_path, "dev", out.dir.string()), MissingSplit);
    ScratchDir empty("evslt_cli_eval_empty");
    CHECK_THROWS_AS((void)cmd_eval(rc, sr.manifest_path, "test", empty.dir.string()), DataError);
}

TEST_CASE("bench emits paired rows per component") {
    const RunConfig rc = parse_config("{}");
    ScratchDir sd("evslt_cli_bench");
    const auto rows = cmd_bench(rc, sd.dir.string());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].component == "mamba");
    CHECK(rows[0].T == 256);
    CHECK(rows[0].ratio == 1.0);
    CHECK(rows[1].component == "mamba");
    CHECK(rows[1].T == 512);
    CHECK(rows[2].component == "attention");
    CHECK(rows[2].T == 256);
    CHECK(rows[2].ratio == 1.0);
    CHECK(rows[3].component == "attention");
    CHECK(rows[3].T == 512);
    for (const auto& r : rows) CHECK(r.median_ms > 0);

    const json report = json::parse(slurp(sd.file("bench.json")));
    REQUIRE(report.is_array());
    REQUIRE(report.size() == 4);
    for (const auto& row : report)
        for (const char* key : {"component", "T", "median_ms", "ratio"})
            CHECK(row.contains(key));
}

TEST_CASE("the binary maps failures onto exit codes") {
    ScratchDir sd("evslt_cli_proc");
    const std::string cfg = sd.file("cfg.json");
    {
        std::ofstream f(cfg);
        f << kTinyDoc;
    }

    CHECK(run_cli("synth --config " + cfg + " --out " + sd.file("corpus")) == 0);
    CHECK(fs::exists(sd.file("corpus/manifest.jsonl")));
    CHECK(fs::exists(sd.file("corpus/vocab.txt")));

    const std::string bad = sd.file("bad.json");
    {
        std::ofstream f(bad);
        f << R"({"epochz": 1})";
    }
    CHECK(run_cli("synth --config " + bad + " --out " + sd.file("x")) == 2);
    CHECK(run_cli("eval --config " + cfg + " --manifest " + sd.file("corpus/manifest.jsonl") +
                  " --split dev --out " + sd.file("corpus")) == 3);
    CHECK(run_cli("synth") == 2);       // --config is required
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("frobnicate --config " + cfg) == 2);
}

TEST_CASE("the seed override reaches the binary through the environment") {
    ScratchDir sd("evslt_cli_env");
    const std::string cfg5 = sd.file("cfg5.json");
    const std::string cfg123 = sd.file("cfg123.json");
    {
        std::ofstream f(cfg5);
        f << R"({"seed": 5, "synth": {"samples": 2, "vocab": 2, "min_len": 1, "max_len": 2,
                 "sensor_width": 16, "sensor_height": 16, "ratios": [1.0, 0.0, 0.0]}})";
    }
    {
        std::ofstream f(cfg123);
        f << R"({"seed": 123, "synth": {"samples": 2, "vocab": 2, "min_len": 1, "max_len": 2,
                 "sensor_width": 16, "sensor_height": 16, "ratios": [1.0, 0.0, 0.0]}})";
    }

    CHECK(run_cli("synth --config " + cfg5 + " --out " + sd.file("base")) == 0);
    const int env_code = std::system(("EVSLT_SEED=123 " + std::string(EVSLT_BIN) +
                                      " synth --config " + cfg5 + " --out " + sd.file("env") +
                                      " >/dev/null 2>&1")
                                         .c_str());
    REQUIRE(WIFEXITED(env_code));
    CHECK(WEXITSTATUS(env_code) == 0);
    CHECK(run_cli("synth --config " + cfg123 + " --out " + sd.file("direct")) == 0);

    const std::string first = "events/sample_0000.evst";
    CHECK(slurp(sd.file("env/" + first)) == slurp(sd.file("direct/" + first)));
    CHECK(slurp(sd.file("env/" + first)) != slurp(sd.file("base/" + first)));

    const int bad_code = std::system(("EVSLT_SEED=abc " + std::string(EVSLT_BIN) +
                                      " synth --config " + cfg5 + " --out " + sd.file("junk") +
                                      " >/dev/null 2>&1")
                                         .c_str());
    REQUIRE(WIFEXITED(bad_code));
    CHECK(WEXITSTATUS(bad_code) == 2);
}

}  // TEST_SUITE
