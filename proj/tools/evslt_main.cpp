#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "evslt/commands.hpp"
#include "evslt/config.hpp"
#include "evslt/errors.hpp"

namespace {

int dispatch(const std::string& cmd, const std::string& config_path,
             const std::string& manifest_path, const std::string& split,
             const std::string& out_dir) {
    const evslt::RunConfig rc = evslt::load_config(config_path);
    if (cmd == "synth") {
        const auto r = evslt::cmd_synth(rc, out_dir);
        std::printf("synth: %lld train / %lld val / %lld test -> %s\n",
                    static_cast<long long>(r.train_count), static_cast<long long>(r.val_count),
                    static_cast<long long>(r.test_count), r.manifest_path.c_str());
    } else if (cmd == "train") {
        if (manifest_path.empty()) throw evslt::ConfigError("train needs --manifest");
        const auto r = evslt::cmd_train(rc, manifest_path, out_dir);
        std::printf("train: %lld steps, final loss %.6f -> %s\n",
                    static_cast<long long>(r.final_step), r.final_train_loss,
                    r.last_path.c_str());
    } else if (cmd == "eval") {
        if (manifest_path.empty()) throw evslt::ConfigError("eval needs --manifest");
        const auto r = evslt::cmd_eval(rc, manifest_path, split, out_dir);
        std::printf("eval %s: bleu4 %.4f rouge_l %.4f over %lld samples -> %s\n", split.c_str(),
                    r.report.bleu[3], r.report.rouge_l,
                    static_cast<long long>(r.report.corpus_size), r.scores_path.c_str());
    } else {
        const auto rows = evslt::cmd_bench(rc, out_dir);
        for (const auto& row : rows)
            std::printf("bench %-9s T=%-4lld median %8.3f ms  ratio %.2f\n", row.component.c_str(),
                        static_cast<long long>(row.T), row.median_ms, row.ratio);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-stream sign language translation"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, out_dir = ".", split = "test";
    for (const char* name : {"synth", "train", "eval", "bench"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--manifest", manifest_path, "dataset manifest (train/eval)");
        sub->add_option("--out", out_dir, "output directory");
        if (std::string(name) == "eval")
            sub->add_option("--split", split, "manifest split to evaluate");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return dispatch(app.get_subcommands().front()->get_name(), config_path, manifest_path,
                        split, out_dir);
    } catch (const evslt::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const evslt::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const evslt::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
