#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "ctl/commands.hpp"

namespace {

ctl::Json load_config(const std::string& path) {
    if (path.empty()) return ctl::Json::object();
    return ctl::Json::parse(ctl::read_file(path));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sound event detection losses for sequential labeling: corpus synthesis, "
                 "training, evaluation and verification"};
    app.require_subcommand(1);

    std::string config_path, out_dir, corpus_dir, params_path, split = "evaluation";
    std::string loss_name, weights_text, corrupt;
    uint64_t seed = 0;
    bool seed_given = false;
    int trials = -1;

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--config", config_path, "synth config JSON");
    synth->add_option("--out", out_dir, "output corpus directory")->required();
    synth->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* train = app.add_subcommand("train", "train a model on a corpus");
    train->add_option("--config", config_path, "train config JSON");
    train->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--loss", loss_name, "strong|mil|ctc|ctl|combo");
    train->add_option("--weights", weights_text, "combo weights, e.g. ctl=1,mil=3.3");
    train->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* eval = app.add_subcommand("eval", "evaluate trained parameters on a split");
    eval->add_option("--params", params_path, "trained parameter file")->required();
    eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
    eval->add_option("--split", split, "train|validation|evaluation");
    eval->add_option("--out", out_dir, "output directory")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of all losses");
    gradcheck->add_option("--seed", seed, "instance seed")
        ->each([&](const std::string&) { seed_given = true; });
    gradcheck->add_option("--trials", trials, "instances per loss (default 100)");
    gradcheck->add_option("--out", out_dir, "optional output directory");
    gradcheck->add_option("--corrupt", corrupt, "corrupt one loss gradient (testing)")
        ->group("");

    auto* oracle = app.add_subcommand("oracle-check", "dynamic programs vs brute force");
    oracle->add_option("--seed", seed, "instance seed")
        ->each([&](const std::string&) { seed_given = true; });
    oracle->add_option("--trials", trials, "random instances (default 200)");
    oracle->add_option("--out", out_dir, "optional output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            ctl::Json config = load_config(config_path);
            if (seed_given) config["seed"] = seed;
            const auto result = ctl::cmd_synth(config, out_dir);
            std::printf("wrote corpus to %s (train=%d validation=%d evaluation=%d", out_dir.c_str(),
                        result.config.num_train, result.config.num_validation,
                        result.config.num_evaluation);
            if (result.stats.regenerated > 0)
                std::printf(", %lld recordings regenerated", result.stats.regenerated);
            std::printf(")\n");
        } else if (train->parsed()) {
            ctl::Json config = load_config(config_path);
            if (seed_given) config["seed"] = seed;
            if (!loss_name.empty()) config["loss"] = loss_name;
            if (!weights_text.empty()) config["weights"] = ctl::parse_weights(weights_text);
            const auto result = ctl::cmd_train(config, corpus_dir, out_dir);
            std::printf("trained loss=%s: best validation macro F1 %.4f at checkpoint %d\n",
                        ctl::loss_kind_name(result.config.train.loss).c_str(),
                        result.train.best_val_f1, result.train.best_checkpoint);
            std::printf("wrote %s/params.bin and %s/metrics.csv\n", out_dir.c_str(),
                        out_dir.c_str());
        } else if (eval->parsed()) {
            const auto result = ctl::cmd_eval(params_path, corpus_dir, split, out_dir);
            std::printf("split %s (%s decoder): macro F1 %.4f\n", split.c_str(),
                        result.decoder.c_str(), result.report.macro);
            for (size_t c = 0; c < result.report.per_class.size(); ++c)
                std::printf("  class %zu: F1 %.4f\n", c, result.report.per_class[c]);
        } else if (gradcheck->parsed()) {
            ctl::GradcheckOptions opts;
            if (seed_given) opts.seed = seed;
            if (trials >= 0) opts.instances = trials;
            opts.corrupt = corrupt;
            const auto result = ctl::cmd_gradcheck(opts, out_dir);
            std::fputs(result.table.c_str(), stdout);
            if (!result.ok) {
                std::fprintf(stderr, "gradcheck FAILED (tolerance %.1e)\n", result.tolerance);
                return 1;
            }
        } else if (oracle->parsed()) {
            ctl::OracleCheckOptions opts;
            if (seed_given) opts.seed = seed;
            if (trials >= 0) opts.trials = trials;
            const auto result = ctl::cmd_oracle_check(opts, out_dir);
            std::fputs(result.table.c_str(), stdout);
            if (!result.ok) {
                std::fprintf(stderr, "oracle-check FAILED\n");
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
