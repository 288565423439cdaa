#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctl/ctc_loss.hpp"
#include "ctl/ctl_loss.hpp"
#include "ctl/eval.hpp"
#include "ctl/gradcheck.hpp"
#include "ctl/io.hpp"
#include "ctl/model.hpp"
#include "ctl/oracle.hpp"
#include "ctl/params_io.hpp"
#include "ctl/rng.hpp"
#include "ctl/synth.hpp"

namespace ctl {

namespace fs = std::filesystem;

inline std::string fmt_double(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// "k=v,k=v" flag syntax for loss weights.
inline Json parse_weights(const std::string& text) {
    Json out = Json::object();
    size_t pos = 0;
    while (pos < text.size()) {
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("weights: expected k=v, got '" + item + "'");
        out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        pos = comma + 1;
    }
    return out;
}

namespace detail {

inline void reject_unknown_keys(const Json& j, const std::vector<std::string>& known,
                                const std::string& what) {
    for (const auto& [key, value] : j.items()) {
        if (!key.empty() && key[0] == '_') continue;  // annotation keys
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw std::invalid_argument(what + ": unknown key '" + key + "'");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthCmdResult {
    SynthConfig config;
    GenerateStats stats;
};

inline SynthCmdResult cmd_synth(const Json& config_json, const fs::path& out_dir) {
    detail::reject_unknown_keys(config_json,
                                {"seed", "num_train", "num_validation", "num_evaluation",
                                 "frames", "feature_dim", "feature_noise_sigma",
                                 "signature_cos", "overlap_allowed", "classes"},
                                "synth config");
    SynthCmdResult result;
    result.config = synth_config_from_json(config_json);
    const Corpus corpus = generate(result.config, &result.stats);
    const Json resolved = synth_config_to_json(result.config);
    save_corpus(corpus, out_dir, resolved);
    write_file_atomic(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// train

struct TrainCommandConfig {
    TrainConfig train;
    std::vector<int> hidden_sizes = {32};
    bool recurrent = true;
    double head_bias_init = 0.0;

    Json to_json() const {
        return Json{{"seed", train.seed},
                    {"loss", loss_kind_name(train.loss)},
                    {"weights",
                     {{"ctl", train.weights.ctl},
                      {"mil", train.weights.mil},
                      {"strong", train.weights.strong}}},
                    {"learning_rate", train.learning_rate},
                    {"batch_size", train.batch_size},
                    {"checkpoint_every", train.checkpoint_every},
                    {"max_checkpoints", train.max_checkpoints},
                    {"balance", train.balance},
                    {"hidden_sizes", hidden_sizes},
                    {"recurrent", recurrent},
                    {"head_bias_init", head_bias_init},
                    {"max_concurrence",
                     train.ctl.max_concurrence == kUnboundedConcurrence
                         ? Json("unbounded")
                         : Json(train.ctl.max_concurrence)},
                    {"clamp_epsilon", train.ctl.clamp_epsilon}};
    }

    static TrainCommandConfig from_json(const Json& j) {
        detail::reject_unknown_keys(
            j,
            {"seed", "loss", "weights", "learning_rate", "batch_size", "checkpoint_every",
             "max_checkpoints", "balance", "hidden_sizes", "recurrent", "head_bias_init",
             "max_concurrence", "clamp_epsilon"},
            "train config");
        TrainCommandConfig cfg;
        cfg.train.seed = j.value("seed", uint64_t{0});
        cfg.train.loss = loss_kind_from_name(j.value("loss", std::string("ctl")));
        if (j.contains("weights")) {
            const auto& w = j.at("weights");
            detail::reject_unknown_keys(w, {"ctl", "mil", "strong"}, "train config weights");
            cfg.train.weights.ctl = w.value("ctl", 0.0);
            cfg.train.weights.mil = w.value("mil", 0.0);
            cfg.train.weights.strong = w.value("strong", 0.0);
        }
        cfg.train.learning_rate = j.value("learning_rate", 1e-3);
        cfg.train.batch_size = j.value("batch_size", 32);
        cfg.train.checkpoint_every = j.value("checkpoint_every", 200);
        cfg.train.max_checkpoints = j.value("max_checkpoints", 10);
        cfg.train.balance = j.value("balance", true);
        if (j.contains("max_concurrence")) {
            const auto& mc = j.at("max_concurrence");
            cfg.train.ctl.max_concurrence =
                mc.is_string() ? kUnboundedConcurrence : mc.get<int>();
        }
        cfg.train.ctl.clamp_epsilon = j.value("clamp_epsilon", 1e-6);
        cfg.hidden_sizes = j.value("hidden_sizes", std::vector<int>{32});
        cfg.recurrent = j.value("recurrent", true);
        cfg.head_bias_init = j.value("head_bias_init", 0.0);
        cfg.train.validate();
        return cfg;
    }
};

struct TrainCmdResult {
    TrainCommandConfig config;
    TrainResult train;
};

inline std::string metrics_csv(const std::vector<CheckpointRow>& log,
                               const EventVocabulary& vocab) {
    std::string csv = "checkpoint,minibatches,train_loss,val_macro_f1";
    for (const auto& name : vocab.classes) csv += ",val_f1_" + name;
    csv += ",infeasible\n";
    for (const auto& row : log) {
        csv += std::to_string(row.checkpoint) + "," + std::to_string(row.minibatches) + "," +
               fmt_double(row.train_loss) + "," + fmt_double(row.val_macro_f1);
        for (double f1 : row.per_class_f1) csv += "," + fmt_double(f1);
        csv += "," + std::to_string(row.infeasible) + "\n";
    }
    return csv;
}

inline TrainCmdResult cmd_train(const Json& config_json, const fs::path& corpus_dir,
                                const fs::path& out_dir) {
    TrainCmdResult result;
    result.config = TrainCommandConfig::from_json(config_json);
    const Corpus corpus = load_corpus(corpus_dir);

    PredictorConfig predictor;
    predictor.input_dim = corpus.feature_dim;
    predictor.hidden_sizes = result.config.hidden_sizes;
    predictor.recurrent = result.config.recurrent;
    predictor.head =
        result.config.train.loss == LossKind::Ctc ? HeadKind::Softmax : HeadKind::Sigmoid;
    predictor.num_classes = corpus.vocab.num_classes();
    predictor.head_bias_init = result.config.head_bias_init;
    predictor.seed = result.config.train.seed;

    result.train = train(predictor, result.config.train, corpus);

    SavedModel saved;
    saved.predictor = predictor;
    saved.classes = corpus.vocab.classes;
    saved.loss = loss_kind_name(result.config.train.loss);
    saved.best_checkpoint = result.train.best_checkpoint;
    saved.best_val_f1 = result.train.best_val_f1;
    saved.train_seed = result.config.train.seed;
    saved.params = result.train.best_params;

    fs::create_directories(out_dir);
    save_model(saved, out_dir / "params.bin");
    write_file_atomic(out_dir / "metrics.csv", metrics_csv(result.train.log, corpus.vocab));
    Json resolved = result.config.to_json();
    resolved["_run"] = {{"command", "train"}, {"corpus", corpus_dir.string()}};
    write_file_atomic(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmdResult {
    F1Report report;
    std::string decoder;
    std::vector<double> thresholds;                  // empty for the CTC decoder
    std::vector<DurationStats> decoded_durations;    // per class
    std::vector<DurationStats> true_durations;       // per class
};

inline EvalCmdResult cmd_eval(const fs::path& params_path, const fs::path& corpus_dir,
                              const std::string& split, const fs::path& out_dir) {
    const SavedModel model = load_model(params_path);
    const Corpus corpus = load_corpus(corpus_dir);
    if (model.classes != corpus.vocab.classes)
        throw std::runtime_error("eval: vocabulary mismatch between parameters and corpus");
    if (model.predictor.input_dim != corpus.feature_dim)
        throw std::runtime_error("eval: feature dimension mismatch");

    const Predictor predictor(model.predictor);
    const auto& target = corpus.split(split);
    if (target.empty()) throw std::runtime_error("eval: split '" + split + "' is empty");

    EvalCmdResult result;
    std::vector<Matrix> grids = compute_posteriors(predictor, model.params, target);
    std::vector<StrongLabel> truths;
    for (const auto& rec : target) truths.push_back(rec.strong);

    std::vector<StrongLabel> decoded;
    if (model.predictor.head == HeadKind::Sigmoid) {
        std::vector<Matrix> val_grids =
            compute_posteriors(predictor, model.params, corpus.validation);
        std::vector<StrongLabel> val_truths;
        for (const auto& rec : corpus.validation) val_truths.push_back(rec.strong);
        const DecodeThresholds thresholds = tune_thresholds(val_grids, val_truths);
        result.thresholds = thresholds.theta;
        result.decoder = "threshold";
        for (const auto& g : grids) decoded.push_back(decode_threshold(g, thresholds));
    } else {
        result.decoder = "ctc_innermost";
        for (const auto& g : grids) decoded.push_back(decode_ctc(g));
    }
    result.report = frame_f1(decoded, truths);
    for (int c = 0; c < corpus.vocab.num_classes(); ++c) {
        result.decoded_durations.push_back(event_duration_stats(decoded, c));
        result.true_durations.push_back(event_duration_stats(truths, c));
    }

    // report.json / report.csv
    Json report;
    report["split"] = split;
    report["decoder"] = result.decoder;
    if (!result.thresholds.empty()) report["thresholds"] = result.thresholds;
    report["macro_f1"] = result.report.macro;
    report["per_class"] = Json::array();
    for (int c = 0; c < corpus.vocab.num_classes(); ++c) {
        const auto& k = result.report.counts[c];
        report["per_class"].push_back(
            {{"class", corpus.vocab.classes[c]},
             {"f1", result.report.per_class[c]},
             {"tp", k.tp},
             {"fp", k.fp},
             {"fn", k.fn},
             {"decoded_events", result.decoded_durations[c].num_events},
             {"decoded_mean_duration", result.decoded_durations[c].mean_duration},
             {"true_events", result.true_durations[c].num_events},
             {"true_mean_duration", result.true_durations[c].mean_duration}});
    }
    std::string csv = "class,f1,tp,fp,fn\n";
    for (int c = 0; c < corpus.vocab.num_classes(); ++c) {
        const auto& k = result.report.counts[c];
        csv += corpus.vocab.classes[c] + "," + fmt_double(result.report.per_class[c]) + "," +
               std::to_string(k.tp) + "," + std::to_string(k.fp) + "," + std::to_string(k.fn) +
               "\n";
    }
    csv += "macro," + fmt_double(result.report.macro) + ",,,\n";

    // Per-frame probability dump for plotting (one row per frame).
    std::string dump = "recording,frame";
    if (model.predictor.head == HeadKind::Sigmoid) {
        for (const auto& name : corpus.vocab.classes) dump += ",p_" + name;
    } else {
        for (int c = 0; c < corpus.vocab.num_classes(); ++c) {
            dump += ",q_" + corpus.vocab.classes[c] + "_onset";
            dump += ",q_" + corpus.vocab.classes[c] + "_offset";
        }
        dump += ",q_blank";
    }
    dump += "\n";
    for (size_t r = 0; r < target.size(); ++r) {
        for (int t = 0; t < grids[r].rows(); ++t) {
            dump += target[r].id + "," + std::to_string(t);
            for (int k = 0; k < grids[r].cols(); ++k)
                dump += "," + fmt_double(grids[r](t, k), "%.8g");
            dump += "\n";
        }
    }

    fs::create_directories(out_dir);
    write_file_atomic(out_dir / ("report_" + split + ".json"), report.dump(2) + "\n");
    write_file_atomic(out_dir / ("report_" + split + ".csv"), csv);
    write_file_atomic(out_dir / ("posteriors_" + split + ".csv"), dump);
    Json resolved{{"_run", {{"command", "eval"},
                            {"params", params_path.string()},
                            {"corpus", corpus_dir.string()}}},
                  {"split", split}};
    write_file_atomic(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
    uint64_t seed = 1;
    int instances = 100;
    int max_frames = 6;
    double tolerance = 1e-4;
    double step = 1e-5;
    std::string corrupt;  // test hook: loss name whose gradient gets corrupted
};

struct GradcheckRow {
    std::string loss;
    int instances = 0;
    double max_rel_err = 0.0;
    uint64_t worst_seed = 0;
    bool ok = true;
};

struct GradcheckResult {
    std::vector<GradcheckRow> rows;
    double tolerance = 0.0;
    bool ok = true;
    std::string table;
};

namespace detail {

// Posteriors away from the clamp bounds and from the rectified-delta kink
// (|y_t - y_{t-1}| stays well above the finite-difference step).
inline Matrix kink_free_posteriors(Rng& rng, int frames, int classes) {
    Matrix y(frames, classes);
    for (int c = 0; c < classes; ++c) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            for (int t = 0; t < frames; ++t) y(t, c) = rng.uniform(0.05, 0.95);
            bool ok = true;
            for (int t = 1; t < frames; ++t)
                ok = ok && std::abs(y(t, c) - y(t - 1, c)) > 2e-3;
            if (ok) break;
        }
    }
    return y;
}

inline SequentialLabel random_sequential(Rng& rng, int frames, int classes, int max_len) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        StrongLabel mask(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) mask.set(t, c, rng.uniform() < 0.35);
        SequentialLabel seq = strong_to_sequential(mask);
        if (static_cast<int>(seq.size()) <= max_len) return seq;
    }
    return {};
}

}  // namespace detail

inline GradcheckResult cmd_gradcheck(const GradcheckOptions& opts,
                                     const fs::path& out_dir = {}) {
    GradcheckResult result;
    result.tolerance = opts.tolerance;
    const std::vector<std::string> losses = {"strong", "mil", "ctc", "ctl"};
    for (size_t li = 0; li < losses.size(); ++li) {
        const std::string& name = losses[li];
        GradcheckRow row;
        row.loss = name;
        for (int i = 0; i < opts.instances; ++i) {
            const uint64_t iseed = mix_seed(opts.seed, li * 1000003 + i);
            Rng rng(iseed);
            const int frames = rng.uniform_int(2, opts.max_frames);
            const int classes = rng.uniform_int(1, 2);

            Matrix input;
            LossResult analytic;
            std::function<double(const Matrix&)> value;
            if (name == "strong") {
                input = detail::kink_free_posteriors(rng, frames, classes);
                StrongLabel target(frames, classes);
                for (int t = 0; t < frames; ++t)
                    for (int c = 0; c < classes; ++c) target.set(t, c, rng.uniform() < 0.5);
                analytic = strong_loss(input, target);
                value = [target](const Matrix& m) { return strong_loss(m, target).loss; };
            } else if (name == "mil") {
                input = detail::kink_free_posteriors(rng, frames, classes);
                PresenceAbsenceLabel target;
                for (int c = 0; c < classes; ++c)
                    target.present.push_back(rng.uniform() < 0.5 ? 1 : 0);
                analytic = mil_loss(input, target);
                value = [target](const Matrix& m) { return mil_loss(m, target).loss; };
            } else if (name == "ctc") {
                const int symbols = 2 * classes + 1;
                SequentialLabel label;
                double lp = kLogZero;
                for (int attempt = 0; attempt < 200 && lp == kLogZero; ++attempt) {
                    input = Matrix(frames, symbols);
                    for (int t = 0; t < frames; ++t) {
                        double sum = 0.0;
                        for (int k = 0; k < symbols; ++k) {
                            input(t, k) = rng.uniform(0.05, 1.0);
                            sum += input(t, k);
                        }
                        for (int k = 0; k < symbols; ++k) input(t, k) /= sum;
                    }
                    label = detail::random_sequential(rng, frames, classes, 3);
                    lp = ctc_log_forward(input, label);
                }
                analytic = ctc_loss_and_grad(input, label);
                value = [label](const Matrix& m) { return ctc_loss_and_grad(m, label).loss; };
            } else {
                CtlConfig cfg;
                cfg.max_concurrence = 1 + static_cast<int>(rng.uniform_int(0, 2));
                SequentialLabel label;
                double lp = kLogZero;
                for (int attempt = 0; attempt < 200 && lp == kLogZero; ++attempt) {
                    input = detail::kink_free_posteriors(rng, frames, classes);
                    label = detail::random_sequential(rng, frames, classes, 4);
                    lp = ctl_log_forward(input, label, cfg);
                }
                analytic = ctl_loss_and_grad(input, label, cfg);
                value = [label, cfg](const Matrix& m) {
                    return ctl_loss_and_grad(m, label, cfg).loss;
                };
            }

            if (opts.corrupt == name) analytic.grad(0, 0) += 1e-3;
            const Matrix fd = central_differences(value, input, opts.step);
            const double err = max_relative_error(analytic.grad, fd);
            if (err > row.max_rel_err) {
                row.max_rel_err = err;
                row.worst_seed = iseed;
            }
            ++row.instances;
        }
        row.ok = row.max_rel_err < opts.tolerance;
        result.ok = result.ok && row.ok;
        result.rows.push_back(row);
    }

    std::string table = "loss,instances,max_rel_err,worst_seed,status\n";
    for (const auto& row : result.rows)
        table += row.loss + "," + std::to_string(row.instances) + "," +
                 fmt_double(row.max_rel_err, "%.3e") + "," + std::to_string(row.worst_seed) +
                 "," + (row.ok ? "pass" : "FAIL") + "\n";
    result.table = table;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file_atomic(out_dir / "gradcheck.csv", table);
    }
    return result;
}

// ---------------------------------------------------------------------------
// oracle-check

struct OracleCheckOptions {
    uint64_t seed = 1;
    int trials = 200;
    double tolerance = 1e-10;
};

struct OracleCheckResult {
    int trials = 0;
    double max_dev_ctl = 0.0;
    double max_dev_ctc = 0.0;
    uint64_t worst_seed_ctl = 0;
    uint64_t worst_seed_ctc = 0;
    double worked_example = 0.0;
    bool vacuous = false;
    bool ok = true;
    std::string table;
};

namespace detail {

inline SequentialLabel random_label_list(Rng& rng, int classes, int max_len) {
    SequentialLabel label;
    const int len = rng.uniform_int(0, max_len);
    for (int i = 0; i < len; ++i) {
        const int idx = rng.uniform_int(0, 2 * classes - 1);
        label.push_back(boundary_from_index(idx));
    }
    return label;
}

inline double relative_deviation(double dp, double bf) {
    if (bf > 0.0) return std::abs(dp - bf) / bf;
    return dp == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline OracleCheckResult cmd_oracle_check(const OracleCheckOptions& opts,
                                          const fs::path& out_dir = {}) {
    OracleCheckResult result;
    result.trials = opts.trials;
    result.vacuous = opts.trials == 0;

    // The hand-checkable case: one frame at y = 0.5 emitting onset then
    // offset has probability 0.5 * 0.5.
    {
        Matrix y(1, 1);
        y(0, 0) = 0.5;
        const SequentialLabel label = {onset(0), offset(0)};
        result.worked_example = oracle::ctl_brute_force(y, label, CtlConfig{});
    }

    const int concurrences[4] = {1, 2, 3, kUnboundedConcurrence};
    for (int i = 0; i < opts.trials; ++i) {
        const uint64_t iseed = mix_seed(opts.seed, 7000000 + i);
        Rng rng(iseed);
        const int classes = rng.uniform_int(1, 2);

        {
            const int frames = rng.uniform_int(1, 5);
            Matrix y(frames, classes);
            for (int t = 0; t < frames; ++t)
                for (int c = 0; c < classes; ++c) y(t, c) = rng.uniform();
            CtlConfig cfg;
            cfg.max_concurrence = concurrences[rng.uniform_int(0, 3)];
            const SequentialLabel label =
                rng.uniform() < 0.5 ? detail::random_sequential(rng, frames, classes, 4)
                                    : detail::random_label_list(rng, classes, 4);
            const double dev = detail::relative_deviation(
                ctl_forward(y, label, cfg), oracle::ctl_brute_force(y, label, cfg));
            if (dev > result.max_dev_ctl) {
                result.max_dev_ctl = dev;
                result.worst_seed_ctl = iseed;
            }
        }
        {
            const int frames = rng.uniform_int(1, 5);
            const int symbols = 2 * classes + 1;
            Matrix q(frames, symbols);
            for (int t = 0; t < frames; ++t) {
                double sum = 0.0;
                for (int k = 0; k < symbols; ++k) {
                    q(t, k) = rng.uniform(0.01, 1.0);
                    sum += q(t, k);
                }
                for (int k = 0; k < symbols; ++k) q(t, k) /= sum;
            }
            const SequentialLabel label =
                detail::random_label_list(rng, classes, std::min(frames, 4));
            const double dev = detail::relative_deviation(ctc_forward(q, label),
                                                          oracle::ctc_brute_force(q, label));
            if (dev > result.max_dev_ctc) {
                result.max_dev_ctc = dev;
                result.worst_seed_ctc = iseed;
            }
        }
    }

    result.ok = result.vacuous ||
                (result.max_dev_ctl < opts.tolerance && result.max_dev_ctc < opts.tolerance);

    std::string table;
    table += "worked example: P(onset,offset | T=1, y=0.5, C=1) = " +
             fmt_double(result.worked_example) + "\n";
    if (result.vacuous) {
        table += "warning: trials=0, nothing checked (vacuous pass)\n";
    } else {
        table += "model,trials,max_rel_dev,worst_seed,status\n";
        table += "ctl," + std::to_string(result.trials) + "," +
                 fmt_double(result.max_dev_ctl, "%.3e") + "," +
                 std::to_string(result.worst_seed_ctl) + "," +
                 (result.max_dev_ctl < opts.tolerance ? "pass" : "FAIL") + "\n";
        table += "ctc," + std::to_string(result.trials) + "," +
                 fmt_double(result.max_dev_ctc, "%.3e") + "," +
                 std::to_string(result.worst_seed_ctc) + "," +
                 (result.max_dev_ctc < opts.tolerance ? "pass" : "FAIL") + "\n";
    }
    result.table = table;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file_atomic(out_dir / "oracle_check.txt", table);
    }
    return result;
}

}  // namespace ctl
