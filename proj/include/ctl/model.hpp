#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctl/ctc_loss.hpp"
#include "ctl/ctl_loss.hpp"
#include "ctl/dataset.hpp"
#include "ctl/eval.hpp"
#include "ctl/labels.hpp"
#include "ctl/loss_result.hpp"
#include "ctl/matrix.hpp"
#include "ctl/rng.hpp"

namespace ctl {

enum class HeadKind { Sigmoid, Softmax };

// A per-frame MLP with an optional simple (tanh) recurrent connection on the
// last hidden layer. The sigmoid head emits one event posterior per class;
// the softmax head emits a distribution over the 2n+1 CTC symbols.
struct PredictorConfig {
    int input_dim = 8;
    std::vector<int> hidden_sizes = {32};
    bool recurrent = false;
    HeadKind head = HeadKind::Sigmoid;
    int num_classes = 2;
    // Initial bias of the output layer. Negative values start the event
    // posteriors low (a rare-event prior), which keeps recording-level
    // losses from saturating the posteriors before the frame-level
    // structure has formed.
    double head_bias_init = 0.0;
    uint64_t seed = 0;

    int output_dim() const {
        return head == HeadKind::Sigmoid ? num_classes : 2 * num_classes + 1;
    }
    void validate() const {
        if (input_dim < 1) throw std::invalid_argument("PredictorConfig: input_dim < 1");
        if (num_classes < 1) throw std::invalid_argument("PredictorConfig: num_classes < 1");
        if (hidden_sizes.empty())
            throw std::invalid_argument("PredictorConfig: at least one hidden layer required");
        for (int h : hidden_sizes)
            if (h < 1) throw std::invalid_argument("PredictorConfig: hidden size < 1");
    }
};

struct ForwardCache {
    std::vector<Matrix> acts;  // post-tanh activations per hidden layer, T x h
    Matrix probs;              // head output, T x output_dim
};

class Predictor {
  public:
    explicit Predictor(PredictorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const int layers = static_cast<int>(cfg_.hidden_sizes.size());
        int fan_in = cfg_.input_dim;
        for (int i = 0; i < layers; ++i) {
            const int width = cfg_.hidden_sizes[i];
            weight_.push_back(add_block(width, fan_in));
            bias_.push_back(add_block(width, 1));
            fan_in = width;
        }
        if (cfg_.recurrent) recurrent_ = add_block(fan_in, fan_in);
        head_weight_ = add_block(cfg_.output_dim(), fan_in);
        head_bias_ = add_block(cfg_.output_dim(), 1);
    }

    const PredictorConfig& config() const { return cfg_; }
    size_t num_params() const { return total_; }

    std::vector<double> init_params(uint64_t seed) const {
        std::vector<double> params(total_, 0.0);
        Rng rng(mix_seed(seed, 0x70617261));
        const int layers = static_cast<int>(cfg_.hidden_sizes.size());
        for (int i = 0; i < layers; ++i) fill_uniform(params, weight_[i], rng);
        if (cfg_.recurrent) fill_uniform(params, recurrent_, rng);
        fill_uniform(params, head_weight_, rng);
        for (int r = 0; r < head_bias_.rows; ++r)
            params[head_bias_.offset + r] = cfg_.head_bias_init;
        return params;  // hidden biases start at zero
    }

    // Frame-wise probabilities for one recording (features: T x input_dim).
    Matrix forward(const std::vector<double>& params, const Matrix& x,
                   ForwardCache* cache = nullptr) const {
        if (params.size() != total_) throw std::invalid_argument("Predictor: bad param vector");
        if (x.cols() != cfg_.input_dim)
            throw std::invalid_argument("Predictor: feature dim mismatch");
        const int frames = x.rows();
        const int layers = static_cast<int>(cfg_.hidden_sizes.size());
        const int last = layers - 1;
        std::vector<Matrix> acts(layers);
        for (int i = 0; i < layers; ++i) acts[i] = Matrix(frames, cfg_.hidden_sizes[i]);

        for (int t = 0; t < frames; ++t) {
            const double* in = x.row(t);
            for (int i = 0; i < layers; ++i) {
                const int width = cfg_.hidden_sizes[i];
                double* out = acts[i].row(t);
                affine(params, weight_[i], bias_[i], in, out);
                if (cfg_.recurrent && i == last && t > 0)
                    accumulate(params, recurrent_, acts[i].row(t - 1), out);
                for (int u = 0; u < width; ++u) out[u] = std::tanh(out[u]);
                in = out;
            }
        }

        const int out_dim = cfg_.output_dim();
        Matrix probs(frames, out_dim);
        for (int t = 0; t < frames; ++t) {
            double* row = probs.row(t);
            affine(params, head_weight_, head_bias_, acts[last].row(t), row);
            if (cfg_.head == HeadKind::Sigmoid) {
                for (int u = 0; u < out_dim; ++u) row[u] = 1.0 / (1.0 + std::exp(-row[u]));
            } else {
                double hi = row[0];
                for (int u = 1; u < out_dim; ++u) hi = std::max(hi, row[u]);
                double sum = 0.0;
                for (int u = 0; u < out_dim; ++u) {
                    row[u] = std::exp(row[u] - hi);
                    sum += row[u];
                }
                for (int u = 0; u < out_dim; ++u) row[u] /= sum;
            }
        }
        if (cache) {
            cache->acts = std::move(acts);
            cache->probs = probs;
        }
        return probs;
    }

    // Parameter gradient for one recording, given d loss / d probs.
    // Accumulates into grad (so batch members can share one buffer).
    void backward(const std::vector<double>& params, const Matrix& x, const ForwardCache& cache,
                  const Matrix& grad_probs, std::vector<double>& grad) const {
        if (grad.size() != total_) grad.assign(total_, 0.0);
        const int frames = x.rows();
        const int layers = static_cast<int>(cfg_.hidden_sizes.size());
        const int last = layers - 1;
        const int out_dim = cfg_.output_dim();

        // Head: probabilities -> logits.
        Matrix dlogits(frames, out_dim);
        for (int t = 0; t < frames; ++t) {
            const double* p = cache.probs.row(t);
            const double* g = grad_probs.row(t);
            double* dl = dlogits.row(t);
            if (cfg_.head == HeadKind::Sigmoid) {
                for (int u = 0; u < out_dim; ++u) dl[u] = g[u] * p[u] * (1.0 - p[u]);
            } else {
                double dot = 0.0;
                for (int u = 0; u < out_dim; ++u) dot += g[u] * p[u];
                for (int u = 0; u < out_dim; ++u) dl[u] = p[u] * (g[u] - dot);
            }
        }

        std::vector<Matrix> dacts(layers);
        for (int i = 0; i < layers; ++i) dacts[i] = Matrix(frames, cfg_.hidden_sizes[i]);
        for (int t = 0; t < frames; ++t) {
            outer_acc(grad, head_weight_, dlogits.row(t), cache.acts[last].row(t));
            bias_acc(grad, head_bias_, dlogits.row(t));
            matvec_t_acc(params, head_weight_, dlogits.row(t), dacts[last].row(t));
        }

        // Hidden layers, last first; the last one may be recurrent (BPTT).
        for (int i = last; i >= 0; --i) {
            const int width = cfg_.hidden_sizes[i];
            const bool rec = cfg_.recurrent && i == last;
            for (int t = frames - 1; t >= 0; --t) {
                double* da = dacts[i].row(t);
                const double* a = cache.acts[i].row(t);
                std::vector<double> dpre(width);
                for (int u = 0; u < width; ++u) dpre[u] = da[u] * (1.0 - a[u] * a[u]);
                const double* below =
                    i == 0 ? x.row(t) : cache.acts[i - 1].row(t);
                outer_acc(grad, weight_[i], dpre.data(), below);
                bias_acc(grad, bias_[i], dpre.data());
                if (i > 0) matvec_t_acc(params, weight_[i], dpre.data(), dacts[i - 1].row(t));
                if (rec && t > 0) {
                    outer_acc(grad, recurrent_, dpre.data(), cache.acts[i].row(t - 1));
                    matvec_t_acc(params, recurrent_, dpre.data(), dacts[i].row(t - 1));
                }
            }
        }
    }

  private:
    struct Block {
        size_t offset = 0;
        int rows = 0;
        int cols = 0;
    };

    Block add_block(int rows, int cols) {
        Block b{total_, rows, cols};
        total_ += static_cast<size_t>(rows) * cols;
        return b;
    }

    static void fill_uniform(std::vector<double>& params, const Block& b, Rng& rng) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(b.cols));
        for (size_t i = 0; i < static_cast<size_t>(b.rows) * b.cols; ++i)
            params[b.offset + i] = rng.uniform(-scale, scale);
    }

    // out = W in + bias
    void affine(const std::vector<double>& params, const Block& w, const Block& b,
                const double* in, double* out) const {
        const double* wp = params.data() + w.offset;
        const double* bp = params.data() + b.offset;
        for (int r = 0; r < w.rows; ++r) {
            double acc = bp[r];
            const double* wr = wp + static_cast<size_t>(r) * w.cols;
            for (int c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
            out[r] = acc;
        }
    }

    // out += W in
    void accumulate(const std::vector<double>& params, const Block& w, const double* in,
                    double* out) const {
        const double* wp = params.data() + w.offset;
        for (int r = 0; r < w.rows; ++r) {
            double acc = 0.0;
            const double* wr = wp + static_cast<size_t>(r) * w.cols;
            for (int c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
            out[r] += acc;
        }
    }

    // grad[W] += d outer in
    static void outer_acc(std::vector<double>& grad, const Block& w, const double* d,
                          const double* in) {
        double* gp = grad.data() + w.offset;
        for (int r = 0; r < w.rows; ++r) {
            double* gr = gp + static_cast<size_t>(r) * w.cols;
            const double dr = d[r];
            for (int c = 0; c < w.cols; ++c) gr[c] += dr * in[c];
        }
    }

    static void bias_acc(std::vector<double>& grad, const Block& b, const double* d) {
        double* gp = grad.data() + b.offset;
        for (int r = 0; r < b.rows; ++r) gp[r] += d[r];
    }

    // out += W^T d
    static void matvec_t_acc(const std::vector<double>& params, const Block& w, const double* d,
                             double* out) {
        const double* wp = params.data() + w.offset;
        for (int r = 0; r < w.rows; ++r) {
            const double* wr = wp + static_cast<size_t>(r) * w.cols;
            const double dr = d[r];
            for (int c = 0; c < w.cols; ++c) out[c] += dr * wr[c];
        }
    }

    PredictorConfig cfg_;
    std::vector<Block> weight_, bias_;
    Block recurrent_{}, head_weight_{}, head_bias_{};
    size_t total_ = 0;
};

// ---------------------------------------------------------------------------
// Losses on the predictor outputs.

inline constexpr double kBceEps = 1e-12;

// Frame-wise binary cross-entropy against a strong label, averaged over
// frames and classes.
inline LossResult strong_loss(const PosteriorGrid& y, const StrongLabel& target) {
    if (y.rows() != target.frames || y.cols() != target.classes)
        throw std::invalid_argument("strong_loss: shape mismatch");
    const double norm = 1.0 / (static_cast<double>(y.rows()) * y.cols());
    LossResult out{0.0, Matrix(y.rows(), y.cols())};
    for (int t = 0; t < y.rows(); ++t) {
        for (int c = 0; c < y.cols(); ++c) {
            const double p = std::clamp(y(t, c), kBceEps, 1.0 - kBceEps);
            const double m = target.at(t, c) ? 1.0 : 0.0;
            out.loss -= norm * (m * std::log(p) + (1.0 - m) * std::log1p(-p));
            out.grad(t, c) = norm * (p - m) / (p * (1.0 - p));
        }
    }
    return out;
}

// Linear softmax pooling: pooled_c = sum_t y^2 / sum_t y, 0 on silence.
inline std::vector<double> mil_pool(const PosteriorGrid& y) {
    if (y.rows() < 1) throw std::invalid_argument("mil_pool: no frames");
    std::vector<double> pooled(y.cols(), 0.0);
    for (int c = 0; c < y.cols(); ++c) {
        double sum = 0.0, sum_sq = 0.0;
        for (int t = 0; t < y.rows(); ++t) {
            sum += y(t, c);
            sum_sq += y(t, c) * y(t, c);
        }
        pooled[c] = sum > 0.0 ? sum_sq / sum : 0.0;
    }
    return pooled;
}

// Presence/absence binary cross-entropy on the pooled probabilities, summed
// over classes, with the gradient carried back through the pooling.
inline LossResult mil_loss(const PosteriorGrid& y, const PresenceAbsenceLabel& target) {
    if (static_cast<int>(target.present.size()) != y.cols())
        throw std::invalid_argument("mil_loss: class count mismatch");
    const std::vector<double> pooled = mil_pool(y);
    LossResult out{0.0, Matrix(y.rows(), y.cols())};
    for (int c = 0; c < y.cols(); ++c) {
        const double p = std::clamp(pooled[c], kBceEps, 1.0 - kBceEps);
        const double m = target.present[c] ? 1.0 : 0.0;
        out.loss -= m * std::log(p) + (1.0 - m) * std::log1p(-p);
        double sum = 0.0;
        for (int t = 0; t < y.rows(); ++t) sum += y(t, c);
        if (sum <= 0.0) continue;
        const double dpooled = (p - m) / (p * (1.0 - p));
        for (int t = 0; t < y.rows(); ++t)
            out.grad(t, c) = dpooled * (2.0 * y(t, c) - pooled[c]) / sum;
    }
    return out;
}

// Weighted sum of losses computed on one shared output grid.
inline LossResult combined_loss(const std::vector<std::pair<LossResult, double>>& parts) {
    if (parts.empty()) throw std::invalid_argument("combined_loss: nothing to combine");
    LossResult out{0.0, Matrix(parts[0].first.grad.rows(), parts[0].first.grad.cols())};
    for (const auto& [part, weight] : parts) {
        if (!part.grad.same_shape(out.grad))
            throw std::invalid_argument("combined_loss: gradient shape mismatch");
        out.loss += weight * part.loss;
        for (int t = 0; t < out.grad.rows(); ++t)
            for (int c = 0; c < out.grad.cols(); ++c)
                out.grad(t, c) += weight * part.grad(t, c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training.

enum class LossKind { Strong, Mil, Ctc, Ctl, Combo };

inline std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::Strong: return "strong";
        case LossKind::Mil: return "mil";
        case LossKind::Ctc: return "ctc";
        case LossKind::Ctl: return "ctl";
        case LossKind::Combo: return "combo";
    }
    return "?";
}

inline LossKind loss_kind_from_name(const std::string& name) {
    if (name == "strong") return LossKind::Strong;
    if (name == "mil") return LossKind::Mil;
    if (name == "ctc") return LossKind::Ctc;
    if (name == "ctl") return LossKind::Ctl;
    if (name == "combo") return LossKind::Combo;
    throw std::invalid_argument("unknown loss '" + name + "' (want strong|mil|ctc|ctl|combo)");
}

struct LossWeights {
    double ctl = 0.0;
    double mil = 0.0;
    double strong = 0.0;
};

struct TrainConfig {
    LossKind loss = LossKind::Ctl;
    LossWeights weights;  // used when loss == Combo
    double learning_rate = 1e-3;
    int batch_size = 32;
    int checkpoint_every = 200;  // minibatches between validation checkpoints
    int max_checkpoints = 10;
    bool balance = true;  // per-class round-robin minibatch sampling
    uint64_t seed = 0;
    CtlConfig ctl;

    void validate() const {
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: negative learning_rate");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
        if (checkpoint_every < 1) throw std::invalid_argument("TrainConfig: checkpoint_every < 1");
        if (max_checkpoints < 1) throw std::invalid_argument("TrainConfig: max_checkpoints < 1");
        if (weights.ctl < 0 || weights.mil < 0 || weights.strong < 0)
            throw std::invalid_argument("TrainConfig: negative loss weight");
        if (loss == LossKind::Combo && weights.ctl + weights.mil + weights.strong <= 0.0)
            throw std::invalid_argument("TrainConfig: combo needs at least one positive weight");
        ctl.validate();
    }
};

struct AdamOptimizer {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m, v;
    long long step = 0;

    void update(std::vector<double>& params, const std::vector<double>& grad) {
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + epsilon);
        }
    }
};

// Loss of one recording given the predictor's output grid.
inline LossResult recording_loss(const TrainConfig& cfg, const Matrix& probs,
                                 const Recording& rec) {
    switch (cfg.loss) {
        case LossKind::Strong: return strong_loss(probs, rec.strong);
        case LossKind::Mil: return mil_loss(probs, rec.presence);
        case LossKind::Ctc: return ctc_loss_and_grad(probs, rec.sequential);
        case LossKind::Ctl: return ctl_loss_and_grad(probs, rec.sequential, cfg.ctl);
        case LossKind::Combo: {
            std::vector<std::pair<LossResult, double>> parts;
            if (cfg.weights.ctl > 0)
                parts.emplace_back(ctl_loss_and_grad(probs, rec.sequential, cfg.ctl),
                                   cfg.weights.ctl);
            if (cfg.weights.mil > 0)
                parts.emplace_back(mil_loss(probs, rec.presence), cfg.weights.mil);
            if (cfg.weights.strong > 0)
                parts.emplace_back(strong_loss(probs, rec.strong), cfg.weights.strong);
            return combined_loss(parts);
        }
    }
    throw std::logic_error("recording_loss: unreachable");
}

struct CheckpointRow {
    int checkpoint = 0;
    long long minibatches = 0;
    double train_loss = 0.0;
    double val_macro_f1 = 0.0;
    std::vector<double> per_class_f1;
    long long infeasible = 0;  // recordings skipped because P(L) = 0
};

struct TrainResult {
    PredictorConfig predictor;
    std::vector<double> best_params;
    int best_checkpoint = 0;
    double best_val_f1 = 0.0;
    std::vector<CheckpointRow> log;
};

namespace detail {

// Deterministic minibatch source. Balanced mode cycles the classes and draws
// the next recording containing that class from a per-class shuffled queue;
// recordings with several classes sit in several queues. Classes absent from
// the split are skipped; if no class has any recording the sampler falls back
// to plain shuffled passes.
class MinibatchSampler {
  public:
    MinibatchSampler(const std::vector<Recording>& recs, int num_classes, bool balance,
                     uint64_t seed)
        : recs_(recs), rng_(mix_seed(seed, 0x73616d70)) {
        if (balance) {
            for (int c = 0; c < num_classes; ++c) {
                std::vector<int> members;
                for (int i = 0; i < static_cast<int>(recs.size()); ++i)
                    if (recs[i].presence.present[c]) members.push_back(i);
                if (!members.empty()) queues_.push_back({std::move(members), {}, 0});
            }
        }
        if (queues_.empty()) {
            std::vector<int> all(recs.size());
            for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
            queues_.push_back({std::move(all), {}, 0});
        }
    }

    const Recording& next() {
        Queue& q = queues_[turn_];
        turn_ = (turn_ + 1) % queues_.size();
        if (q.cursor >= q.shuffled.size()) {
            q.shuffled = q.members;
            rng_.shuffle(q.shuffled);
            q.cursor = 0;
        }
        return recs_[q.shuffled[q.cursor++]];
    }

  private:
    struct Queue {
        std::vector<int> members;
        std::vector<int> shuffled;
        size_t cursor = 0;
    };
    const std::vector<Recording>& recs_;
    Rng rng_;
    std::vector<Queue> queues_;
    size_t turn_ = 0;
};

}  // namespace detail

inline std::vector<Matrix> compute_posteriors(const Predictor& predictor,
                                              const std::vector<double>& params,
                                              const std::vector<Recording>& recs) {
    std::vector<Matrix> out;
    out.reserve(recs.size());
    for (const auto& rec : recs) out.push_back(predictor.forward(params, rec.features));
    return out;
}

// Validation metric for one parameter vector: frame-level macro F1 with
// per-class thresholds tuned on the same validation grids (sigmoid heads) or
// innermost-pair decoding (CTC head).
inline F1Report validation_f1(const Predictor& predictor, const std::vector<double>& params,
                              const std::vector<Recording>& validation) {
    std::vector<Matrix> grids = compute_posteriors(predictor, params, validation);
    std::vector<StrongLabel> truths;
    truths.reserve(validation.size());
    for (const auto& rec : validation) truths.push_back(rec.strong);
    std::vector<StrongLabel> decoded;
    decoded.reserve(grids.size());
    if (predictor.config().head == HeadKind::Sigmoid) {
        const DecodeThresholds thresholds = tune_thresholds(grids, truths);
        for (const auto& g : grids) decoded.push_back(decode_threshold(g, thresholds));
    } else {
        for (const auto& g : grids) decoded.push_back(decode_ctc(g));
    }
    return frame_f1(decoded, truths);
}

// Minibatch Adam over the training split; after every checkpoint_every
// minibatches evaluates validation macro F1 and keeps the best parameters.
// Aborts with a diagnostic if the loss stops being finite.
inline TrainResult train(const PredictorConfig& predictor_cfg, const TrainConfig& train_cfg,
                         const Corpus& corpus) {
    predictor_cfg.validate();
    train_cfg.validate();
    const bool want_softmax = train_cfg.loss == LossKind::Ctc;
    if (want_softmax != (predictor_cfg.head == HeadKind::Softmax))
        throw std::invalid_argument("train: predictor head does not match the selected loss");
    if (corpus.train.empty() || corpus.validation.empty())
        throw std::invalid_argument("train: corpus needs train and validation recordings");

    Predictor predictor(predictor_cfg);
    std::vector<double> params = predictor.init_params(predictor_cfg.seed);
    AdamOptimizer adam;
    adam.learning_rate = train_cfg.learning_rate;
    detail::MinibatchSampler sampler(corpus.train, corpus.vocab.num_classes(), train_cfg.balance,
                                     train_cfg.seed);

    TrainResult result;
    result.predictor = predictor_cfg;
    result.best_params = params;
    result.best_val_f1 = -1.0;

    std::vector<double> grad(predictor.num_params(), 0.0);
    double window_loss = 0.0;
    long long window_batches = 0;
    long long window_infeasible = 0;
    const double scale = 1.0 / train_cfg.batch_size;

    for (int checkpoint = 1; checkpoint <= train_cfg.max_checkpoints; ++checkpoint) {
        for (int step = 0; step < train_cfg.checkpoint_every; ++step) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (int b = 0; b < train_cfg.batch_size; ++b) {
                const Recording& rec = sampler.next();
                ForwardCache cache;
                predictor.forward(params, rec.features, &cache);
                LossResult lr;
                try {
                    lr = recording_loss(train_cfg, cache.probs, rec);
                } catch (const std::domain_error&) {
                    // An infeasible sequence has infinite loss and no usable
                    // gradient; skip the recording rather than abort.
                    ++window_infeasible;
                    continue;
                }
                batch_loss += scale * lr.loss;
                for (int t = 0; t < lr.grad.rows(); ++t)
                    for (int c = 0; c < lr.grad.cols(); ++c) lr.grad(t, c) *= scale;
                predictor.backward(params, rec.features, cache, lr.grad, grad);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at checkpoint " +
                                         std::to_string(checkpoint) + ", minibatch " +
                                         std::to_string(step + 1) + "; aborting");
            adam.update(params, grad);
            window_loss += batch_loss;
            ++window_batches;
        }
        const F1Report report = validation_f1(predictor, params, corpus.validation);
        CheckpointRow row;
        row.checkpoint = checkpoint;
        row.minibatches = static_cast<long long>(checkpoint) * train_cfg.checkpoint_every;
        row.train_loss = window_loss / static_cast<double>(window_batches);
        row.val_macro_f1 = report.macro;
        row.per_class_f1 = report.per_class;
        row.infeasible = window_infeasible;
        result.log.push_back(row);
        window_loss = 0.0;
        window_batches = 0;
        window_infeasible = 0;
        if (report.macro > result.best_val_f1) {
            result.best_val_f1 = report.macro;
            result.best_checkpoint = checkpoint;
            result.best_params = params;
        }
    }
    return result;
}

}  // namespace ctl
