#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctl/labels.hpp"
#include "ctl/logspace.hpp"
#include "ctl/loss_result.hpp"
#include "ctl/matrix.hpp"

namespace ctl {

// Frame-wise symbol distribution for CTC: frames x (2n+1), each row a
// probability distribution over the 2n boundary labels plus blank (last
// column). Validation is separate from the loss so finite-difference probes
// (which perturb single entries) stay well-defined.
using CtcGrid = Matrix;

inline void validate_ctc_grid(const CtcGrid& q, double row_sum_tol = 1e-6) {
    for (int t = 0; t < q.rows(); ++t) {
        double sum = 0.0;
        for (int k = 0; k < q.cols(); ++k) {
            if (!(q(t, k) >= 0.0 && q(t, k) <= 1.0))
                throw std::invalid_argument("CtcGrid: entry outside [0, 1]");
            sum += q(t, k);
        }
        if (std::abs(sum - 1.0) > row_sum_tol)
            throw std::invalid_argument("CtcGrid: row does not sum to 1");
    }
}

namespace detail {

// Blank-augmented label sequence: blank, l_1, blank, l_2, ..., l_m, blank.
inline std::vector<int> ctc_extended_labels(const std::vector<int>& pos, int blank) {
    std::vector<int> ext(2 * pos.size() + 1, blank);
    for (size_t i = 0; i < pos.size(); ++i) ext[2 * i + 1] = pos[i];
    return ext;
}

inline std::vector<std::vector<double>> ctc_alpha(const CtcGrid& q, const std::vector<int>& ext,
                                                  int blank) {
    const int frames = q.rows();
    const int states = static_cast<int>(ext.size());
    std::vector<std::vector<double>> alpha(frames, std::vector<double>(states, kLogZero));
    if (frames == 0) return alpha;
    alpha[0][0] = safe_log(q(0, ext[0]));
    if (states > 1) alpha[0][1] = safe_log(q(0, ext[1]));
    for (int t = 1; t < frames; ++t) {
        for (int s = 0; s < states; ++s) {
            double acc = alpha[t - 1][s];
            if (s >= 1) acc = log_add(acc, alpha[t - 1][s - 1]);
            if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
                acc = log_add(acc, alpha[t - 1][s - 2]);
            if (acc != kLogZero) acc += safe_log(q(t, ext[s]));
            alpha[t][s] = acc;
        }
    }
    return alpha;
}

}  // namespace detail

// Total probability that the CTC model emits an alignment collapsing to the
// given label sequence, in log space. Returns kLogZero for infeasible pairs
// (e.g. the sequence plus its required separating blanks exceeds T).
inline double ctc_log_forward(const CtcGrid& q, const SequentialLabel& label) {
    const int num_symbols = q.cols();
    const int blank = num_symbols - 1;
    std::vector<int> pos;
    pos.reserve(label.size());
    for (const auto& l : label) {
        const int idx = boundary_index(l);
        if (idx < 0 || idx >= blank)
            throw std::invalid_argument("ctc_log_forward: label outside vocabulary");
        pos.push_back(idx);
    }
    if (q.rows() == 0) return pos.empty() ? 0.0 : kLogZero;
    const auto ext = detail::ctc_extended_labels(pos, blank);
    const auto alpha = detail::ctc_alpha(q, ext, blank);
    const auto& last = alpha.back();
    double lp = last[ext.size() - 1];
    if (ext.size() > 1) lp = log_add(lp, last[ext.size() - 2]);
    return lp;
}

inline double ctc_forward(const CtcGrid& q, const SequentialLabel& label) {
    const double lp = ctc_log_forward(q, label);
    return lp == kLogZero ? 0.0 : std::exp(lp);
}

// Loss -log P(L) and its gradient with respect to the symbol probabilities q,
// from the forward-backward decomposition. The gradient is computed from the
// lattice inflow rather than alpha / q, so it is exact even where q = 0.
// Throws std::domain_error when P(L) = 0.
inline LossResult ctc_loss_and_grad(const CtcGrid& q, const SequentialLabel& label) {
    const int frames = q.rows();
    const int num_symbols = q.cols();
    const int blank = num_symbols - 1;
    std::vector<int> pos;
    pos.reserve(label.size());
    for (const auto& l : label) {
        const int idx = boundary_index(l);
        if (idx < 0 || idx >= blank)
            throw std::invalid_argument("ctc_loss_and_grad: label outside vocabulary");
        pos.push_back(idx);
    }
    if (frames == 0) {
        if (!pos.empty())
            throw std::domain_error("ctc_loss_and_grad: label sequence has probability 0");
        return {0.0, Matrix(0, num_symbols)};
    }
    const auto ext = detail::ctc_extended_labels(pos, blank);
    const int states = static_cast<int>(ext.size());
    const auto alpha = detail::ctc_alpha(q, ext, blank);

    double log_total = alpha[frames - 1][states - 1];
    if (states > 1) log_total = log_add(log_total, alpha[frames - 1][states - 2]);
    if (log_total == kLogZero)
        throw std::domain_error("ctc_loss_and_grad: label sequence has probability 0");

    // beta[t][s]: completion probability from state s after frame t's
    // emission, so P = sum_s alpha[t][s] * beta[t][s] at every t.
    std::vector<std::vector<double>> beta(frames, std::vector<double>(states, kLogZero));
    beta[frames - 1][states - 1] = 0.0;
    if (states > 1) beta[frames - 1][states - 2] = 0.0;
    for (int t = frames - 2; t >= 0; --t) {
        for (int s = 0; s < states; ++s) {
            double acc = beta[t + 1][s] + safe_log(q(t + 1, ext[s]));
            if (s + 1 < states)
                acc = log_add(acc, beta[t + 1][s + 1] + safe_log(q(t + 1, ext[s + 1])));
            if (s + 2 < states && ext[s + 2] != blank && ext[s + 2] != ext[s])
                acc = log_add(acc, beta[t + 1][s + 2] + safe_log(q(t + 1, ext[s + 2])));
            beta[t][s] = acc;
        }
    }

    Matrix grad(frames, num_symbols, 0.0);
    for (int t = 0; t < frames; ++t) {
        for (int s = 0; s < states; ++s) {
            double log_inflow;
            if (t == 0) {
                log_inflow = (s <= 1) ? 0.0 : kLogZero;
            } else {
                log_inflow = alpha[t - 1][s];
                if (s >= 1) log_inflow = log_add(log_inflow, alpha[t - 1][s - 1]);
                if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
                    log_inflow = log_add(log_inflow, alpha[t - 1][s - 2]);
            }
            if (log_inflow == kLogZero || beta[t][s] == kLogZero) continue;
            grad(t, ext[s]) -= std::exp(log_inflow + beta[t][s] - log_total);
        }
    }
    return {-log_total, std::move(grad)};
}

}  // namespace ctl
