#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ctl/labels.hpp"
#include "ctl/logspace.hpp"
#include "ctl/loss_result.hpp"
#include "ctl/matrix.hpp"

namespace ctl {

// Event posteriors y_t(E): frames x classes, entries in [0, 1]. The virtual
// frames y_0 = y_{T+1} = 0 are implied, never stored.
using PosteriorGrid = Matrix;

// Boundary probabilities z_t(l): (T+1) x 2n, t = 1..T+1 stored at row t-1.
using BoundaryGrid = Matrix;

inline constexpr int kUnboundedConcurrence = std::numeric_limits<int>::max();

struct CtlConfig {
    // Maximum number of boundary labels one frame may emit.
    int max_concurrence = 1;
    // Posteriors are clamped to [clamp_epsilon, 1 - clamp_epsilon] before the
    // rectified delta so that delta = z / (1 - z) stays finite.
    double clamp_epsilon = 1e-6;

    void validate() const {
        if (max_concurrence < 1) throw std::invalid_argument("CtlConfig: max_concurrence < 1");
        if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5))
            throw std::invalid_argument("CtlConfig: clamp_epsilon outside (0, 0.5)");
    }
};

inline void validate_posterior_grid(const PosteriorGrid& y) {
    for (int t = 0; t < y.rows(); ++t)
        for (int c = 0; c < y.cols(); ++c)
            if (!(y(t, c) >= 0.0 && y(t, c) <= 1.0))
                throw std::invalid_argument("PosteriorGrid: entry outside [0, 1]");
}

// Rectified delta (boundary probabilities from event posteriors):
//   z_t(onset)  = max(0, y_t - y_{t-1})
//   z_t(offset) = max(0, y_{t-1} - y_t)
// for t = 1..T+1 with y_0 = y_{T+1} = 0. Stored posteriors are clamped to
// [clamp_epsilon, 1 - clamp_epsilon]; the virtual frames stay exactly 0.
inline BoundaryGrid rectified_delta(const PosteriorGrid& y, double clamp_epsilon = 1e-6) {
    const int frames = y.rows();
    const int classes = y.cols();
    BoundaryGrid z(frames + 1, 2 * classes);
    const auto clamped = [&](int t, int c) {  // t is 1-based; 0 and T+1 are virtual
        if (t < 1 || t > frames) return 0.0;
        return std::clamp(y(t - 1, c), clamp_epsilon, 1.0 - clamp_epsilon);
    };
    for (int c = 0; c < classes; ++c) {
        for (int t = 1; t <= frames + 1; ++t) {
            const double d = clamped(t, c) - clamped(t - 1, c);
            z(t - 1, 2 * c) = d > 0.0 ? d : 0.0;
            z(t - 1, 2 * c + 1) = d < 0.0 ? -d : 0.0;
        }
    }
    return z;
}

// Per-frame emission terms derived from a boundary grid:
//   eps_t = prod_l (1 - z_t(l))        probability of emitting nothing
//   delta_t(l) = z_t(l) / (1 - z_t(l)) odds factor of boundary l
// The probability of emitting the set {l_1..l_k} at frame t is
// eps_t * prod_i delta_t(l_i); kept in log space for the recurrence.
struct EmissionTerms {
    std::vector<double> log_eps;  // one per row of z
    Matrix log_delta;             // same shape as z

    double eps(int row) const { return std::exp(log_eps[row]); }
    double delta(int row, int label) const { return std::exp(log_delta(row, label)); }
};

inline EmissionTerms emission_terms(const BoundaryGrid& z) {
    EmissionTerms out;
    out.log_eps.assign(z.rows(), 0.0);
    out.log_delta = Matrix(z.rows(), z.cols(), kLogZero);
    for (int r = 0; r < z.rows(); ++r) {
        for (int l = 0; l < z.cols(); ++l) {
            const double v = z(r, l);
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("BoundaryGrid: entry outside [0, 1]");
            if (v >= 1.0)
                throw std::domain_error(
                    "emission_terms: z == 1 survived clamping; delta would be infinite");
            out.log_eps[r] += std::log1p(-v);
            out.log_delta(r, l) = safe_log(v) - std::log1p(-v);
        }
    }
    return out;
}

namespace detail {

// Longest window of pairwise-distinct labels ending at each position. A frame
// emits a *set* of boundaries, so a transition may consume a run of labels
// from L only if they are pairwise distinct; this caps the usable group size
// independently of max_concurrence.
inline std::vector<int> distinct_span_ending_at(const std::vector<int>& pos, int num_labels) {
    std::vector<int> last(num_labels, -1);
    std::vector<int> span(pos.size());
    int left = 0;
    for (int k = 0; k < static_cast<int>(pos.size()); ++k) {
        left = std::max(left, last[pos[k]] + 1);
        span[k] = k - left + 1;
        last[pos[k]] = k;
    }
    return span;
}

inline std::vector<int> distinct_span_starting_at(std::vector<int> pos, int num_labels) {
    std::reverse(pos.begin(), pos.end());
    auto rev = distinct_span_ending_at(pos, num_labels);
    std::reverse(rev.begin(), rev.end());
    return rev;
}

// Forward lattice over the emission terms. alpha[t][i] (log) is the
// probability of having emitted exactly the first i labels of L after t
// frames, with the shared eps factors divided out (they are multiplied back
// in as sum(log_eps) at the end; every path uses every frame's eps exactly
// once). Rows t = 0..T+1, columns i = 0..|L|.
inline std::vector<std::vector<double>> ctl_alpha(const EmissionTerms& em,
                                                  const std::vector<int>& pos,
                                                  const std::vector<int>& span_end,
                                                  int max_concurrence) {
    const int rows = static_cast<int>(em.log_eps.size());  // T + 1
    const int m = static_cast<int>(pos.size());
    std::vector<std::vector<double>> alpha(rows + 1, std::vector<double>(m + 1, kLogZero));
    alpha[0][0] = 0.0;
    for (int t = 1; t <= rows; ++t) {
        const auto& prev = alpha[t - 1];
        auto& cur = alpha[t];
        for (int i = 0; i <= m; ++i) {
            double acc = prev[i];  // empty emission
            const int jmax = std::min({i, max_concurrence, i > 0 ? span_end[i - 1] : 0});
            double group = 0.0;
            for (int j = 1; j <= jmax; ++j) {
                group += em.log_delta(t - 1, pos[i - j]);
                if (group == kLogZero) break;
                acc = log_add(acc, prev[i - j] + group);
            }
            cur[i] = acc;
        }
    }
    return alpha;
}

}  // namespace detail

// Total probability of emitting the label sequence L, in log space.
// Returns kLogZero when no emission pattern can produce L.
inline double ctl_log_forward(const PosteriorGrid& y, const SequentialLabel& label,
                              const CtlConfig& cfg = {}) {
    cfg.validate();
    validate_posterior_grid(y);
    const int num_labels = 2 * y.cols();
    std::vector<int> pos;
    pos.reserve(label.size());
    for (const auto& l : label) {
        const int idx = boundary_index(l);
        if (idx < 0 || idx >= num_labels)
            throw std::invalid_argument("ctl_log_forward: label outside vocabulary");
        pos.push_back(idx);
    }
    const auto em = emission_terms(rectified_delta(y, cfg.clamp_epsilon));
    const auto span_end = detail::distinct_span_ending_at(pos, num_labels);
    const auto alpha = detail::ctl_alpha(em, pos, span_end, cfg.max_concurrence);
    const double tail = alpha.back()[pos.size()];
    if (tail == kLogZero) return kLogZero;
    double log_eps_total = 0.0;
    for (double le : em.log_eps) log_eps_total += le;
    return log_eps_total + tail;
}

inline double ctl_forward(const PosteriorGrid& y, const SequentialLabel& label,
                          const CtlConfig& cfg = {}) {
    const double lp = ctl_log_forward(y, label, cfg);
    return lp == kLogZero ? 0.0 : std::exp(lp);
}

// Loss -log P(L) and its exact gradient with respect to every y_t(E),
// differentiating through the clamp, the rectified delta (subgradient 0 at
// the max(0, .) kink), the emission terms and the forward recurrence.
// Throws std::domain_error when P(L) = 0 (the loss would be infinite).
inline LossResult ctl_loss_and_grad(const PosteriorGrid& y, const SequentialLabel& label,
                                    const CtlConfig& cfg = {}) {
    cfg.validate();
    validate_posterior_grid(y);
    const int frames = y.rows();
    const int classes = y.cols();
    const int num_labels = 2 * classes;
    const int m = static_cast<int>(label.size());
    std::vector<int> pos;
    pos.reserve(m);
    for (const auto& l : label) {
        const int idx = boundary_index(l);
        if (idx < 0 || idx >= num_labels)
            throw std::invalid_argument("ctl_loss_and_grad: label outside vocabulary");
        pos.push_back(idx);
    }

    const BoundaryGrid z = rectified_delta(y, cfg.clamp_epsilon);
    const EmissionTerms em = emission_terms(z);
    const auto span_end = detail::distinct_span_ending_at(pos, num_labels);
    const auto span_start = detail::distinct_span_starting_at(pos, num_labels);
    const auto alpha = detail::ctl_alpha(em, pos, span_end, cfg.max_concurrence);

    const int rows = frames + 1;  // z rows, t = 1..T+1
    const double log_total = alpha[rows][m];
    if (log_total == kLogZero)
        throw std::domain_error("ctl_loss_and_grad: label sequence has probability 0");

    double log_eps_total = 0.0;
    for (double le : em.log_eps) log_eps_total += le;
    const double loss = -(log_eps_total + log_total);

    // Backward sweep. beta[i] (log) is the probability of consuming labels
    // i..m-1 during frames t+1..T+1 (eps factors divided out, as in alpha).
    // The posterior that frame t consumes the group l_{i-j}..l_{i-1} is
    // gamma = exp(alpha[t-1][i-j] + group + beta_t[i] - log_total); its sum
    // over groups containing label l is the emission posterior D_t(l).
    Matrix emit_posterior(rows, num_labels, 0.0);
    std::vector<double> beta(m + 1, kLogZero), beta_prev(m + 1, kLogZero);
    beta[m] = 0.0;
    for (int t = rows; t >= 1; --t) {
        const int zr = t - 1;
        for (int i = 0; i <= m; ++i) {
            if (beta[i] == kLogZero) continue;
            const int jmax = std::min({i, cfg.max_concurrence, i > 0 ? span_end[i - 1] : 0});
            double group = 0.0;
            for (int j = 1; j <= jmax; ++j) {
                group += em.log_delta(zr, pos[i - j]);
                if (group == kLogZero) break;
                const double lg = alpha[t - 1][i - j] + group + beta[i] - log_total;
                if (lg == kLogZero) continue;
                const double gamma = std::exp(lg);
                for (int k = i - j; k < i; ++k) emit_posterior(zr, pos[k]) += gamma;
            }
        }
        for (int i = 0; i <= m; ++i) {
            double acc = beta[i];
            const int jmax = std::min({m - i, cfg.max_concurrence, i < m ? span_start[i] : 0});
            double group = 0.0;
            for (int j = 1; j <= jmax; ++j) {
                group += em.log_delta(zr, pos[i + j - 1]);
                if (group == kLogZero) break;
                acc = log_add(acc, group + beta[i + j]);
            }
            beta_prev[i] = acc;
        }
        std::swap(beta, beta_prev);
    }

    // d loss / d z. The eps product contributes 1/(1-z) at every active
    // boundary; each emitted label contributes -D / (z (1-z)).
    // Entries with z == 0 never reach grad_y (the max() subgradient is 0).
    Matrix grad_y(frames, classes, 0.0);
    const auto clamp_gate = [&](int t, int c) {  // 1-based frame t in [1, T]
        const double v = y(t - 1, c);
        return (v >= cfg.clamp_epsilon && v <= 1.0 - cfg.clamp_epsilon) ? 1.0 : 0.0;
    };
    for (int c = 0; c < classes; ++c) {
        for (int t = 1; t <= rows; ++t) {
            const int zr = t - 1;
            const bool rise = z(zr, 2 * c) > 0.0;
            const double zval = rise ? z(zr, 2 * c) : z(zr, 2 * c + 1);
            if (zval <= 0.0) continue;
            const int lab = rise ? 2 * c : 2 * c + 1;
            const double gz =
                1.0 / (1.0 - zval) - emit_posterior(zr, lab) / (zval * (1.0 - zval));
            // z = |y_t - y_{t-1}|: + on the larger side, - on the smaller.
            const double sign_t = rise ? 1.0 : -1.0;
            if (t <= frames) grad_y(t - 1, c) += sign_t * gz * clamp_gate(t, c);
            if (t >= 2) grad_y(t - 2, c) -= sign_t * gz * clamp_gate(t - 1, c);
        }
    }
    return {loss, std::move(grad_y)};
}

}  // namespace ctl
