#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctl/ctc_loss.hpp"
#include "ctl/ctl_loss.hpp"
#include "ctl/labels.hpp"
#include "ctl/matrix.hpp"

namespace ctl::oracle {

// Brute-force references used by tests and `oracle-check`. Everything here
// works in plain linear space and enumerates outcomes directly, so it shares
// no code with the log-space dynamic programs it exists to check.

// Exhaustive CTL total probability: enumerate every assignment of L's labels
// to frames 1..T+1 that preserves order, emits at most max_concurrence labels
// per frame and never emits the same label twice at one frame; sum
// prod_t [eps_t * prod_emitted delta_t(l)].
inline double ctl_brute_force(const PosteriorGrid& y, const SequentialLabel& label,
                              const CtlConfig& cfg = {}) {
    cfg.validate();
    const int frames = y.rows();
    const int classes = y.cols();
    if (frames > 6 || classes > 2 || label.size() > 6)
        throw std::invalid_argument("ctl_brute_force: instance exceeds combinatorial guard");

    // Local clamp + rectified delta, kept independent of the DP input path.
    const int rows = frames + 1;
    const int num_labels = 2 * classes;
    Matrix z(rows, num_labels, 0.0);
    const auto clamped = [&](int t, int c) {
        if (t < 1 || t > frames) return 0.0;
        return std::clamp(y(t - 1, c), cfg.clamp_epsilon, 1.0 - cfg.clamp_epsilon);
    };
    for (int c = 0; c < classes; ++c) {
        for (int t = 1; t <= rows; ++t) {
            const double d = clamped(t, c) - clamped(t - 1, c);
            if (d > 0.0) z(t - 1, 2 * c) = d;
            if (d < 0.0) z(t - 1, 2 * c + 1) = -d;
        }
    }

    double base = 1.0;  // probability of emitting nothing anywhere
    for (int r = 0; r < rows; ++r)
        for (int l = 0; l < num_labels; ++l) base *= 1.0 - z(r, l);

    const int m = static_cast<int>(label.size());
    std::vector<int> pos(m);
    for (int k = 0; k < m; ++k) pos[k] = boundary_index(label[k]);

    double total = 0.0;
    std::vector<int> frame_of(m, 0);
    // DFS over the frame (1-based, up to T+1) assigned to each label in order.
    auto recurse = [&](auto&& self, int k, int min_frame, double weight) -> void {
        if (k == m) {
            total += weight;
            return;
        }
        for (int t = min_frame; t <= rows; ++t) {
            int in_frame = 0;
            bool duplicate = false;
            for (int p = k - 1; p >= 0 && frame_of[p] == t; --p) {
                ++in_frame;
                if (pos[p] == pos[k]) duplicate = true;
            }
            if (duplicate || in_frame >= cfg.max_concurrence) continue;
            const double zv = z(t - 1, pos[k]);
            if (zv <= 0.0) continue;
            frame_of[k] = t;
            self(self, k + 1, t, weight * zv / (1.0 - zv));
        }
    };
    recurse(recurse, 0, 1, base);
    return total;
}

// Exhaustive CTC total probability: enumerate all (2n+1)^T alignments, apply
// the collapse map B, and sum the probabilities of those mapping to L.
inline double ctc_brute_force(const CtcGrid& q, const SequentialLabel& label) {
    const int frames = q.rows();
    const int num_symbols = q.cols();
    const int blank = num_symbols - 1;
    double count = 1.0;
    for (int t = 0; t < frames; ++t) count *= num_symbols;
    if (count > 1e6)
        throw std::invalid_argument("ctc_brute_force: instance exceeds combinatorial guard");

    std::vector<int> pos;
    for (const auto& l : label) pos.push_back(boundary_index(l));

    std::vector<int> alignment(frames, 0);
    double total = 0.0;
    while (true) {
        double p = 1.0;
        for (int t = 0; t < frames; ++t) p *= q(t, alignment[t]);
        if (p > 0.0) {
            const SequentialLabel collapsed = collapse_ctc(alignment, blank);
            bool match = collapsed.size() == label.size();
            for (size_t i = 0; match && i < collapsed.size(); ++i)
                match = boundary_index(collapsed[i]) == pos[i];
            if (match) total += p;
        }
        int t = frames - 1;  // odometer increment
        while (t >= 0 && alignment[t] == num_symbols - 1) alignment[t--] = 0;
        if (t < 0) break;
        ++alignment[t];
    }
    return total;
}

}  // namespace ctl::oracle
