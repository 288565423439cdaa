#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ctl/ctc_loss.hpp"
#include "ctl/ctl_loss.hpp"
#include "ctl/labels.hpp"
#include "ctl/matrix.hpp"

namespace ctl {

struct DecodeThresholds {
    std::vector<double> theta;  // one per class, each in (0, 1)

    void validate() const {
        for (double v : theta)
            if (!(v > 0.0 && v < 1.0))
                throw std::invalid_argument("DecodeThresholds: threshold outside (0, 1)");
    }
};

inline std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
    return grid;
}

struct ClassCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

struct F1Report {
    std::vector<double> per_class;
    double macro = 0.0;
    std::vector<ClassCounts> counts;
};

// mask[t][c] = 1 iff y_t(c) > theta_c.
inline StrongLabel decode_threshold(const PosteriorGrid& y, const DecodeThresholds& thresholds) {
    thresholds.validate();
    if (static_cast<int>(thresholds.theta.size()) != y.cols())
        throw std::invalid_argument("decode_threshold: thresholds/classes mismatch");
    StrongLabel out(y.rows(), y.cols());
    for (int t = 0; t < y.rows(); ++t)
        for (int c = 0; c < y.cols(); ++c)
            if (y(t, c) > thresholds.theta[c]) out.set(t, c, true);
    return out;
}

// CTC decoding: most probable symbol at each frame, then per class pair each
// offset with the nearest preceding unmatched onset (a new onset replaces a
// pending one, so the innermost pair wins). The event is active from the
// onset frame through the offset frame inclusive; unmatched symbols are
// dropped.
inline StrongLabel decode_ctc(const CtcGrid& q) {
    const int frames = q.rows();
    const int classes = (q.cols() - 1) / 2;
    const int blank = q.cols() - 1;
    StrongLabel out(frames, classes);
    std::vector<int> argmax(frames, blank);
    for (int t = 0; t < frames; ++t) {
        int best = 0;
        for (int k = 1; k < q.cols(); ++k)
            if (q(t, k) > q(t, best)) best = k;
        argmax[t] = best;
    }
    std::vector<int> pending(classes, -1);
    for (int t = 0; t < frames; ++t) {
        const int sym = argmax[t];
        if (sym == blank) continue;
        const BoundaryLabel l = boundary_from_index(sym);
        if (l.kind == BoundaryKind::Onset) {
            pending[l.class_index] = t;
        } else if (pending[l.class_index] >= 0) {
            for (int f = pending[l.class_index]; f <= t; ++f) out.set(f, l.class_index, true);
            pending[l.class_index] = -1;
        }
    }
    return out;
}

// Frame-level F1, micro within class (counts pooled over all frames of all
// recordings), macro across classes. A class with no true and no predicted
// frames scores 0.
inline F1Report frame_f1(const std::vector<StrongLabel>& pred,
                         const std::vector<StrongLabel>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("frame_f1: recording count mismatch");
    if (pred.empty()) throw std::invalid_argument("frame_f1: no recordings");
    const int classes = truth[0].classes;
    F1Report report;
    report.counts.assign(classes, {});
    for (size_t r = 0; r < pred.size(); ++r) {
        if (pred[r].frames != truth[r].frames || pred[r].classes != classes)
            throw std::invalid_argument("frame_f1: shape mismatch");
        for (int t = 0; t < truth[r].frames; ++t) {
            for (int c = 0; c < classes; ++c) {
                const bool p = pred[r].at(t, c);
                const bool g = truth[r].at(t, c);
                if (p && g) ++report.counts[c].tp;
                if (p && !g) ++report.counts[c].fp;
                if (!p && g) ++report.counts[c].fn;
            }
        }
    }
    report.per_class.assign(classes, 0.0);
    for (int c = 0; c < classes; ++c) {
        const auto& k = report.counts[c];
        const long long denom = 2 * k.tp + k.fp + k.fn;
        report.per_class[c] = denom > 0 ? 2.0 * static_cast<double>(k.tp) / denom : 0.0;
        report.macro += report.per_class[c];
    }
    report.macro /= classes;
    return report;
}

inline F1Report frame_f1(const StrongLabel& pred, const StrongLabel& truth) {
    return frame_f1(std::vector<StrongLabel>{pred}, std::vector<StrongLabel>{truth});
}

// Per class, the candidate threshold maximizing that class's validation F1;
// ties go to the smallest candidate.
inline DecodeThresholds tune_thresholds(const std::vector<PosteriorGrid>& ys,
                                        const std::vector<StrongLabel>& truths,
                                        const std::vector<double>& grid = default_threshold_grid()) {
    if (ys.empty() || ys.size() != truths.size())
        throw std::invalid_argument("tune_thresholds: empty or mismatched validation set");
    if (grid.empty()) throw std::invalid_argument("tune_thresholds: empty candidate grid");
    const int classes = ys[0].cols();
    DecodeThresholds best;
    best.theta.assign(classes, grid[0]);
    std::vector<double> best_f1(classes, -1.0);
    for (const double theta : grid) {
        std::vector<ClassCounts> counts(classes);
        for (size_t r = 0; r < ys.size(); ++r) {
            for (int t = 0; t < ys[r].rows(); ++t) {
                for (int c = 0; c < classes; ++c) {
                    const bool p = ys[r](t, c) > theta;
                    const bool g = truths[r].at(t, c);
                    if (p && g) ++counts[c].tp;
                    if (p && !g) ++counts[c].fp;
                    if (!p && g) ++counts[c].fn;
                }
            }
        }
        for (int c = 0; c < classes; ++c) {
            const long long denom = 2 * counts[c].tp + counts[c].fp + counts[c].fn;
            const double f1 = denom > 0 ? 2.0 * static_cast<double>(counts[c].tp) / denom : 0.0;
            if (f1 > best_f1[c]) {  // strict: ties keep the smaller theta
                best_f1[c] = f1;
                best.theta[c] = theta;
            }
        }
    }
    return best;
}

// Mean duration (in frames) of the maximal activity runs of one class,
// pooled over recordings. Zero events yield a zero mean.
struct DurationStats {
    long long num_events = 0;
    double mean_duration = 0.0;
};

inline DurationStats event_duration_stats(const std::vector<StrongLabel>& masks, int class_index) {
    DurationStats stats;
    long long total = 0;
    for (const auto& mask : masks) {
        int run = 0;
        for (int t = 0; t <= mask.frames; ++t) {
            const bool active = t < mask.frames && mask.at(t, class_index);
            if (active) {
                ++run;
            } else if (run > 0) {
                ++stats.num_events;
                total += run;
                run = 0;
            }
        }
    }
    if (stats.num_events > 0)
        stats.mean_duration = static_cast<double>(total) / static_cast<double>(stats.num_events);
    return stats;
}

}  // namespace ctl
