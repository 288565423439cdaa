#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

namespace ctl {

// The n event classes. Each class contributes one onset and one offset
// boundary label (2n boundary labels total); CTC adds a blank on top (2n+1).
struct EventVocabulary {
    std::vector<std::string> classes;

    EventVocabulary() = default;
    explicit EventVocabulary(std::vector<std::string> names) : classes(std::move(names)) {
        std::unordered_set<std::string> seen;
        for (const auto& name : classes) {
            if (name.empty()) throw std::invalid_argument("EventVocabulary: empty class name");
            if (!seen.insert(name).second)
                throw std::invalid_argument("EventVocabulary: duplicate class name '" + name + "'");
        }
    }

    int num_classes() const { return static_cast<int>(classes.size()); }
    int num_boundary_labels() const { return 2 * num_classes(); }
    int num_ctc_symbols() const { return 2 * num_classes() + 1; }
    int blank_symbol() const { return 2 * num_classes(); }
};

enum class BoundaryKind : uint8_t { Onset = 0, Offset = 1 };

struct BoundaryLabel {
    int class_index = 0;
    BoundaryKind kind = BoundaryKind::Onset;

    friend bool operator==(const BoundaryLabel&, const BoundaryLabel&) = default;
};

inline BoundaryLabel onset(int class_index) { return {class_index, BoundaryKind::Onset}; }
inline BoundaryLabel offset(int class_index) { return {class_index, BoundaryKind::Offset}; }

// Column index of a boundary label in boundary grids: onset of class c at
// 2c, offset at 2c+1. CTC symbol space uses the same layout with blank at 2n.
inline int boundary_index(const BoundaryLabel& l) {
    return 2 * l.class_index + (l.kind == BoundaryKind::Offset ? 1 : 0);
}

inline BoundaryLabel boundary_from_index(int index) {
    return {index / 2, index % 2 == 0 ? BoundaryKind::Onset : BoundaryKind::Offset};
}

inline std::string boundary_name(const EventVocabulary& vocab, const BoundaryLabel& l) {
    return vocab.classes[l.class_index] +
           (l.kind == BoundaryKind::Onset ? "_onset" : "_offset");
}

// The supervision L: event boundaries in temporal order, no timestamps.
using SequentialLabel = std::vector<BoundaryLabel>;

// Per-frame, per-class binary activity mask, frames x classes row-major.
struct StrongLabel {
    int frames = 0;
    int classes = 0;
    std::vector<uint8_t> active;

    StrongLabel() = default;
    StrongLabel(int frames_, int classes_)
        : frames(frames_), classes(classes_),
          active(static_cast<size_t>(frames_) * classes_, 0) {}

    bool at(int t, int c) const { return active[static_cast<size_t>(t) * classes + c] != 0; }
    void set(int t, int c, bool v) { active[static_cast<size_t>(t) * classes + c] = v ? 1 : 0; }

    friend bool operator==(const StrongLabel&, const StrongLabel&) = default;
};

struct PresenceAbsenceLabel {
    std::vector<uint8_t> present;

    friend bool operator==(const PresenceAbsenceLabel&, const PresenceAbsenceLabel&) = default;
};

// Checks the alternation invariant: per class, onsets and offsets alternate,
// starting with an onset and ending with an offset.
inline bool is_valid_sequential(const SequentialLabel& seq, int num_classes) {
    std::vector<uint8_t> open(num_classes, 0);
    for (const auto& l : seq) {
        if (l.class_index < 0 || l.class_index >= num_classes) return false;
        if (l.kind == BoundaryKind::Onset) {
            if (open[l.class_index]) return false;
            open[l.class_index] = 1;
        } else {
            if (!open[l.class_index]) return false;
            open[l.class_index] = 0;
        }
    }
    return std::all_of(open.begin(), open.end(), [](uint8_t o) { return o == 0; });
}

// Boundary sequence of a strong label. One onset at the first frame of each
// maximal activity run, one offset at the frame after its last frame (frames
// are 1-based here, so offsets can land on the virtual frame T+1). Boundaries
// are ordered by frame; ties put offsets before onsets, then ascending class.
inline SequentialLabel strong_to_sequential(const StrongLabel& strong) {
    struct Stamp {
        int frame;
        int is_onset;
        int class_index;
    };
    std::vector<Stamp> stamps;
    for (int c = 0; c < strong.classes; ++c) {
        bool prev = false;
        for (int t = 0; t < strong.frames; ++t) {
            const bool cur = strong.at(t, c);
            if (cur && !prev) stamps.push_back({t + 1, 1, c});
            if (!cur && prev) stamps.push_back({t + 1, 0, c});
            prev = cur;
        }
        if (prev) stamps.push_back({strong.frames + 1, 0, c});
    }
    std::sort(stamps.begin(), stamps.end(), [](const Stamp& a, const Stamp& b) {
        return std::tie(a.frame, a.is_onset, a.class_index) <
               std::tie(b.frame, b.is_onset, b.class_index);
    });
    SequentialLabel seq;
    seq.reserve(stamps.size());
    for (const auto& s : stamps)
        seq.push_back({s.class_index, s.is_onset ? BoundaryKind::Onset : BoundaryKind::Offset});
    return seq;
}

inline PresenceAbsenceLabel strong_to_presence(const StrongLabel& strong) {
    PresenceAbsenceLabel out;
    out.present.assign(strong.classes, 0);
    for (int c = 0; c < strong.classes; ++c)
        for (int t = 0; t < strong.frames; ++t)
            if (strong.at(t, c)) {
                out.present[c] = 1;
                break;
            }
    return out;
}

// The CTC collapse map B: merge consecutive repeats, then drop blanks.
// Alignment symbols are boundary-label indices in [0, 2n) plus the blank
// (index 2n, see EventVocabulary::blank_symbol).
inline SequentialLabel collapse_ctc(const std::vector<int>& alignment, int blank_symbol) {
    SequentialLabel out;
    int prev = -1;  // sentinel distinct from every symbol
    for (int sym : alignment) {
        if (sym != prev && sym != blank_symbol) out.push_back(boundary_from_index(sym));
        prev = sym;
    }
    return out;
}

// The CTL map: plain concatenation in frame order, no collapsing, no blank.
inline SequentialLabel flatten_ctl(const std::vector<std::vector<BoundaryLabel>>& emissions) {
    SequentialLabel out;
    for (const auto& frame : emissions) out.insert(out.end(), frame.begin(), frame.end());
    return out;
}

}  // namespace ctl
