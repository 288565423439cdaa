#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ctl/labels.hpp"
#include "ctl/matrix.hpp"

namespace ctl {

// One synthetic "recording": frame features plus the three label
// granularities. sequential and presence are always derived from strong.
struct Recording {
    std::string id;
    Matrix features;  // frames x feature_dim
    StrongLabel strong;
    SequentialLabel sequential;
    PresenceAbsenceLabel presence;
};

struct Corpus {
    EventVocabulary vocab;
    int frames = 0;
    int feature_dim = 0;
    std::vector<Recording> train;
    std::vector<Recording> validation;
    std::vector<Recording> evaluation;

    const std::vector<Recording>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "validation") return validation;
        if (name == "evaluation") return evaluation;
        throw std::invalid_argument("unknown split '" + name +
                                    "' (want train|validation|evaluation)");
    }
};

inline const char* kSplitNames[] = {"train", "validation", "evaluation"};

}  // namespace ctl
