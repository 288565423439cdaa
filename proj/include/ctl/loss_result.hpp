#pragma once

#include "ctl/matrix.hpp"

namespace ctl {

// Scalar loss (natural log scale) plus its exact gradient with respect to
// the network output grid that produced it.
struct LossResult {
    double loss = 0.0;
    Matrix grad;
};

}  // namespace ctl
