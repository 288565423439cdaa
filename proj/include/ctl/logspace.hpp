#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace ctl {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without leaving log space. Either argument may be
// kLogZero (an impossible event).
inline double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

inline double log_sum(std::span<const double> vals) {
    double acc = kLogZero;
    for (double v : vals) acc = log_add(acc, v);
    return acc;
}

// log(p) that maps p == 0 to kLogZero instead of raising FE_DIVBYZERO noise.
inline double safe_log(double p) {
    return p > 0.0 ? std::log(p) : kLogZero;
}

}  // namespace ctl
