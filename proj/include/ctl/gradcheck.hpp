#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ctl/matrix.hpp"

namespace ctl {

// Central finite differences of a scalar function of a matrix, entry by
// entry: (f(x + h e) - f(x - h e)) / (2h).
inline Matrix central_differences(const std::function<double(const Matrix&)>& f, Matrix x,
                                  double h = 1e-5) {
    Matrix grad(x.rows(), x.cols(), 0.0);
    for (int r = 0; r < x.rows(); ++r) {
        for (int c = 0; c < x.cols(); ++c) {
            const double saved = x(r, c);
            x(r, c) = saved + h;
            const double fp = f(x);
            x(r, c) = saved - h;
            const double fm = f(x);
            x(r, c) = saved;
            grad(r, c) = (fp - fm) / (2.0 * h);
        }
    }
    return grad;
}

inline std::vector<double> central_differences_vec(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
    std::vector<double> grad(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Worst-case relative disagreement between an analytic gradient and a
// reference, with a floor so that near-zero pairs compare absolutely.
inline double max_relative_error(const Matrix& analytic, const Matrix& reference,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (int r = 0; r < analytic.rows(); ++r) {
        for (int c = 0; c < analytic.cols(); ++c) {
            const double a = analytic(r, c);
            const double b = reference(r, c);
            const double scale = std::max({std::abs(a), std::abs(b), floor});
            worst = std::max(worst, std::abs(a - b) / scale);
        }
    }
    return worst;
}

inline double max_relative_error_vec(const std::vector<double>& analytic,
                                     const std::vector<double>& reference, double floor = 1e-6) {
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double scale = std::max({std::abs(analytic[i]), std::abs(reference[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - reference[i]) / scale);
    }
    return worst;
}

}  // namespace ctl
