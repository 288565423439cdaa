#include <gtest/gtest.h>

#include <cmath>

#include "ctl/ctl_loss.hpp"
#include "ctl/gradcheck.hpp"
#include "ctl/oracle.hpp"
#include "ctl/rng.hpp"

using namespace ctl;

namespace {

Matrix grid1(const std::vector<double>& y) {
    Matrix m(static_cast<int>(y.size()), 1);
    for (size_t t = 0; t < y.size(); ++t) m(t, 0) = y[t];
    return m;
}

// All label sequences over the boundary labels of `classes` classes, lengths
// 0..max_len.
void all_sequences(int classes, int max_len, SequentialLabel& cur,
                   const std::function<void(const SequentialLabel&)>& visit) {
    visit(cur);
    if (static_cast<int>(cur.size()) == max_len) return;
    for (int idx = 0; idx < 2 * classes; ++idx) {
        cur.push_back(boundary_from_index(idx));
        all_sequences(classes, max_len, cur, visit);
        cur.pop_back();
    }
}

}  // namespace

TEST(RectifiedDelta, HandValues) {
    const BoundaryGrid z = rectified_delta(grid1({0.2, 0.7, 0.4}));
    ASSERT_EQ(z.rows(), 4);
    ASSERT_EQ(z.cols(), 2);
    const double onset_expected[] = {0.2, 0.5, 0.0, 0.0};
    const double offset_expected[] = {0.0, 0.0, 0.3, 0.4};
    for (int t = 0; t < 4; ++t) {
        EXPECT_DOUBLE_EQ(z(t, 0), onset_expected[t]);
        EXPECT_DOUBLE_EQ(z(t, 1), offset_expected[t]);
    }
}

TEST(RectifiedDelta, ConstantInterior) {
    const BoundaryGrid z = rectified_delta(grid1({0.5, 0.5}));
    const double onset_expected[] = {0.5, 0.0, 0.0};
    const double offset_expected[] = {0.0, 0.0, 0.5};
    for (int t = 0; t < 3; ++t) {
        EXPECT_DOUBLE_EQ(z(t, 0), onset_expected[t]);
        EXPECT_DOUBLE_EQ(z(t, 1), offset_expected[t]);
    }
}

TEST(RectifiedDelta, AllZerosStayZero) {
    // Clamping lifts silent posteriors to clamp_epsilon, so the first onset
    // and last offset rows carry that perturbation; everything else is 0.
    const BoundaryGrid z = rectified_delta(Matrix(3, 2, 0.0), 1e-6);
    for (int t = 0; t < z.rows(); ++t)
        for (int l = 0; l < z.cols(); ++l) {
            EXPECT_NEAR(z(t, l), 0.0, 1e-5);
            if (t > 0 && t < z.rows() - 1) {
                EXPECT_DOUBLE_EQ(z(t, l), 0.0);
            }
        }
}

TEST(RectifiedDelta, PerClassExclusivity) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int frames = rng.uniform_int(1, 8);
        const int classes = rng.uniform_int(1, 3);
        Matrix y(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) y(t, c) = rng.uniform();
        const BoundaryGrid z = rectified_delta(y);
        for (int t = 0; t < z.rows(); ++t)
            for (int c = 0; c < classes; ++c)
                EXPECT_TRUE(z(t, 2 * c) == 0.0 || z(t, 2 * c + 1) == 0.0);
    }
}

TEST(EmissionTerms, HandValues) {
    Matrix z(1, 3);
    z(0, 0) = 0.5;
    z(0, 1) = 0.2;
    z(0, 2) = 0.0;
    const EmissionTerms em = emission_terms(z);
    EXPECT_NEAR(em.eps(0), 0.4, 1e-12);
    EXPECT_NEAR(em.delta(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(em.delta(0, 1), 0.25, 1e-12);
    EXPECT_DOUBLE_EQ(em.delta(0, 2), 0.0);
    // single emission: p(l0) = eps * delta_0
    EXPECT_NEAR(em.eps(0) * em.delta(0, 0), 0.4, 1e-12);
}

TEST(EmissionTerms, EmptyEmissionCertainty) {
    Matrix z(2, 4, 0.0);
    const EmissionTerms em = emission_terms(z);
    for (int r = 0; r < 2; ++r) {
        EXPECT_DOUBLE_EQ(em.eps(r), 1.0);
        for (int l = 0; l < 4; ++l) EXPECT_DOUBLE_EQ(em.delta(r, l), 0.0);
    }
}

TEST(EmissionTerms, MultiLabelFactorization) {
    Matrix z(1, 2);
    z(0, 0) = 0.5;
    z(0, 1) = 0.2;
    const EmissionTerms em = emission_terms(z);
    // p(l0, l1) = z0 * z1 = eps * delta0 * delta1
    EXPECT_NEAR(em.eps(0) * em.delta(0, 0) * em.delta(0, 1), 0.10, 1e-12);
}

TEST(EmissionTerms, DegenerateInputReported) {
    Matrix z(1, 2, 0.0);
    z(0, 1) = 1.0;
    EXPECT_THROW(emission_terms(z), std::domain_error);
}

TEST(CtlForward, WorkedSingleFrame) {
    const SequentialLabel label = {onset(0), offset(0)};
    EXPECT_NEAR(ctl_forward(grid1({0.5}), label), 0.25, 1e-9);
}

TEST(CtlForward, WorkedTwoFrames) {
    const SequentialLabel label = {onset(0), offset(0)};
    EXPECT_NEAR(ctl_forward(grid1({0.9, 0.9}), label), 0.81, 1e-9);
    EXPECT_NEAR(ctl_forward(grid1({0.5, 0.8}), label), 0.40, 1e-9);
}

TEST(CtlForward, EmptyLabelIsEpsProduct) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int frames = rng.uniform_int(1, 6);
        const int classes = rng.uniform_int(1, 2);
        Matrix y(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) y(t, c) = rng.uniform();
        const EmissionTerms em = emission_terms(rectified_delta(y));
        double expected = 1.0;
        for (int r = 0; r < frames + 1; ++r) expected *= em.eps(r);
        EXPECT_NEAR(ctl_forward(y, {}), expected, 1e-12);
    }
}

TEST(CtlForward, EmptyGridEdgeCases) {
    const Matrix empty(0, 1);
    EXPECT_DOUBLE_EQ(ctl_forward(empty, {onset(0), offset(0)}), 0.0);
    EXPECT_DOUBLE_EQ(ctl_forward(empty, {}), 1.0);
}

TEST(CtlForward, MatchesOracleOnRandomInstances) {
    Rng rng(123);
    const int concurrences[4] = {1, 2, 3, kUnboundedConcurrence};
    for (int trial = 0; trial < 60; ++trial) {
        const int frames = rng.uniform_int(1, 5);
        const int classes = rng.uniform_int(1, 2);
        Matrix y(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) y(t, c) = rng.uniform();
        CtlConfig cfg;
        cfg.max_concurrence = concurrences[rng.uniform_int(0, 3)];
        SequentialLabel label;
        for (int i = rng.uniform_int(0, 4); i > 0; --i)
            label.push_back(boundary_from_index(rng.uniform_int(0, 2 * classes - 1)));
        const double dp = ctl_forward(y, label, cfg);
        const double bf = oracle::ctl_brute_force(y, label, cfg);
        if (bf > 0)
            EXPECT_NEAR(dp / bf, 1.0, 1e-12);
        else
            EXPECT_DOUBLE_EQ(dp, 0.0);
    }
}

TEST(CtlForward, ProbabilityStaysInUnitInterval) {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int frames = rng.uniform_int(1, 6);
        Matrix y(frames, 2);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < 2; ++c) y(t, c) = rng.uniform();
        SequentialLabel label;
        for (int i = rng.uniform_int(0, 5); i > 0; --i)
            label.push_back(boundary_from_index(rng.uniform_int(0, 3)));
        CtlConfig cfg;
        cfg.max_concurrence = rng.uniform_int(1, 3);
        const double p = ctl_forward(y, label, cfg);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0 + 1e-12);
    }
}

TEST(CtlForward, MonotoneInMaxConcurrence) {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int frames = rng.uniform_int(1, 5);
        const int classes = rng.uniform_int(1, 2);
        Matrix y(frames, classes);
        for (int t = 0; t < frames; ++t)
            for (int c = 0; c < classes; ++c) y(t, c) = rng.uniform();
        SequentialLabel label;
        for (int i = rng.uniform_int(0, 4); i > 0; --i)
            label.push_back(boundary_from_index(rng.uniform_int(0, 2 * classes - 1)));
        double prev = -1.0;
        for (int concurrence : {1, 2, 3}) {
            CtlConfig cfg;
            cfg.max_concurrence = concurrence;
            const double p = ctl_forward(y, label, cfg);
            EXPECT_GE(p, prev - 1e-12);
            prev = p;
        }
    }
}

// With one class, the per-frame outcomes (emit nothing / onset / offset,
// onset and offset of one class never both possible) partition the outcome
// space, so the forward probabilities over all flattened sequences sum to 1.
TEST(CtlForward, NormalizationSingleClass) {
    Rng rng(91);
    for (int trial = 0; trial < 5; ++trial) {
        const int frames = 3;
        Matrix y(frames, 1);
        for (int t = 0; t < frames; ++t) y(t, 0) = rng.uniform();
        CtlConfig cfg;
        cfg.max_concurrence = kUnboundedConcurrence;
        double total = 0.0;
        SequentialLabel cur;
        all_sequences(1, 2 * (frames + 1), cur,
                      [&](const SequentialLabel& label) { total += ctl_forward(y, label, cfg); });
        EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(CtlLossAndGrad, WorkedSingleFrame) {
    const SequentialLabel label = {onset(0), offset(0)};
    const LossResult r = ctl_loss_and_grad(grid1({0.5}), label);
    EXPECT_NEAR(r.loss, -std::log(0.25), 1e-9);
    ASSERT_EQ(r.grad.rows(), 1);
    EXPECT_NEAR(r.grad(0, 0), -4.0, 1e-9);
}

TEST(CtlLossAndGrad, EmptyLabelNearClampBound) {
    CtlConfig cfg;
    Matrix y(4, 2, cfg.clamp_epsilon);
    const LossResult r = ctl_loss_and_grad(y, {}, cfg);
    EXPECT_NEAR(r.loss, 0.0, 1e-4);
}

TEST(CtlLossAndGrad, InfeasibleSequenceThrows) {
    EXPECT_THROW(ctl_loss_and_grad(Matrix(0, 1), {onset(0), offset(0)}), std::domain_error);
    // strictly decreasing posterior: a second onset has nowhere to go
    const SequentialLabel label = {onset(0), offset(0), onset(0), offset(0)};
    EXPECT_THROW(ctl_loss_and_grad(grid1({0.9, 0.5}), label), std::domain_error);
}

TEST(CtlLossAndGrad, GradientMatchesFiniteDifferences) {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const int frames = rng.uniform_int(2, 4);
        const int classes = rng.uniform_int(1, 2);
        CtlConfig cfg;
        cfg.max_concurrence = rng.uniform_int(1, 2);

        Matrix y;
        SequentialLabel label;
        double lp = kLogZero;
        for (int attempt = 0; attempt < 200 && lp == kLogZero; ++attempt) {
            y = Matrix(frames, classes);
            for (int c = 0; c < classes; ++c) {
                bool ok = false;
                while (!ok) {
                    for (int t = 0; t < frames; ++t) y(t, c) = rng.uniform(0.05, 0.95);
                    ok = true;
                    for (int t = 1; t < frames; ++t)
                        ok = ok && std::abs(y(t, c) - y(t - 1, c)) > 2e-3;
                }
            }
            label.clear();
            StrongLabel mask(frames, classes);
            for (int t = 0; t < frames; ++t)
                for (int c = 0; c < classes; ++c) mask.set(t, c, rng.uniform() < 0.4);
            label = strong_to_sequential(mask);
            if (label.size() > 4) continue;
            lp = ctl_log_forward(y, label, cfg);
        }
        ASSERT_NE(lp, kLogZero);

        const LossResult r = ctl_loss_and_grad(y, label, cfg);
        const Matrix fd = central_differences(
            [&](const Matrix& m) { return ctl_loss_and_grad(m, label, cfg).loss; }, y);
        worst = std::max(worst, max_relative_error(r.grad, fd));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(CtlConfig, Validation) {
    CtlConfig bad;
    bad.max_concurrence = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = CtlConfig{};
    bad.clamp_epsilon = 0.7;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_NO_THROW(CtlConfig{}.validate());
}
