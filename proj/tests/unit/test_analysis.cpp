#include <gtest/gtest.h>

#include <cmath>

#include "jdsim/analysis.hpp"
#include "jdsim/models.hpp"

using namespace jdsim;

namespace {

void expect_same_numbers(const ErrorTable& a, const ErrorTable& b) {
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].h, b.rows[k].h);
        EXPECT_EQ(a.rows[k].rms_error, b.rows[k].rms_error);
        EXPECT_EQ(a.rows[k].standard_error, b.rows[k].standard_error);
        EXPECT_EQ(a.rows[k].overflow_count, b.rows[k].overflow_count);
    }
}

/// Straight loop over paths, no blocks or threads.
double oracle_terminal_rms(const JumpDiffusionProblem& p, const OneStepScheme& scheme, int e, int L, std::size_t M,
                           std::uint64_t seed, bool exact) {
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const auto noise = make_noise(seed, i, L, p);
        const auto y = simulate_path(p, scheme, noise, std::size_t{1} << e);
        const auto x = exact ? exact_path(p, noise, 1) : simulate_path(p, scheme, noise, std::size_t{1} << L);
        s += squared_distance(x.terminal(), y.terminal());
    }
    return std::sqrt(s / static_cast<double>(M));
}

}  // namespace

TEST(FitLogLog, PerfectPowerLaw) {
    const std::vector<double> hs{0.5, 0.25, 0.125, 0.0625};
    std::vector<double> es;
    for (double h : hs) es.push_back(3.0 * std::pow(h, 0.75));
    const auto fit = fit_loglog(hs, es);
    EXPECT_NEAR(fit.slope, 0.75, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log2(3.0), 1e-12);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
    EXPECT_EQ(fit.rows_used, 4u);
}

TEST(FitLogLog, SlopeInvariantUnderErrorScaling) {
    const std::vector<double> hs{0.5, 0.25, 0.125, 0.0625};
    const std::vector<double> es{0.31, 0.2, 0.16, 0.09};
    std::vector<double> scaled;
    for (double e : es) scaled.push_back(e * 1000.0);
    EXPECT_NEAR(fit_loglog(hs, es).slope, fit_loglog(hs, scaled).slope, 1e-12);
    EXPECT_NEAR(fit_loglog(hs, es).r_squared, fit_loglog(hs, scaled).r_squared, 1e-12);
}

TEST(FitLogLog, FlatFitAndDegenerateInput) {
    const std::vector<double> hs{0.5, 0.25, 0.125};
    const std::vector<double> flat{2.0, 2.0, 2.0};
    const auto fit = fit_loglog(hs, flat);
    EXPECT_EQ(fit.slope, 0.0);
    EXPECT_EQ(fit.r_squared, 1.0);
    const std::vector<double> one{0.5}, e1{1.0};
    EXPECT_THROW(fit_loglog(one, e1), FitError);
    const std::vector<double> with_bad{0.0, kInf, 1.0};
    EXPECT_THROW(fit_loglog(hs, with_bad), FitError);
    const std::vector<double> same_h{0.5, 0.5}, e2{1.0, 2.0};
    EXPECT_THROW(fit_loglog(same_h, e2), FitError);
}

TEST(StrongError, SelfComparisonIsZero) {
    StudyConfig c;
    c.coarse_exponents = {6};
    c.reference_exponent = 6;
    c.paths = 100;
    const auto t = estimate_strong_error(build_three_half_jump(), *make_scheme("tamed"), c);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].rms_error, 0.0);
    EXPECT_EQ(t.rows[0].standard_error, 0.0);
}

TEST(StrongError, TwoPathsSingleStepSize) {
    StudyConfig c;
    c.coarse_exponents = {3};
    c.reference_exponent = 6;
    c.paths = 2;
    const auto t = estimate_strong_error(build_cubic_additive(), *make_scheme("sine"), c);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_TRUE(std::isfinite(t.rows[0].rms_error));
    EXPECT_GT(t.rows[0].rms_error, 0.0);
    EXPECT_THROW(fit_order(t), FitError);
}

TEST(StrongError, MatchesStraightLoop) {
    const auto p = build_cubic_additive();
    const auto scheme = make_scheme("tamed");
    StudyConfig c;
    c.coarse_exponents = {4, 5};
    c.reference_exponent = 8;
    c.paths = 150;  // not a multiple of the block size
    c.seed = 7;
    const auto t = estimate_strong_error(p, *scheme, c);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0].h, 1.0 / 16.0);
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_NEAR(t.rows[k].rms_error, oracle_terminal_rms(p, *scheme, 4 + static_cast<int>(k), 8, 150, 7, false),
                    1e-12);
}

TEST(StrongError, ExactReferenceMatchesStraightLoop) {
    const auto p = build_merton_linear();
    const auto scheme = make_scheme("euler-maruyama");
    StudyConfig c;
    c.coarse_exponents = {3, 6};
    c.reference_exponent = 6;
    c.reference = ReferenceKind::exact;
    c.paths = 200;
    c.seed = 3;
    const auto t = estimate_strong_error(p, *scheme, c);
    EXPECT_NEAR(t.rows[0].rms_error, oracle_terminal_rms(p, *scheme, 3, 6, 200, 3, true), 1e-12);
    EXPECT_NEAR(t.rows[1].rms_error, oracle_terminal_rms(p, *scheme, 6, 6, 200, 3, true), 1e-12);
    EXPECT_THROW(estimate_strong_error(build_cubic_additive(), *scheme, c), std::invalid_argument);
}

TEST(StrongError, ThreadCountDoesNotChangeResults) {
    const auto p = build_three_half_jump();
    StudyConfig c;
    c.coarse_exponents = {4, 5, 6};
    c.reference_exponent = 8;
    c.paths = 300;
    c.threads = 1;
    const auto one = estimate_strong_error(p, *make_scheme("tamed"), c);
    c.threads = 4;
    expect_same_numbers(one, estimate_strong_error(p, *make_scheme("tamed"), c));
    c.mode = ErrorMode::sup;
    c.threads = 1;
    const auto sup1 = estimate_strong_error(p, *make_scheme("tamed"), c);
    c.threads = 3;
    expect_same_numbers(sup1, estimate_strong_error(p, *make_scheme("tamed"), c));
}

TEST(StrongError, SupModeDominatesTerminal) {
    const auto p = build_three_half_jump();
    StudyConfig c;
    c.coarse_exponents = {4, 6};
    c.reference_exponent = 8;
    c.paths = 200;
    const auto terminal = estimate_strong_error(p, *make_scheme("sine"), c);
    c.mode = ErrorMode::sup;
    const auto sup = estimate_strong_error(p, *make_scheme("sine"), c);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_GE(sup.rows[k].rms_error, terminal.rows[k].rms_error);
}

TEST(StrongError, ErrorDecreasesWithStepOnSharedNoise) {
    StudyConfig c;
    c.coarse_exponents = {2, 4, 6, 8};
    c.reference_exponent = 11;
    c.paths = 500;
    const auto t = estimate_strong_error(build_cubic_additive(), *make_scheme("tamed"), c);
    for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LT(t.rows[k].rms_error, t.rows[k - 1].rms_error);
    EXPECT_GT(fit_order(t).slope, 0.5);
}

TEST(StrongError, OverflowPolicies) {
    const auto p = build_three_half_jump();
    StudyConfig c;
    c.coarse_exponents = {4};
    c.reference_exponent = 8;
    c.paths = 200;
    c.reference_scheme = make_scheme("tamed");
    const auto inf = estimate_strong_error(p, *make_scheme("em"), c);
    ASSERT_GT(inf.rows[0].overflow_count, 0u);
    EXPECT_EQ(inf.rows[0].rms_error, kInf);
    c.overflow = OverflowPolicy::exclude;
    const auto excl = estimate_strong_error(p, *make_scheme("em"), c);
    EXPECT_EQ(excl.rows[0].overflow_count, inf.rows[0].overflow_count);
    if (excl.rows[0].overflow_count < c.paths) {
        EXPECT_TRUE(std::isfinite(excl.rows[0].rms_error));
    } else {
        EXPECT_EQ(excl.rows[0].rms_error, kInf);
    }
}

TEST(StrongError, ConfigValidation) {
    StudyConfig c;
    c.coarse_exponents = {8, 12};
    c.reference_exponent = 10;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.reference_exponent = 12;
    EXPECT_NO_THROW(c.validate());
    c.paths = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.paths = 2;
    c.coarse_exponents.clear();
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Moments, ZeroModelIsConstant) {
    MomentConfig c;
    c.exponent = 4;
    c.p = 4;
    c.paths = 100;
    const auto m = estimate_moments(build_zero(-2.0), *make_scheme("tamed"), c);
    ASSERT_EQ(m.times.size(), 17u);
    for (double v : m.estimates) EXPECT_EQ(v, 16.0);
    EXPECT_EQ(m.max_estimate, 16.0);
    c.p = 3;
    EXPECT_THROW(estimate_moments(build_zero(), *make_scheme("tamed"), c), std::invalid_argument);
    EXPECT_EQ(m.overflowed_paths, 0u);
}

TEST(Moments, MatchesStraightLoop) {
    const auto p = build_cubic_additive();
    const auto scheme = make_scheme("sine");
    MomentConfig c;
    c.exponent = 5;
    c.p = 4;
    c.paths = 130;
    c.seed = 2;
    const auto m = estimate_moments(p, *scheme, c);
    std::vector<double> sums(33, 0.0);
    for (std::size_t i = 0; i < 130; ++i) {
        const auto path = simulate_path(p, *scheme, make_noise(2, i, 5, p), 32);
        for (std::size_t n = 0; n <= 32; ++n) sums[n] += std::pow(std::abs(path.state(n)[0]), 4);
    }
    for (std::size_t n = 0; n <= 32; ++n) EXPECT_NEAR(m.estimates[n], sums[n] / 130.0, 1e-9 * sums[n]);
    EXPECT_EQ(m.estimates[0], 625.0);
}

TEST(LocalOrders, SameSchemeSingleSubstepIsExact) {
    LocalOrderConfig c;
    c.exponents = {3, 4, 5};
    c.paths = 64;
    c.substeps = 1;
    const auto r = estimate_local_orders(build_three_half_jump(), *make_scheme("tamed"), c);
    EXPECT_TRUE(r.exact);
    EXPECT_TRUE(r.p1_condition);
    EXPECT_TRUE(r.p2_condition);
    for (const auto& row : r.rows) EXPECT_EQ(row.strong_error, 0.0);
}

TEST(LocalOrders, EulerOnGeometricBrownianMotionHasStrongOrderOne) {
    // Jumps switched off in practice: their rare double events make the slope noisy.
    LocalOrderConfig c;
    c.exponents = {4, 5, 6, 7, 8};
    c.paths = 20000;
    c.use_exact = true;
    const auto r = estimate_local_orders(build_merton_linear(0.05, 0.2, 0.5, 1e-9), *make_scheme("em"), c);
    ASSERT_TRUE(r.p2_hat.has_value());
    EXPECT_NEAR(*r.p2_hat, 1.0, 0.05);
    EXPECT_TRUE(r.p2_condition);
}

TEST(LocalOrders, RejectsBadConfig) {
    LocalOrderConfig c;
    c.exponents = {0};
    c.t = 0.5;
    EXPECT_THROW(estimate_local_orders(build_cubic_additive(), *make_scheme("tamed"), c), std::invalid_argument);
    c.t = 0.0;
    c.substeps = 3;
    EXPECT_THROW(estimate_local_orders(build_cubic_additive(), *make_scheme("tamed"), c), std::invalid_argument);
    c.substeps = 4;
    c.use_exact = true;
    EXPECT_THROW(estimate_local_orders(build_cubic_additive(), *make_scheme("tamed"), c), std::invalid_argument);
}
