#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "jdsim/models.hpp"
#include "jdsim/sde_core.hpp"

using namespace jdsim;

namespace {

bool mentions(const ValidationReport& r, const std::string& needle) {
    return std::any_of(r.failures.begin(), r.failures.end(),
                       [&](const std::string& f) { return f.find(needle) != std::string::npos; });
}

Vector square(std::span<const double> z) { return {z[0] * z[0]}; }

}  // namespace

TEST(MarkMeasure, PoissonHasOneUnitAtom) {
    const auto m = MarkMeasure::poisson(2.5);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.atom(0).mark, Vector{1.0});
    EXPECT_EQ(m.total_mass(), 2.5);
    EXPECT_EQ(m.probability(0), 1.0);
}

TEST(MarkMeasure, RejectsForbiddenAtoms) {
    EXPECT_THROW(MarkMeasure(std::vector<Atom>{}), ProblemError);
    EXPECT_THROW(MarkMeasure({{Vector{0.0}, 1.0}}), ProblemError);
    EXPECT_THROW(MarkMeasure({{Vector{1.0}, 0.0}}), ProblemError);
    EXPECT_THROW(MarkMeasure({{Vector{1.0}, -1.0}}), ProblemError);
    EXPECT_THROW(MarkMeasure({{Vector{1.0}, 1.0}, {Vector{1.0, 2.0}, 1.0}}), ProblemError);
    EXPECT_THROW(MarkMeasure::poisson(0.0), ProblemError);
}

TEST(MarkMeasure, SelectFollowsCumulativeWeights) {
    const MarkMeasure m({{Vector{1.0}, 0.4}, {Vector{-2.0}, 0.6}});
    EXPECT_EQ(m.select(0.1), 0u);
    EXPECT_EQ(m.select(0.39), 0u);
    EXPECT_EQ(m.select(0.41), 1u);
    EXPECT_EQ(m.select(0.999), 1u);
}

TEST(IntegrateAgainstMeasure, ZeroIntegrand) {
    const MarkMeasure m({{Vector{1.0}, 0.4}, {Vector{-2.0}, 0.6}});
    const auto v = integrate_against_measure([](std::span<const double>) { return Vector{0.0, 0.0}; }, m, 2);
    EXPECT_EQ(v, (Vector{0.0, 0.0}));
}

TEST(IntegrateAgainstMeasure, ConstantIntegrandGivesTotalMass) {
    const MarkMeasure m({{Vector{1.0}, 0.25}, {Vector{3.0}, 1.5}});
    const auto v = integrate_against_measure([](std::span<const double>) { return Vector{1.0, 1.0, 1.0}; }, m, 3);
    for (double x : v) EXPECT_DOUBLE_EQ(x, 1.75);
}

TEST(IntegrateAgainstMeasure, SquareOverTwoAtoms) {
    const MarkMeasure m({{Vector{1.0}, 0.4}, {Vector{-2.0}, 0.6}});
    const auto v = integrate_against_measure(square, m, 1);
    EXPECT_NEAR(v[0], 0.4 * 1.0 + 0.6 * 4.0, 1e-15);
}

TEST(IntegrateAgainstMeasure, DimensionMismatchThrows) {
    const auto m = MarkMeasure::poisson(1.0);
    EXPECT_THROW(integrate_against_measure(square, m, 2), ProblemError);
}

TEST(IntegrateAgainstMeasure, AdditiveOverDisjointAtoms) {
    const std::vector<Atom> a{{Vector{0.5}, 0.3}, {Vector{1.5}, 0.7}};
    const std::vector<Atom> b{{Vector{-1.0}, 2.0}, {Vector{4.0}, 0.1}};
    std::vector<Atom> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    auto phi = [](std::span<const double> z) { return Vector{std::sin(z[0]), z[0] * z[0] * z[0]}; };
    const auto whole = integrate_against_measure(phi, MarkMeasure(ab), 2);
    const auto pa = integrate_against_measure(phi, MarkMeasure(a), 2);
    const auto pb = integrate_against_measure(phi, MarkMeasure(b), 2);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(whole[k], pa[k] + pb[k], 1e-12 * std::abs(whole[k]));
}

TEST(IntegrateAgainstMeasure, LinearInIntegrand) {
    const MarkMeasure m({{Vector{0.5}, 0.3}, {Vector{-1.5}, 0.7}, {Vector{2.0}, 1.1}});
    auto phi = [](std::span<const double> z) { return Vector{std::exp(z[0])}; };
    auto psi = [](std::span<const double> z) { return Vector{z[0] - 3.0}; };
    const double a = 2.5, b = -0.75;
    const auto combo =
        integrate_against_measure([&](std::span<const double> z) { return Vector{a * phi(z)[0] + b * psi(z)[0]}; },
                                  m, 1);
    const double expected = a * integrate_against_measure(phi, m, 1)[0] + b * integrate_against_measure(psi, m, 1)[0];
    EXPECT_NEAR(combo[0], expected, 1e-12 * std::abs(expected));
}

TEST(ValidateProblem, BuiltInModelsAreWellFormed) {
    for (const auto& info : default_registry().models()) {
        const auto p = default_registry().build(info.id);
        const auto r = validate_problem(p);
        EXPECT_TRUE(r.ok()) << info.id << ": " << (r.failures.empty() ? "" : r.failures.front());
    }
}

TEST(ValidateProblem, ReportsWrongDiffusionShape) {
    auto p = build_three_half_jump();
    p.coefficients.diffusion = [](std::span<const double>, Matrix& out) { out.resize(2, 1); };
    const auto r = validate_problem(p);
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(mentions(r, "diffusion returned a 2x1 matrix"));
}

TEST(ValidateProblem, ReportsZeroMark) {
    auto p = build_three_half_jump();
    p.measure = MarkMeasure::unchecked({{Vector{0.0}, 1.0}});
    const auto r = validate_problem(p);
    EXPECT_TRUE(mentions(r, "zero mark"));
}

TEST(ValidateProblem, ReportsNonFiniteAndBadInitialState) {
    auto p = build_cubic_additive();
    p.coefficients.drift = [](std::span<const double>, Vector& out) { out.assign(1, NAN); };
    EXPECT_TRUE(mentions(validate_problem(p), "drift returned a non-finite value"));

    auto q = build_cubic_additive();
    q.initial = {1.0, 2.0};
    EXPECT_TRUE(mentions(validate_problem(q), "initial state has dimension 2"));

    auto h = build_cubic_additive();
    h.horizon = 0.0;
    EXPECT_TRUE(mentions(validate_problem(h), "horizon"));
}

TEST(ValidateProblem, ExactSolutionMustStartAtX0) {
    auto p = build_merton_linear();
    EXPECT_TRUE(validate_problem(p).ok());
    p.exact->flow = [](double, std::span<const double> x, double, std::span<const double>,
                       std::span<const JumpEvent>) { return Vector{x[0] + 1.0}; };
    EXPECT_TRUE(mentions(validate_problem(p), "exact solution"));
}

TEST(InitialState, SamplerTakesPrecedence) {
    auto p = build_cubic_additive();
    Rng rng(3);
    EXPECT_EQ(initial_state(p, rng), Vector{5.0});
    p.initial_sampler = [](Rng& r) { return Vector{uniform_open01(r)}; };
    Rng a(3), b(3);
    EXPECT_EQ(initial_state(p, a), initial_state(p, b));
}
