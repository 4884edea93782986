#pragma once

// Problem class: dX = f(X-) dt + g(X-) dW + \int_Z sigma(X-, z) Nbar(dt, dz)
// with a finite atomic mark measure nu on Z.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jdsim/linalg.hpp"
#include "jdsim/rng.hpp"

namespace jdsim {

/// Malformed problem definition (dimensions, measure invariants, parameters).
class ProblemError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Atom {
    Vector mark;
    double weight = 0.0;
};

/// Finite atomic measure nu = sum_i w_i delta_{z_i}. total_mass() is the jump
/// intensity lambda = nu(Z); jump marks are drawn from nu / lambda.
class MarkMeasure {
public:
    MarkMeasure() = default;

    /// Throws ProblemError unless every invariant holds.
    explicit MarkMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        recompute();
        if (auto failures = invariant_failures(); !failures.empty())
            throw ProblemError("invalid mark measure: " + failures.front());
    }

    /// Builds without validation so that validate_problem can report on it.
    static MarkMeasure unchecked(std::vector<Atom> atoms) {
        MarkMeasure m;
        m.atoms_ = std::move(atoms);
        m.recompute();
        return m;
    }

    /// Compensated Poisson process with intensity lambda: Z = {1}, one atom.
    static MarkMeasure poisson(double intensity, std::size_t mark_dim = 1) {
        return MarkMeasure({Atom{Vector(mark_dim, 1.0), intensity}});
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    double total_mass() const noexcept { return total_mass_; }
    const Atom& atom(std::size_t i) const { return atoms_[i]; }

    /// Sampling probability w_i / lambda.
    double probability(std::size_t i) const { return atoms_[i].weight / total_mass_; }

    /// Index of the atom selected by u in (0, 1) under nu / lambda.
    std::size_t select(double u) const noexcept {
        const double target = u * total_mass_;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < atoms_.size(); ++i) {
            acc += atoms_[i].weight;
            if (target < acc) return i;
        }
        return atoms_.size() - 1;
    }

    std::vector<std::string> invariant_failures() const {
        std::vector<std::string> out;
        if (atoms_.empty()) out.emplace_back("measure has no atoms (nu must be non-zero)");
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const auto& a = atoms_[i];
            if (!(a.weight > 0.0) || !std::isfinite(a.weight))
                out.push_back("atom " + std::to_string(i) + " has non-positive or non-finite weight");
            if (a.mark.empty())
                out.push_back("atom " + std::to_string(i) + " has an empty mark");
            else if (squared_norm(a.mark) == 0.0)
                out.push_back("atom " + std::to_string(i) + " has the zero mark");
            if (!all_finite(a.mark)) out.push_back("atom " + std::to_string(i) + " has a non-finite mark");
            if (i > 0 && a.mark.size() != atoms_[0].mark.size())
                out.push_back("atom " + std::to_string(i) + " mark dimension differs from atom 0");
        }
        if (!atoms_.empty() && !(total_mass_ > 0.0 && std::isfinite(total_mass_)))
            out.emplace_back("total mass must be finite and positive");
        if (!atoms_.empty() && total_mass_ > 0.0 && std::isfinite(total_mass_)) {
            double s = 0.0;
            for (std::size_t i = 0; i < atoms_.size(); ++i) s += probability(i);
            if (std::abs(s - 1.0) > 1e-12) out.emplace_back("normalized weights do not sum to one");
        }
        return out;
    }

private:
    void recompute() {
        total_mass_ = 0.0;
        for (const auto& a : atoms_) total_mass_ += a.weight;
    }

    std::vector<Atom> atoms_;
    double total_mass_ = 0.0;
};

/// Callables fill an output buffer they may resize; the library checks sizes
/// where it matters. All must be pure and re-entrant.
using DriftFn = std::function<void(std::span<const double> x, Vector& out)>;
using DiffusionFn = std::function<void(std::span<const double> x, Matrix& out)>;
using JumpFn = std::function<void(std::span<const double> x, std::span<const double> mark, Vector& out)>;
/// d x d Jacobian of the drift, entry (i, j) = d f_i / d x_j.
using JacobianFn = std::function<void(std::span<const double> x, Matrix& out)>;
/// d*d*d second derivatives, index (i * d + j) * d + k = d^2 f_i / dx_j dx_k.
using HessianFn = std::function<void(std::span<const double> x, Vector& out)>;

struct CoefficientSet {
    std::size_t dim = 1;        // d
    std::size_t noise_dim = 1;  // m
    DriftFn drift;
    DiffusionFn diffusion;
    JumpFn jump;
    JacobianFn drift_jacobian;  // optional
    HessianFn drift_hessian;    // optional
};

struct JumpEvent {
    double time = 0.0;
    std::size_t atom = 0;
};

/// Pathwise flow of the exact solution: state at t1 started from x0 at t0,
/// given the Brownian increment over (t0, t1] and the jumps in that window.
using ExactFlow = std::function<Vector(double t0, std::span<const double> x0, double t1,
                                       std::span<const double> dW, std::span<const JumpEvent> jumps)>;

struct ExactSolution {
    ExactFlow flow;
};

using InitialSampler = std::function<Vector(Rng&)>;

struct JumpDiffusionProblem {
    std::string name;
    CoefficientSet coefficients;
    MarkMeasure measure;
    Vector initial;              // deterministic X0 (used when sampler is empty)
    InitialSampler initial_sampler;
    double horizon = 1.0;
    std::optional<ExactSolution> exact;

    std::size_t dim() const noexcept { return coefficients.dim; }
    std::size_t noise_dim() const noexcept { return coefficients.noise_dim; }
    double intensity() const noexcept { return measure.total_mass(); }
    bool has_exact() const noexcept { return exact.has_value() && static_cast<bool>(exact->flow); }
};

/// \int_Z phi(z) nu(dz) = sum_i w_i phi(z_i), exact for atomic nu.
/// phi: (std::span<const double> mark) -> Vector of size `dim`.
template <class Phi>
Vector integrate_against_measure(Phi&& phi, const MarkMeasure& measure, std::size_t dim) {
    Vector acc(dim, 0.0);
    for (const auto& a : measure.atoms()) {
        const Vector v = phi(std::span<const double>(a.mark));
        if (v.size() != dim)
            throw ProblemError("integrand returned dimension " + std::to_string(v.size()) +
                               ", expected " + std::to_string(dim));
        for (std::size_t k = 0; k < dim; ++k) acc[k] += a.weight * v[k];
    }
    return acc;
}

struct ValidationReport {
    std::vector<std::string> failures;
    bool ok() const noexcept { return failures.empty(); }
};

/// Probes f, g, sigma at X0 and a few perturbed points. Never throws for a
/// malformed problem; every problem found is listed.
inline ValidationReport validate_problem(const JumpDiffusionProblem& problem) {
    ValidationReport report;
    auto fail = [&](std::string msg) { report.failures.push_back(std::move(msg)); };

    const auto& c = problem.coefficients;
    const std::size_t d = c.dim;
    const std::size_t m = c.noise_dim;
    if (d == 0) fail("state dimension d must be >= 1");
    if (m == 0) fail("noise dimension m must be >= 1");
    if (!(problem.horizon > 0.0) || !std::isfinite(problem.horizon)) fail("horizon T must be finite and > 0");
    for (auto& f : problem.measure.invariant_failures()) fail("measure: " + f);
    if (!c.drift) fail("drift f is not set");
    if (!c.diffusion) fail("diffusion g is not set");
    if (!c.jump) fail("jump coefficient sigma is not set");

    Vector x0 = problem.initial;
    if (problem.initial_sampler) {
        Rng rng(0);
        x0 = problem.initial_sampler(rng);
    }
    if (x0.size() != d) {
        fail("initial state has dimension " + std::to_string(x0.size()) + ", expected " + std::to_string(d));
        return report;
    }
    if (!report.failures.empty() && (!c.drift || !c.diffusion || !c.jump || d == 0 || m == 0))
        return report;

    std::vector<Vector> probes{x0};
    for (double delta : {0.5, -0.5, 2.0}) {
        for (std::size_t k = 0; k < d; ++k) {
            Vector p = x0;
            p[k] += delta;
            probes.push_back(std::move(p));
        }
    }

    Vector fo;
    Matrix go;
    Vector so;
    bool dim_reported[3] = {false, false, false};
    bool finite_reported[3] = {false, false, false};
    for (const auto& x : probes) {
        fo.clear();
        c.drift(x, fo);
        if (fo.size() != d && !dim_reported[0]) {
            fail("drift returned dimension " + std::to_string(fo.size()) + ", expected " + std::to_string(d));
            dim_reported[0] = true;
        } else if (!all_finite(fo) && !finite_reported[0]) {
            fail("drift returned a non-finite value");
            finite_reported[0] = true;
        }

        go = Matrix();
        c.diffusion(x, go);
        if ((go.rows != d || go.cols != m || go.data.size() != d * m) && !dim_reported[1]) {
            fail("diffusion returned a " + std::to_string(go.rows) + "x" + std::to_string(go.cols) +
                 " matrix, expected " + std::to_string(d) + "x" + std::to_string(m));
            dim_reported[1] = true;
        } else if (!all_finite(go.data) && !finite_reported[1]) {
            fail("diffusion returned a non-finite value");
            finite_reported[1] = true;
        }

        for (const auto& a : problem.measure.atoms()) {
            so.clear();
            c.jump(x, a.mark, so);
            if (so.size() != d && !dim_reported[2]) {
                fail("jump coefficient returned dimension " + std::to_string(so.size()) + ", expected " +
                     std::to_string(d));
                dim_reported[2] = true;
            } else if (!all_finite(so) && !finite_reported[2]) {
                fail("jump coefficient returned a non-finite value");
                finite_reported[2] = true;
            }
        }
    }

    if (problem.has_exact()) {
        const Vector dW(m, 0.0);
        const Vector y = problem.exact->flow(0.0, x0, 0.0, dW, {});
        if (y.size() != d || squared_distance(y, x0) != 0.0) fail("exact solution does not return X0 at t = 0");
    }
    return report;
}

/// X0 for a path: deterministic initial state or a draw from the sampler.
inline Vector initial_state(const JumpDiffusionProblem& problem, Rng& rng) {
    if (problem.initial_sampler) return problem.initial_sampler(rng);
    return problem.initial;
}

}  // namespace jdsim
