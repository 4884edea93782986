#pragma once

// One-step maps Y_{n+1} = Y_n + Psi(t_n, Y_n, h, dW_n, jumps in (t_n, t_n + h])
// and the driver that iterates them over a dyadic noise realization.
//
// The jump part of every scheme is a compensated sum: the realized jumps of
// the window contribute phi(Y_n, z_j) each, and the compensator subtracts
// h * \int_Z phi(Y_n, z) nu(dz), integrated exactly over the atoms.

#include <bit>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jdsim/linalg.hpp"
#include "jdsim/noise.hpp"
#include "jdsim/sde_core.hpp"

#if !defined(JDSIM_CHECK_STEP_BOUNDS)
#if defined(NDEBUG)
#define JDSIM_CHECK_STEP_BOUNDS 0
#else
#define JDSIM_CHECK_STEP_BOUNDS 1
#endif
#endif

namespace jdsim {

inline constexpr bool kCheckStepBounds = JDSIM_CHECK_STEP_BOUNDS != 0;

/// Scratch buffers reused across steps of one path.
struct StepWorkspace {
    Vector f;
    Matrix g;
    Vector s;
    std::vector<double> per_atom;  // K x d transformed jump values
};

class OneStepScheme {
public:
    virtual ~OneStepScheme() = default;

    virtual std::string_view name() const noexcept = 0;

    /// Writes Y_{n+1} into `out` (size d, must not alias `x`).
    virtual void step(double t, std::span<const double> x, double h, std::span<const double> dW,
                      std::span<const JumpEvent> jumps, const MarkMeasure& measure, const CoefficientSet& coeffs,
                      std::span<double> out, StepWorkspace& ws) const = 0;

    /// A priori bound on |Y_{n+1}| that holds for every input, or nullopt if
    /// the scheme has none.
    virtual std::optional<double> step_bound(double /*x_norm*/, double /*h*/, double /*dw_norm*/,
                                             std::size_t /*jump_count*/, double /*intensity*/, std::size_t /*d*/,
                                             std::size_t /*m*/) const {
        return std::nullopt;
    }

    Vector step(double t, std::span<const double> x, double h, std::span<const double> dW,
                std::span<const JumpEvent> jumps, const MarkMeasure& measure, const CoefficientSet& coeffs) const {
        StepWorkspace ws;
        Vector out(x.size());
        step(t, x, h, dW, jumps, measure, coeffs, out, ws);
        return out;
    }
};

namespace detail {

inline void eval_drift(const CoefficientSet& c, std::span<const double> x, Vector& out) {
    c.drift(x, out);
    if (out.size() != c.dim) throw ProblemError("drift returned wrong dimension");
}

inline void eval_diffusion(const CoefficientSet& c, std::span<const double> x, Matrix& out) {
    c.diffusion(x, out);
    if (out.rows != c.dim || out.cols != c.noise_dim || out.data.size() != c.dim * c.noise_dim)
        throw ProblemError("diffusion returned wrong shape");
}

/// Fills ws.per_atom with transform(sigma(x, z_i)) for every atom.
template <class Transform>
void eval_jump_atoms(const CoefficientSet& c, const MarkMeasure& measure, std::span<const double> x,
                     StepWorkspace& ws, Transform&& transform) {
    const std::size_t d = c.dim;
    ws.per_atom.resize(measure.size() * d);
    for (std::size_t i = 0; i < measure.size(); ++i) {
        c.jump(x, measure.atom(i).mark, ws.s);
        if (ws.s.size() != d) throw ProblemError("jump coefficient returned wrong dimension");
        transform(std::span<double>(ws.s));
        std::copy(ws.s.begin(), ws.s.end(), ws.per_atom.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
}

/// out += sum_j phi(z_j) - h * sum_i w_i phi(z_i), phi values from ws.per_atom.
inline void add_compensated_jumps(std::span<double> out, double h, std::span<const JumpEvent> jumps,
                                  const MarkMeasure& measure, const StepWorkspace& ws) {
    const std::size_t d = out.size();
    for (const auto& e : jumps)
        for (std::size_t k = 0; k < d; ++k) out[k] += ws.per_atom[e.atom * d + k];
    for (std::size_t k = 0; k < d; ++k) {
        double comp = 0.0;
        for (std::size_t i = 0; i < measure.size(); ++i) comp += measure.atom(i).weight * ws.per_atom[i * d + k];
        out[k] -= h * comp;
    }
}

/// out += scale * G dW.
inline void add_matvec(std::span<double> out, const Matrix& g, std::span<const double> dW, double scale = 1.0) {
    for (std::size_t i = 0; i < g.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.cols; ++j) s += g(i, j) * dW[j];
        out[i] += scale * s;
    }
}

}  // namespace detail

/// Y + f h + g dW + compensated sigma jumps.
class EulerMaruyama final : public OneStepScheme {
public:
    std::string_view name() const noexcept override { return "euler-maruyama"; }

    void step(double, std::span<const double> x, double h, std::span<const double> dW,
              std::span<const JumpEvent> jumps, const MarkMeasure& measure, const CoefficientSet& c,
              std::span<double> out, StepWorkspace& ws) const override {
        const std::size_t d = c.dim;
        detail::eval_drift(c, x, ws.f);
        detail::eval_diffusion(c, x, ws.g);
        detail::eval_jump_atoms(c, measure, x, ws, [](std::span<double>) {});
        for (std::size_t k = 0; k < d; ++k) out[k] = x[k] + ws.f[k] * h;
        detail::add_matvec(out, ws.g, dW);
        detail::add_compensated_jumps(out, h, jumps, measure, ws);
    }
};

/// Every coefficient is tamed by 1 / (1 + |coefficient| h); the jump
/// coefficient per mark. |.| is Euclidean for vectors, trace norm for g.
class TamedEuler final : public OneStepScheme {
public:
    std::string_view name() const noexcept override { return "tamed"; }

    void step(double, std::span<const double> x, double h, std::span<const double> dW,
              std::span<const JumpEvent> jumps, const MarkMeasure& measure, const CoefficientSet& c,
              std::span<double> out, StepWorkspace& ws) const override {
        const std::size_t d = c.dim;
        detail::eval_drift(c, x, ws.f);
        detail::eval_diffusion(c, x, ws.g);
        detail::eval_jump_atoms(c, measure, x, ws, [h](std::span<double> s) {
            const double scale = 1.0 / (1.0 + norm(s) * h);
            for (double& v : s) v *= scale;
        });
        const double f_scale = h / (1.0 + norm(ws.f) * h);
        const double g_scale = 1.0 / (1.0 + norm(ws.g) * h);
        for (std::size_t k = 0; k < d; ++k) out[k] = x[k] + ws.f[k] * f_scale;
        detail::add_matvec(out, ws.g, dW, g_scale);
        detail::add_compensated_jumps(out, h, jumps, measure, ws);
    }

    /// |Y| + 1 + |dW| / h + lambda + (#jumps) / h.
    std::optional<double> step_bound(double x_norm, double h, double dw_norm, std::size_t jump_count,
                                     double intensity, std::size_t, std::size_t) const override {
        return x_norm + 1.0 + dw_norm / h + intensity + static_cast<double>(jump_count) / h;
    }
};

/// Entrywise sines: Y + sin(f h) + (sin(g h) / h) dW + compensated sin(sigma h) / h.
class SineEuler final : public OneStepScheme {
public:
    std::string_view name() const noexcept override { return "sine"; }

    void step(double, std::span<const double> x, double h, std::span<const double> dW,
              std::span<const JumpEvent> jumps, const MarkMeasure& measure, const CoefficientSet& c,
              std::span<double> out, StepWorkspace& ws) const override {
        const std::size_t d = c.dim;
        detail::eval_drift(c, x, ws.f);
        detail::eval_diffusion(c, x, ws.g);
        detail::eval_jump_atoms(c, measure, x, ws, [h](std::span<double> s) {
            for (double& v : s) v = std::sin(v * h) / h;
        });
        for (double& v : ws.g.data) v = std::sin(v * h) / h;
        for (std::size_t k = 0; k < d; ++k) out[k] = x[k] + std::sin(ws.f[k] * h);
        detail::add_matvec(out, ws.g, dW);
        detail::add_compensated_jumps(out, h, jumps, measure, ws);
    }

    /// |Y| + sqrt(d) + sqrt(m d) |dW| / h + sqrt(d) lambda + sqrt(d) (#jumps) / h.
    std::optional<double> step_bound(double x_norm, double h, double dw_norm, std::size_t jump_count,
                                     double intensity, std::size_t d, std::size_t m) const override {
        const double rd = std::sqrt(static_cast<double>(d));
        const double rmd = std::sqrt(static_cast<double>(m * d));
        return x_norm + rd + rmd * dw_norm / h + rd * intensity + rd * static_cast<double>(jump_count) / h;
    }
};

using SchemePtr = std::shared_ptr<const OneStepScheme>;

/// "euler-maruyama" (alias "em"), "tamed", "sine".
inline SchemePtr make_scheme(std::string_view id) {
    if (id == "euler-maruyama" || id == "em") return std::make_shared<EulerMaruyama>();
    if (id == "tamed") return std::make_shared<TamedEuler>();
    if (id == "sine") return std::make_shared<SineEuler>();
    throw std::invalid_argument("unknown scheme '" + std::string(id) + "' (expected euler-maruyama, tamed or sine)");
}

inline const std::vector<std::string>& scheme_ids() {
    static const std::vector<std::string> ids{"euler-maruyama", "tamed", "sine"};
    return ids;
}

/// States Y_0..Y_N on the uniform grid t_n = n T / N, stored row-major.
struct DiscretePath {
    double horizon = 1.0;
    std::size_t steps = 0;
    std::size_t dim = 1;
    std::vector<double> states;
    /// First n with a non-finite Y_n, if any.
    std::optional<std::size_t> first_overflow;

    double step_size() const noexcept { return horizon / static_cast<double>(steps); }
    double time(std::size_t n) const noexcept { return static_cast<double>(n) * horizon / static_cast<double>(steps); }
    std::span<const double> state(std::size_t n) const { return {states.data() + n * dim, dim}; }
    std::span<const double> terminal() const { return state(steps); }
    bool overflowed() const noexcept { return first_overflow.has_value(); }

    /// Path restricted to every factor-th grid time.
    DiscretePath subsample(std::size_t factor) const {
        if (factor == 0 || !std::has_single_bit(factor) || factor > steps || steps % factor != 0)
            throw std::invalid_argument("subsample: factor must be a power of two dividing the step count");
        if (factor == 1) return *this;
        DiscretePath out;
        out.horizon = horizon;
        out.steps = steps / factor;
        out.dim = dim;
        out.states.resize((out.steps + 1) * dim);
        for (std::size_t n = 0; n <= out.steps; ++n) {
            const auto s = state(n * factor);
            std::copy(s.begin(), s.end(), out.states.begin() + static_cast<std::ptrdiff_t>(n * dim));
            if (!out.first_overflow && !all_finite(s)) out.first_overflow = n;
        }
        return out;
    }

    friend bool operator==(const DiscretePath&, const DiscretePath&) = default;
};

/// Thrown by the debug step-bound check.
class StepBoundViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// True when |y_next| respects the scheme's a priori bound (1e-12 relative slack).
inline bool satisfies_step_bound(const OneStepScheme& scheme, std::span<const double> x, std::span<const double> y_next,
                                 double h, std::span<const double> dW, std::size_t jump_count, double intensity,
                                 std::size_t m) {
    const auto bound = scheme.step_bound(norm(x), h, norm(dW), jump_count, intensity, x.size(), m);
    if (!bound) return true;
    return norm(y_next) <= *bound * (1.0 + 1e-12) + 1e-12;
}

/// Iterates `scheme` with N = `steps` uniform steps. The increments are those
/// of coarsen(noise.brownian, 2^level / N), read in place.
inline DiscretePath simulate_path(const JumpDiffusionProblem& problem, const OneStepScheme& scheme,
                                  const NoiseRealization& noise, std::size_t steps, std::span<const double> x0 = {}) {
    const auto& grid = noise.brownian;
    if (steps == 0 || !std::has_single_bit(steps) || steps > grid.steps())
        throw std::invalid_argument("simulate_path: step count " + std::to_string(steps) +
                                    " must be a power of two dividing 2^level = " + std::to_string(grid.steps()));
    if (grid.dim() != problem.noise_dim()) throw std::invalid_argument("simulate_path: noise dimension mismatch");

    const std::size_t d = problem.dim();
    const std::size_t m = problem.noise_dim();
    const std::size_t factor = grid.steps() / steps;
    const double T = problem.horizon;
    const double h = T / static_cast<double>(steps);

    DiscretePath path;
    path.horizon = T;
    path.steps = steps;
    path.dim = d;
    path.states.resize((steps + 1) * d);

    const Vector start = x0.empty() ? path_initial_state(problem, noise.master_seed, noise.path_index)
                                    : Vector(x0.begin(), x0.end());
    if (start.size() != d) throw ProblemError("simulate_path: initial state has wrong dimension");
    std::copy(start.begin(), start.end(), path.states.begin());
    if (!all_finite(start)) path.first_overflow = 0;

    StepWorkspace ws;
    Vector dW(m);
    for (std::size_t n = 0; n < steps; ++n) {
        const double t0 = static_cast<double>(n) * T / static_cast<double>(steps);
        const double t1 = static_cast<double>(n + 1) * T / static_cast<double>(steps);
        const auto w0 = grid.value(n * factor);
        const auto w1 = grid.value((n + 1) * factor);
        for (std::size_t j = 0; j < m; ++j) dW[j] = w1[j] - w0[j];
        const auto jumps = jumps_in_window(noise.jumps, t0, t1);

        const std::span<const double> y(path.states.data() + n * d, d);
        const std::span<double> y_next(path.states.data() + (n + 1) * d, d);
        scheme.step(t0, y, h, dW, jumps, problem.measure, problem.coefficients, y_next, ws);

        if (!path.first_overflow && !all_finite(y_next)) path.first_overflow = n + 1;
        if constexpr (kCheckStepBounds) {
            if (all_finite(y) && all_finite(y_next) &&
                !satisfies_step_bound(scheme, y, y_next, h, dW, jumps.size(), problem.intensity(), m))
                throw StepBoundViolation("a priori step bound violated by scheme " + std::string(scheme.name()) +
                                         " at step " + std::to_string(n));
        }
    }
    return path;
}

/// Path at the finest level of the realization; coarser grids via subsample().
inline DiscretePath simulate_reference(const JumpDiffusionProblem& problem, const NoiseRealization& noise,
                                       const OneStepScheme& reference_scheme, int level) {
    if (level != noise.brownian.level())
        throw std::invalid_argument("simulate_reference: level must equal the noise level");
    return simulate_path(problem, reference_scheme, noise, noise.brownian.steps());
}

/// Closed-form solution sampled at t_n = n T / N on the realization.
inline DiscretePath exact_path(const JumpDiffusionProblem& problem, const NoiseRealization& noise, std::size_t steps) {
    if (!problem.has_exact()) throw std::invalid_argument("exact_path: problem has no exact solution");
    const auto& grid = noise.brownian;
    if (steps == 0 || !std::has_single_bit(steps) || steps > grid.steps())
        throw std::invalid_argument("exact_path: step count must be a power of two dividing 2^level");
    const std::size_t d = problem.dim();
    const std::size_t factor = grid.steps() / steps;
    const double T = problem.horizon;

    DiscretePath path;
    path.horizon = T;
    path.steps = steps;
    path.dim = d;
    path.states.resize((steps + 1) * d);
    const Vector x0 = path_initial_state(problem, noise.master_seed, noise.path_index);
    std::copy(x0.begin(), x0.end(), path.states.begin());
    for (std::size_t n = 1; n <= steps; ++n) {
        const double t = static_cast<double>(n) * T / static_cast<double>(steps);
        const auto w = grid.value(n * factor);
        const Vector x = problem.exact->flow(0.0, x0, t, w, jumps_in_window(noise.jumps, 0.0, t));
        std::copy(x.begin(), x.end(), path.states.begin() + static_cast<std::ptrdiff_t>(n * d));
        if (!path.first_overflow && !all_finite(x)) path.first_overflow = n;
    }
    return path;
}

}  // namespace jdsim
