#pragma once

// Sampling-based estimators for the structural conditions on (f, g, sigma):
// monotonicity, coercivity, the p-bar moment condition and polynomial growth
// of the drift and its derivatives.
//
// Each check returns the smallest constant K-hat that makes the inequality
// hold on every sampled point or pair. A finite sample cannot prove a global
// inequality, so a report means "no violation found on this sample".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jdsim/linalg.hpp"
#include "jdsim/rng.hpp"
#include "jdsim/sde_core.hpp"

namespace jdsim {

struct GridSpec {
    Vector lower{-5.0};
    Vector upper{5.0};
    std::size_t points_per_dim = 101;
    std::size_t random_points = 10000;
    std::size_t random_pairs = 10000;
    std::uint64_t seed = 20190301;

    static GridSpec box(double lo, double hi, std::size_t dim = 1) {
        GridSpec g;
        g.lower.assign(dim, lo);
        g.upper.assign(dim, hi);
        return g;
    }

    std::size_t dim() const noexcept { return lower.size(); }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size())
            throw std::invalid_argument("grid: lower and upper bounds must have the same non-zero dimension");
        for (std::size_t k = 0; k < lower.size(); ++k) {
            if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]))
                throw std::invalid_argument("grid: bounds must be finite");
            if (!(lower[k] < upper[k])) throw std::invalid_argument("grid: lower bound must be below upper bound");
        }
        if (points_per_dim < 2) throw std::invalid_argument("grid: need at least 2 lattice points per dimension");
    }
};

/// Lattice points: tensor grid with points_per_dim nodes per axis.
inline std::vector<Vector> lattice_points(const GridSpec& grid) {
    grid.validate();
    const std::size_t d = grid.dim();
    const std::size_t n = grid.points_per_dim;
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= n;
    std::vector<Vector> out;
    out.reserve(total);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t c = 0; c < total; ++c) {
        Vector x(d);
        for (std::size_t k = 0; k < d; ++k) {
            const double a = static_cast<double>(idx[k]) / static_cast<double>(n - 1);
            x[k] = grid.lower[k] + a * (grid.upper[k] - grid.lower[k]);
        }
        out.push_back(std::move(x));
        for (std::size_t k = 0; k < d; ++k) {
            if (++idx[k] < n) break;
            idx[k] = 0;
        }
    }
    return out;
}

inline Vector uniform_in_box(const GridSpec& grid, Rng& rng) {
    Vector x(grid.dim());
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = grid.lower[k] + uniform_open01(rng) * (grid.upper[k] - grid.lower[k]);
    return x;
}

/// Lattice points followed by seeded uniform points.
inline std::vector<Vector> sample_points(const GridSpec& grid) {
    auto pts = lattice_points(grid);
    Rng rng = derive_path_rng(grid.seed, 0, 100);
    for (std::size_t i = 0; i < grid.random_points; ++i) pts.push_back(uniform_in_box(grid, rng));
    return pts;
}

/// Lattice pairs are all unordered pairs when the lattice has at most
/// kAllPairsLimit points, else neighbours along each axis. Random pairs
/// alternate between uniform pairs and near-diagonal pairs |x - y| ~ 1e-3 width.
inline constexpr std::size_t kAllPairsLimit = 1024;

inline std::vector<std::pair<Vector, Vector>> sample_pairs(const GridSpec& grid) {
    const auto lattice = lattice_points(grid);
    const std::size_t d = grid.dim();
    std::vector<std::pair<Vector, Vector>> out;
    if (lattice.size() <= kAllPairsLimit) {
        for (std::size_t i = 0; i < lattice.size(); ++i)
            for (std::size_t j = i + 1; j < lattice.size(); ++j) out.emplace_back(lattice[i], lattice[j]);
    } else {
        std::size_t stride = 1;
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t i = 0; i < lattice.size(); ++i) {
                const std::size_t pos = (i / stride) % grid.points_per_dim;
                if (pos + 1 < grid.points_per_dim) out.emplace_back(lattice[i], lattice[i + stride]);
            }
            stride *= grid.points_per_dim;
        }
    }
    Rng rng = derive_path_rng(grid.seed, 0, 101);
    for (std::size_t r = 0; r < grid.random_pairs; ++r) {
        Vector x = uniform_in_box(grid, rng);
        Vector y;
        if (r % 2 == 0) {
            y = uniform_in_box(grid, rng);
        } else {
            y = x;
            for (std::size_t k = 0; k < d; ++k) {
                const double width = grid.upper[k] - grid.lower[k];
                y[k] = std::clamp(x[k] + 1e-3 * width * (2.0 * uniform_open01(rng) - 1.0), grid.lower[k],
                                  grid.upper[k]);
            }
        }
        if (squared_distance(x, y) > 0.0) out.emplace_back(std::move(x), std::move(y));
    }
    return out;
}

struct AssumptionReport {
    std::string condition;
    double k_hat = 0.0;
    std::vector<Vector> worst_points;  // the point, or the pair, attaining K-hat
    std::optional<double> user_constant;
    std::optional<bool> satisfied;  // k_hat <= user_constant, when one was given
    std::map<std::string, double> parameters;
    std::size_t samples = 0;
    std::vector<std::string> notes;

    /// Polynomial-growth checks: K-hat for each q on the ladder, the smallest
    /// q whose K-hat does not grow with the box, and whether the requested q
    /// is stable in that sense.
    std::vector<std::pair<double, double>> q_ladder;
    std::optional<double> fitted_q;
    std::optional<bool> q_stable;

    bool violated() const noexcept {
        return !std::isfinite(k_hat) || (satisfied && !*satisfied) || (q_stable && !*q_stable);
    }

    void apply_constant(std::optional<double> k) {
        user_constant = k;
        if (k) satisfied = k_hat <= *k;
    }
};

namespace detail {

struct CoeffEval {
    Vector f;
    Matrix g;
    std::vector<Vector> sigma;  // one per atom
};

inline CoeffEval evaluate(const JumpDiffusionProblem& p, std::span<const double> x) {
    CoeffEval e;
    const auto& c = p.coefficients;
    c.drift(x, e.f);
    c.diffusion(x, e.g);
    for (const auto& a : p.measure.atoms()) {
        Vector s;
        c.jump(x, a.mark, s);
        e.sigma.push_back(std::move(s));
    }
    return e;
}

inline double softplus(double y) { return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y)); }

/// Running maximum of a functional over points or pairs. The reported
/// constant is floored at 0; the location tracks the raw maximum.
struct MaxTracker {
    double raw = -std::numeric_limits<double>::infinity();
    std::vector<Vector> where;
    bool any_nonfinite = false;

    void offer(double v, std::vector<Vector> pts) {
        if (std::isnan(v)) {
            any_nonfinite = true;
            return;
        }
        if (v > raw) {
            raw = v;
            where = std::move(pts);
        }
    }

    double best() const noexcept { return std::max(0.0, raw); }
};

inline AssumptionReport finish(std::string id, const MaxTracker& t, std::size_t samples) {
    AssumptionReport r;
    r.condition = std::move(id);
    r.k_hat = t.best();
    r.worst_points = t.where;
    r.samples = samples;
    if (t.any_nonfinite) r.notes.emplace_back("some sample points produced non-finite values and were skipped");
    return r;
}

inline bool inside(const Vector& x, const Vector& lo, const Vector& hi) {
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
}

/// Scalar field a(x) -> growth quotient |a(x) - a(y)|^2 / ((1 + |x|^q + |y|^q) |x - y|^2).
inline double growth_quotient(double ax_minus_ay_sq, std::span<const double> x, std::span<const double> y, double q) {
    const double nx = norm(x), ny = norm(y);
    const double w = 1.0 + std::pow(nx, q) + std::pow(ny, q);
    return ax_minus_ay_sq / (w * squared_distance(x, y));
}

}  // namespace detail

/// max over pairs of [2<x-y, f(x)-f(y)> + |g(x)-g(y)|^2 + \int |sigma(x,z)-sigma(y,z)|^2 nu(dz)] / |x-y|^2.
inline double monotone_quotient(const JumpDiffusionProblem& p, std::span<const double> x, std::span<const double> y) {
    const auto ex = detail::evaluate(p, x);
    const auto ey = detail::evaluate(p, y);
    Vector dx(x.size()), df(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        dx[k] = x[k] - y[k];
        df[k] = ex.f[k] - ey.f[k];
    }
    double v = 2.0 * dot(dx, df) + squared_distance(ex.g.data, ey.g.data);
    for (std::size_t i = 0; i < p.measure.size(); ++i)
        v += p.measure.atom(i).weight * squared_distance(ex.sigma[i], ey.sigma[i]);
    return v / squared_norm(dx);
}

inline AssumptionReport check_monotone(const JumpDiffusionProblem& problem, const GridSpec& grid) {
    const auto pairs = sample_pairs(grid);
    detail::MaxTracker t;
    for (const auto& [x, y] : pairs) t.offer(monotone_quotient(problem, x, y), {x, y});
    return detail::finish("monotone", t, pairs.size());
}

inline double coercivity_quotient(const JumpDiffusionProblem& p, std::span<const double> x) {
    const auto e = detail::evaluate(p, x);
    double v = 2.0 * dot(x, e.f) + squared_norm(e.g.data);
    for (std::size_t i = 0; i < p.measure.size(); ++i) v += p.measure.atom(i).weight * squared_norm(e.sigma[i]);
    return v / (1.0 + squared_norm(x));
}

inline AssumptionReport check_coercivity(const JumpDiffusionProblem& problem, const GridSpec& grid) {
    const auto pts = sample_points(grid);
    detail::MaxTracker t;
    for (const auto& x : pts) t.offer(coercivity_quotient(problem, x), {x});
    return detail::finish("coercivity", t, pts.size());
}

/// [pbar |x|^{pbar-2} <x, f> + pbar(pbar-1)/2 |x|^{pbar-2} |g|^2
///  + (1 + (pbar-2) eps) \int |sigma|^pbar nu(dz)] / (1 + |x|^pbar),
/// with every power ratio evaluated in log space.
inline double pbar_quotient(const JumpDiffusionProblem& p, std::span<const double> x, int pbar, double eps) {
    const auto e = detail::evaluate(p, x);
    const double P = static_cast<double>(pbar);
    const double nx = norm(x);
    // a = |x|^{P-2} / (1 + |x|^P); lse = log(1 + |x|^P)
    double a, lse;
    if (nx == 0.0) {
        a = pbar == 2 ? 1.0 : 0.0;
        lse = 0.0;
    } else {
        const double L = std::log(nx);
        lse = detail::softplus(P * L);
        a = pbar == 2 ? std::exp(-lse) : std::exp((P - 2.0) * L - lse);
    }
    double v = P * dot(x, e.f) * a + 0.5 * P * (P - 1.0) * squared_norm(e.g.data) * a;
    double jumps = 0.0;
    for (std::size_t i = 0; i < p.measure.size(); ++i) {
        const double ns = norm(e.sigma[i]);
        if (ns == 0.0) continue;
        jumps += p.measure.atom(i).weight * std::exp(P * std::log(ns) - lse);
    }
    return v + (1.0 + (P - 2.0) * eps) * jumps;
}

inline AssumptionReport check_pbar_moment_condition(const JumpDiffusionProblem& problem, const GridSpec& grid,
                                                    int pbar, double eps = 1.0) {
    if (pbar < 2 || pbar % 2 != 0) throw std::invalid_argument("pbar must be an even integer >= 2");
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    const auto pts = sample_points(grid);
    detail::MaxTracker t;
    for (const auto& x : pts) {
        const double v = pbar_quotient(problem, x, pbar, eps);
        if (!std::isfinite(v)) {
            t.any_nonfinite = true;
            continue;
        }
        t.offer(v, {x});
    }
    auto r = detail::finish("pbar-moment", t, pts.size());
    r.parameters["pbar"] = pbar;
    r.parameters["epsilon"] = eps;
    return r;
}

namespace detail {

/// Scalar fields a_r(x) whose growth quotients are maximized together.
using ScalarFields = std::function<void(std::span<const double> x, Vector& out)>;

struct GrowthSweep {
    double k_hat = 0.0;
    std::vector<Vector> where;
    bool any_nonfinite = false;
};

/// With `as_vector` the fields form one vector and its Euclidean difference
/// enters the quotient; otherwise every field is a separate scalar.
inline GrowthSweep growth_sweep(const std::vector<std::pair<Vector, Vector>>& pairs, const ScalarFields& fields,
                                bool as_vector, double q, const Vector& lo, const Vector& hi) {
    MaxTracker t;
    Vector ax, ay;
    for (const auto& [x, y] : pairs) {
        if (!inside(x, lo, hi) || !inside(y, lo, hi)) continue;
        fields(x, ax);
        fields(y, ay);
        if (as_vector) {
            t.offer(growth_quotient(squared_distance(ax, ay), x, y, q), {x, y});
            continue;
        }
        for (std::size_t r = 0; r < ax.size(); ++r) {
            const double diff = ax[r] - ay[r];
            t.offer(growth_quotient(diff * diff, x, y, q), {x, y});
        }
    }
    return {t.best(), t.where, t.any_nonfinite};
}

inline Vector scaled_box(const Vector& lo, const Vector& hi, double s, bool upper) {
    Vector out(lo.size());
    for (std::size_t k = 0; k < lo.size(); ++k) {
        const double c = 0.5 * (lo[k] + hi[k]);
        const double half = 0.5 * (hi[k] - lo[k]) * s;
        out[k] = upper ? c + half : c - half;
    }
    return out;
}

/// K-hat(q) on the full box must not exceed this factor times K-hat(q) on the
/// half-size box for q to count as stable (a q one too small roughly doubles
/// K-hat when the box doubles).
inline constexpr double kStableGrowthFactor = 1.5;
inline constexpr int kMaxLadderQ = 8;

inline AssumptionReport growth_report(std::string id, const GridSpec& grid, const ScalarFields& fields, bool as_vector,
                                      double q) {
    if (!(q >= 0.0)) throw std::invalid_argument("q must be >= 0");
    const auto pairs = sample_pairs(grid);
    const auto full = growth_sweep(pairs, fields, as_vector, q, grid.lower, grid.upper);
    AssumptionReport r;
    r.condition = std::move(id);
    r.k_hat = full.k_hat;
    r.worst_points = full.where;
    r.samples = pairs.size();
    r.parameters["q"] = q;
    if (full.any_nonfinite) r.notes.emplace_back("some sample pairs produced non-finite values and were skipped");

    const Vector hlo = scaled_box(grid.lower, grid.upper, 0.5, false);
    const Vector hhi = scaled_box(grid.lower, grid.upper, 0.5, true);
    auto stable = [&](double qq, double k_full) {
        const double k_half = growth_sweep(pairs, fields, as_vector, qq, hlo, hhi).k_hat;
        return k_full <= kStableGrowthFactor * k_half || k_full == 0.0;
    };
    r.q_stable = stable(q, full.k_hat);
    for (int qq = 0; qq <= kMaxLadderQ; ++qq) {
        const double k = growth_sweep(pairs, fields, as_vector, qq, grid.lower, grid.upper).k_hat;
        r.q_ladder.emplace_back(qq, k);
        if (!r.fitted_q && stable(qq, k)) r.fitted_q = qq;
    }
    if (!*r.q_stable) r.notes.emplace_back("K-hat grows with the box at this q: growth exponent too small");
    return r;
}

}  // namespace detail

/// max over pairs of |f(x) - f(y)|^2 / ((1 + |x|^q + |y|^q) |x - y|^2), plus
/// the ladder of q = 0..8 and the smallest q whose K-hat stops growing with
/// the box.
inline AssumptionReport check_polynomial_growth(const JumpDiffusionProblem& problem, const GridSpec& grid, double q) {
    auto fields = [f = problem.coefficients.drift](std::span<const double> x, Vector& out) { f(x, out); };
    return detail::growth_report("polynomial-growth", grid, fields, true, q);
}

struct DerivativeOptions {
    bool allow_finite_difference = true;
    double fd_step = 1e-5;
};

/// Central-difference Jacobian of the drift.
inline void fd_jacobian(const DriftFn& f, std::span<const double> x, double step, Matrix& out) {
    const std::size_t d = x.size();
    out.resize(d, d);
    Vector xp(x.begin(), x.end()), fp, fm;
    for (std::size_t j = 0; j < d; ++j) {
        const double xj = xp[j];
        xp[j] = xj + step;
        f(xp, fp);
        xp[j] = xj - step;
        f(xp, fm);
        xp[j] = xj;
        for (std::size_t i = 0; i < d; ++i) out(i, j) = (fp[i] - fm[i]) / (2.0 * step);
    }
}

/// Central-difference second derivatives from a Jacobian routine.
inline void fd_hessian(const JacobianFn& jac, std::span<const double> x, double step, Vector& out) {
    const std::size_t d = x.size();
    out.assign(d * d * d, 0.0);
    Vector xp(x.begin(), x.end());
    Matrix jp, jm;
    for (std::size_t k = 0; k < d; ++k) {
        const double xk = xp[k];
        xp[k] = xk + step;
        jac(xp, jp);
        xp[k] = xk - step;
        jac(xp, jm);
        xp[k] = xk;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out[(i * d + j) * d + k] = (jp(i, j) - jm(i, j)) / (2.0 * step);
    }
}

/// Jacobian and second-derivative routines: registered ones when present,
/// central differences otherwise (or a configuration error when disabled).
inline std::pair<JacobianFn, HessianFn> drift_derivatives(const CoefficientSet& c, const DerivativeOptions& opt,
                                                          std::vector<std::string>* notes = nullptr) {
    JacobianFn jac = c.drift_jacobian;
    HessianFn hess = c.drift_hessian;
    if ((!jac || !hess) && !opt.allow_finite_difference)
        throw std::invalid_argument("drift derivatives are not registered and finite differences are disabled");
    if (!jac) {
        const double step = opt.fd_step;
        jac = [f = c.drift, step](std::span<const double> x, Matrix& out) { fd_jacobian(f, x, step, out); };
        if (notes) notes->push_back("first derivatives by central differences, step " + std::to_string(step));
    }
    if (!hess) {
        const double step = opt.fd_step;
        hess = [jac, step](std::span<const double> x, Vector& out) { fd_hessian(jac, x, step, out); };
        if (notes) notes->push_back("second derivatives by central differences, step " + std::to_string(step));
    }
    return {jac, hess};
}

/// Growth functional applied to every d f_i / d x_j and d^2 f_i / d x_j d x_k;
/// K-hat is the maximum over all entries.
inline AssumptionReport check_derivative_growth(const JumpDiffusionProblem& problem, const GridSpec& grid, double q,
                                                const DerivativeOptions& options = {}) {
    std::vector<std::string> notes;
    auto [jac, hess] = drift_derivatives(problem.coefficients, options, &notes);
    auto fields = [jac = jac, hess = hess](std::span<const double> x, Vector& out) {
        Matrix J;
        Vector H;
        jac(x, J);
        hess(x, H);
        out.assign(J.data.begin(), J.data.end());
        out.insert(out.end(), H.begin(), H.end());
    };
    auto r = detail::growth_report("derivative-growth", grid, fields, false, q);
    r.notes.insert(r.notes.end(), notes.begin(), notes.end());
    return r;
}

}  // namespace jdsim
