#pragma once

// Monte Carlo strong-error studies on coupled noise, log-log order fits,
// moment probes and one-step (local) order estimation.
//
// Reductions never depend on the thread count: paths are grouped into fixed
// blocks, each block is processed sequentially, and per-path or per-block
// partial results are combined in index order afterwards.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "jdsim/linalg.hpp"
#include "jdsim/noise.hpp"
#include "jdsim/parallel.hpp"
#include "jdsim/schemes.hpp"
#include "jdsim/sde_core.hpp"

namespace jdsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorMode { terminal, sup };
enum class OverflowPolicy { infinity, exclude };
enum class ReferenceKind { numerical, exact };

inline const char* to_string(ErrorMode m) { return m == ErrorMode::terminal ? "terminal" : "sup"; }
inline const char* to_string(OverflowPolicy p) { return p == OverflowPolicy::infinity ? "infinity" : "exclude"; }
inline const char* to_string(ReferenceKind r) { return r == ReferenceKind::numerical ? "numerical" : "exact"; }

/// Coarse step sizes h = 2^-i T for i in coarse_exponents, reference 2^-L T.
struct StudyConfig {
    std::vector<int> coarse_exponents{8, 9, 10, 11, 12};
    int reference_exponent = 13;
    std::size_t paths = 5000;
    std::uint64_t seed = 0;
    ErrorMode mode = ErrorMode::terminal;
    ReferenceKind reference = ReferenceKind::numerical;
    SchemePtr reference_scheme;  // null: the studied scheme
    OverflowPolicy overflow = OverflowPolicy::infinity;
    unsigned threads = 0;

    void validate() const {
        if (coarse_exponents.empty()) throw std::invalid_argument("study: no coarse step exponents");
        for (int e : coarse_exponents)
            if (e < 0 || e > 30) throw std::invalid_argument("study: step exponent out of range [0, 30]");
        if (reference_exponent > 30) throw std::invalid_argument("study: reference exponent out of range");
        const int max_e = *std::max_element(coarse_exponents.begin(), coarse_exponents.end());
        if (reference_exponent < max_e)
            throw std::invalid_argument("study: reference exponent must be >= every coarse exponent");
        if (paths < 2) throw std::invalid_argument("study: need at least 2 paths");
    }
};

struct ErrorRow {
    double h = 0.0;
    double rms_error = 0.0;
    double standard_error = 0.0;
    double wall_seconds = 0.0;
    std::size_t overflow_count = 0;
};

/// Rows sorted by decreasing h.
struct ErrorTable {
    std::vector<ErrorRow> rows;
};

struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t rows_used = 0;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordinary least squares of log2(y) on log2(x) over pairs with finite
/// positive entries.
inline OrderFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::isfinite(xs[i]) && xs[i] > 0.0 && std::isfinite(ys[i]) && ys[i] > 0.0) {
            lx.push_back(std::log2(xs[i]));
            ly.push_back(std::log2(ys[i]));
        }
    }
    if (lx.size() < 2) throw FitError("order fit needs at least 2 rows with finite positive error");
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw FitError("order fit needs at least 2 distinct step sizes");
    OrderFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    // A perfect fit (including a flat line) has r^2 = 1.
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.rows_used = lx.size();
    return fit;
}

inline OrderFit fit_order(const ErrorTable& table) {
    std::vector<double> hs, es;
    for (const auto& r : table.rows) {
        hs.push_back(r.h);
        es.push_back(r.rms_error);
    }
    return fit_loglog(hs, es);
}

namespace detail {

inline constexpr std::size_t kBlockPaths = 64;

struct MeanStats {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Mean and standard error from sums of x and x^2 over n samples.
inline MeanStats mean_stats(double sum, double sum_sq, double n) {
    MeanStats s;
    if (n <= 0.0) return {kInf, kInf};
    s.mean = sum / n;
    if (!std::isfinite(s.mean)) return {kInf, kInf};
    const double var = n > 1.0 ? std::max(0.0, (sum_sq / n - s.mean * s.mean) * n / (n - 1.0)) : 0.0;
    s.standard_error = std::sqrt(var / n);
    return s;
}

/// RMS and its delta-method standard error from the mean of squared errors.
inline std::pair<double, double> rms_from_mse(const MeanStats& mse) {
    if (!std::isfinite(mse.mean)) return {kInf, kInf};
    const double rms = std::sqrt(mse.mean);
    const double se = rms > 0.0 ? mse.standard_error / (2.0 * rms) : 0.0;
    return {rms, se};
}

}  // namespace detail

/// Strong error (E|X(t_n) - Y_n|^2)^{1/2} of `scheme` against a reference on
/// coupled noise. Terminal mode measures at T; sup mode takes the max over the
/// coarse grid of the per-time Monte Carlo mean.
inline ErrorTable estimate_strong_error(const JumpDiffusionProblem& problem, const OneStepScheme& scheme,
                                        const StudyConfig& config) {
    config.validate();
    if (config.reference == ReferenceKind::exact && !problem.has_exact())
        throw std::invalid_argument("study: exact reference requested but the model has no closed form");

    std::vector<int> exps = config.coarse_exponents;
    std::sort(exps.begin(), exps.end());  // increasing exponent == decreasing h
    exps.erase(std::unique(exps.begin(), exps.end()), exps.end());
    const std::size_t ne = exps.size();
    const int L = config.reference_exponent;
    const std::size_t M = config.paths;
    const std::size_t nblocks = (M + detail::kBlockPaths - 1) / detail::kBlockPaths;
    const OneStepScheme& ref_scheme = config.reference_scheme ? *config.reference_scheme : scheme;
    const bool sup = config.mode == ErrorMode::sup;
    const bool exclude = config.overflow == OverflowPolicy::exclude;

    std::vector<std::size_t> steps(ne);
    std::vector<std::size_t> offset(ne + 1, 0);  // per-time layout for sup mode
    for (std::size_t k = 0; k < ne; ++k) {
        steps[k] = std::size_t{1} << exps[k];
        offset[k + 1] = offset[k] + steps[k] + 1;
    }

    // Terminal mode: per-path squared errors. Sup mode: per-block sums.
    std::vector<double> path_err(sup ? 0 : ne * M);
    std::vector<double> block_sum(sup ? nblocks * offset[ne] : 0);
    std::vector<double> block_sum_sq(sup ? nblocks * offset[ne] : 0);
    std::vector<std::size_t> path_overflow(ne * M, 0);
    std::vector<double> block_seconds(nblocks * ne, 0.0);

    parallel_for(nblocks, config.threads, [&](std::size_t b) {
        const std::size_t begin = b * detail::kBlockPaths;
        const std::size_t end = std::min(M, begin + detail::kBlockPaths);
        for (std::size_t i = begin; i < end; ++i) {
            const NoiseRealization noise = make_noise(config.seed, i, L, problem);
            DiscretePath reference;
            if (config.reference == ReferenceKind::numerical) {
                reference = simulate_reference(problem, noise, ref_scheme, L);
            } else if (sup) {
                reference = exact_path(problem, noise, steps.back());
            } else {
                reference = exact_path(problem, noise, 1);
            }

            for (std::size_t k = 0; k < ne; ++k) {
                const auto t0 = std::chrono::steady_clock::now();
                const DiscretePath path = simulate_path(problem, scheme, noise, steps[k]);
                block_seconds[b * ne + k] +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const std::size_t ref_factor = reference.steps / steps[k];
                const bool bad = path.overflowed() || reference.overflowed();
                path_overflow[k * M + i] = bad ? 1 : 0;

                if (!sup) {
                    const double e2 = squared_distance(reference.terminal(), path.terminal());
                    path_err[k * M + i] = bad || !std::isfinite(e2) ? kInf : e2;
                    continue;
                }
                if (bad && exclude) continue;
                double* sum = block_sum.data() + b * offset[ne] + offset[k];
                double* sum_sq = block_sum_sq.data() + b * offset[ne] + offset[k];
                for (std::size_t n = 0; n <= steps[k]; ++n) {
                    double e2 = squared_distance(reference.state(n * ref_factor), path.state(n));
                    if (bad || !std::isfinite(e2)) e2 = kInf;
                    sum[n] += e2;
                    sum_sq[n] += e2 * e2;
                }
            }
        }
    });

    ErrorTable table;
    for (std::size_t k = 0; k < ne; ++k) {
        ErrorRow row;
        row.h = problem.horizon / static_cast<double>(steps[k]);
        for (std::size_t i = 0; i < M; ++i) row.overflow_count += path_overflow[k * M + i];
        for (std::size_t b = 0; b < nblocks; ++b) row.wall_seconds += block_seconds[b * ne + k];
        const double used = static_cast<double>(exclude ? M - row.overflow_count : M);

        detail::MeanStats mse;
        if (used == 0.0) {
            mse = {kInf, kInf};
        } else if (!sup) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                const double e2 = path_err[k * M + i];
                if (exclude && path_overflow[k * M + i]) continue;
                s += e2;
                s2 += e2 * e2;
            }
            mse = detail::mean_stats(s, s2, used);
        } else {
            mse = {-1.0, 0.0};
            for (std::size_t n = 0; n <= steps[k]; ++n) {
                double s = 0.0, s2 = 0.0;
                for (std::size_t b = 0; b < nblocks; ++b) {
                    s += block_sum[b * offset[ne] + offset[k] + n];
                    s2 += block_sum_sq[b * offset[ne] + offset[k] + n];
                }
                const auto stats = detail::mean_stats(s, s2, used);
                if (!(stats.mean <= mse.mean)) mse = stats;
            }
        }
        std::tie(row.rms_error, row.standard_error) = detail::rms_from_mse(mse);
        table.rows.push_back(row);
    }
    return table;
}

struct MomentConfig {
    int exponent = 8;  // h = 2^-exponent T
    int p = 2;
    std::size_t paths = 1000;
    std::uint64_t seed = 0;
    OverflowPolicy overflow = OverflowPolicy::infinity;
    unsigned threads = 0;
};

struct MomentEstimate {
    int p = 2;
    double h = 0.0;
    std::vector<double> times;
    std::vector<double> estimates;             // E|Y_n|^p per grid time
    std::vector<std::size_t> overflow_counts;  // paths non-finite at t_n
    std::size_t overflowed_paths = 0;
    double max_estimate = 0.0;
};

/// Monte Carlo E|Y_n|^p on the grid h = 2^-exponent T.
inline MomentEstimate estimate_moments(const JumpDiffusionProblem& problem, const OneStepScheme& scheme,
                                       const MomentConfig& config) {
    if (config.p < 2 || config.p % 2 != 0) throw std::invalid_argument("moments: p must be an even integer >= 2");
    if (config.exponent < 0 || config.exponent > 30) throw std::invalid_argument("moments: exponent out of range");
    if (config.paths < 1) throw std::invalid_argument("moments: need at least 1 path");
    const std::size_t N = std::size_t{1} << config.exponent;
    const std::size_t M = config.paths;
    const std::size_t nblocks = (M + detail::kBlockPaths - 1) / detail::kBlockPaths;
    const bool exclude = config.overflow == OverflowPolicy::exclude;

    std::vector<double> block_sum(nblocks * (N + 1), 0.0);
    std::vector<std::size_t> block_bad(nblocks * (N + 1), 0);
    std::vector<std::size_t> path_bad(M, 0);

    parallel_for(nblocks, config.threads, [&](std::size_t b) {
        const std::size_t begin = b * detail::kBlockPaths;
        const std::size_t end = std::min(M, begin + detail::kBlockPaths);
        for (std::size_t i = begin; i < end; ++i) {
            const NoiseRealization noise = make_noise(config.seed, i, config.exponent, problem);
            const DiscretePath path = simulate_path(problem, scheme, noise, N);
            path_bad[i] = path.overflowed() ? 1 : 0;
            for (std::size_t n = 0; n <= N; ++n) {
                const auto y = path.state(n);
                if (!all_finite(y)) {
                    ++block_bad[b * (N + 1) + n];
                    if (!exclude) block_sum[b * (N + 1) + n] = kInf;
                    continue;
                }
                const double r2 = squared_norm(y);
                double v = 1.0;
                for (int q = 0; q < config.p / 2; ++q) v *= r2;
                block_sum[b * (N + 1) + n] += v;
            }
        }
    });

    MomentEstimate out;
    out.p = config.p;
    out.h = problem.horizon / static_cast<double>(N);
    out.times.resize(N + 1);
    out.estimates.resize(N + 1);
    out.overflow_counts.assign(N + 1, 0);
    for (std::size_t i = 0; i < M; ++i) out.overflowed_paths += path_bad[i];
    out.max_estimate = -kInf;
    for (std::size_t n = 0; n <= N; ++n) {
        double s = 0.0;
        std::size_t bad = 0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            s += block_sum[b * (N + 1) + n];
            bad += block_bad[b * (N + 1) + n];
        }
        const double used = static_cast<double>(exclude ? M - bad : M);
        out.times[n] = static_cast<double>(n) * problem.horizon / static_cast<double>(N);
        out.overflow_counts[n] = bad;
        out.estimates[n] = used > 0.0 ? s / used : kInf;
        out.max_estimate = std::max(out.max_estimate, out.estimates[n]);
    }
    return out;
}

struct LocalOrderConfig {
    Vector x;                     // start state; empty means the problem's X0
    double t = 0.0;
    std::vector<int> exponents{4, 5, 6, 7, 8};  // h = 2^-e
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::size_t substeps = 64;    // fine steps of the reference per window
    bool use_exact = false;       // closed-form reference instead of substepping
    SchemePtr reference_scheme;   // null: the studied scheme
    double tolerance = 0.15;
    unsigned threads = 0;
};

struct LocalOrderRow {
    double h = 0.0;
    double weak_error = 0.0;  // |E[X - Y]|
    double weak_standard_error = 0.0;
    double strong_error = 0.0;  // (E|X - Y|^2)^{1/2}
    double strong_standard_error = 0.0;
    bool weak_flagged = false;  // below 3 standard errors: excluded from the weak fit
};

struct LocalOrderResult {
    std::vector<LocalOrderRow> rows;
    bool exact = false;  // every one-step error vanished
    std::optional<double> p1_hat;
    std::optional<double> p2_hat;
    std::optional<OrderFit> weak_fit;
    std::optional<OrderFit> strong_fit;
    bool p2_condition = false;  // p2_hat >= 1/2 - tol
    bool p1_condition = false;  // p1_hat >= p2_hat + 1/2 - tol
    double tolerance = 0.15;
};

/// One application of `scheme` over [t, t + h] against a fine reference on
/// the same noise, for each h; p1_hat / p2_hat are the log-log slopes of the
/// weak and strong one-step errors.
inline LocalOrderResult estimate_local_orders(const JumpDiffusionProblem& problem, const OneStepScheme& scheme,
                                              const LocalOrderConfig& config) {
    if (config.exponents.empty()) throw std::invalid_argument("local orders: no step exponents");
    if (config.paths < 2) throw std::invalid_argument("local orders: need at least 2 paths");
    if (config.substeps == 0 || !std::has_single_bit(config.substeps))
        throw std::invalid_argument("local orders: substeps must be a power of two");
    if (config.use_exact && !problem.has_exact())
        throw std::invalid_argument("local orders: exact reference requested but the model has no closed form");
    const Vector x = config.x.empty() ? problem.initial : config.x;
    const std::size_t d = problem.dim();
    const std::size_t m = problem.noise_dim();
    if (x.size() != d) throw std::invalid_argument("local orders: start state has wrong dimension");
    const int sub_level = std::countr_zero(config.substeps);
    double max_h = 0.0;
    for (int e : config.exponents) {
        if (e < 0 || e > 40) throw std::invalid_argument("local orders: exponent out of range");
        max_h = std::max(max_h, std::ldexp(1.0, -e));
    }
    if (config.t < 0.0 || config.t + max_h > problem.horizon)
        throw std::invalid_argument("local orders: need 0 <= t and t + max h <= T");

    const OneStepScheme& ref_scheme = config.reference_scheme ? *config.reference_scheme : scheme;
    const std::size_t ne = config.exponents.size();
    const std::size_t M = config.paths;
    std::vector<double> diff(ne * M * d);  // X_ref - Y per path

    const std::size_t nblocks = (M + detail::kBlockPaths - 1) / detail::kBlockPaths;
    parallel_for(nblocks, config.threads, [&](std::size_t b) {
        StepWorkspace ws;
        Vector y(d), cur(d), next(d), dW(m);
        const std::size_t begin = b * detail::kBlockPaths;
        const std::size_t end = std::min(M, begin + detail::kBlockPaths);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t k = 0; k < ne; ++k) {
                const double h = std::ldexp(1.0, -config.exponents[k]);
                Rng brng = derive_path_rng(config.seed, i, 16 + 2 * k);
                Rng jrng = derive_path_rng(config.seed, i, 17 + 2 * k);
                const BrownianGrid grid = sample_brownian(brng, h, sub_level, m);
                const JumpStream jumps = sample_jump_stream(jrng, problem.measure, h);

                const auto w_end = grid.value(grid.steps());
                for (std::size_t j = 0; j < m; ++j) dW[j] = w_end[j];
                scheme.step(config.t, x, h, dW, jumps.events, problem.measure, problem.coefficients, y, ws);

                Vector ref;
                if (config.use_exact) {
                    ref = problem.exact->flow(config.t, x, config.t + h, dW, jumps.events);
                } else {
                    cur = x;
                    const std::size_t S = grid.steps();
                    const double dt = h / static_cast<double>(S);
                    for (std::size_t s = 0; s < S; ++s) {
                        const double a = static_cast<double>(s) * h / static_cast<double>(S);
                        const double c = static_cast<double>(s + 1) * h / static_cast<double>(S);
                        grid.increment(s, dW);
                        ref_scheme.step(config.t + a, cur, dt, dW, jumps_in_window(jumps, a, c), problem.measure,
                                        problem.coefficients, next, ws);
                        std::swap(cur, next);
                    }
                    ref = cur;
                }
                for (std::size_t q = 0; q < d; ++q) diff[(k * M + i) * d + q] = ref[q] - y[q];
            }
        }
    });

    LocalOrderResult result;
    result.tolerance = config.tolerance;
    bool all_zero = true;
    std::vector<double> hs, weak, strong;
    std::vector<double> weak_h, weak_e;
    for (std::size_t k = 0; k < ne; ++k) {
        LocalOrderRow row;
        row.h = std::ldexp(1.0, -config.exponents[k]);
        double s2 = 0.0, s4 = 0.0, var_sum = 0.0;
        Vector mean(d, 0.0);
        for (std::size_t q = 0; q < d; ++q) {
            double s = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                const double v = diff[(k * M + i) * d + q];
                s += v;
                sq += v * v;
            }
            const auto st = detail::mean_stats(s, sq, static_cast<double>(M));
            mean[q] = st.mean;
            var_sum += st.standard_error * st.standard_error;
        }
        for (std::size_t i = 0; i < M; ++i) {
            const double e2 = squared_norm(std::span<const double>(diff.data() + (k * M + i) * d, d));
            s2 += e2;
            s4 += e2 * e2;
        }
        row.weak_error = norm(mean);
        row.weak_standard_error = std::sqrt(var_sum);
        std::tie(row.strong_error, row.strong_standard_error) =
            detail::rms_from_mse(detail::mean_stats(s2, s4, static_cast<double>(M)));
        if (row.strong_error != 0.0) all_zero = false;
        row.weak_flagged = !(row.weak_error > 3.0 * row.weak_standard_error);
        hs.push_back(row.h);
        strong.push_back(row.strong_error);
        if (!row.weak_flagged) {
            weak_h.push_back(row.h);
            weak_e.push_back(row.weak_error);
        }
        result.rows.push_back(row);
    }

    if (all_zero) {
        result.exact = true;
        result.p1_condition = result.p2_condition = true;
        return result;
    }
    try {
        result.strong_fit = fit_loglog(hs, strong);
        result.p2_hat = result.strong_fit->slope;
    } catch (const FitError&) {
    }
    try {
        result.weak_fit = fit_loglog(weak_h, weak_e);
        result.p1_hat = result.weak_fit->slope;
    } catch (const FitError&) {
    }
    result.p2_condition = result.p2_hat && *result.p2_hat >= 0.5 - config.tolerance;
    result.p1_condition = result.p1_hat && result.p2_hat && *result.p1_hat >= *result.p2_hat + 0.5 - config.tolerance;
    return result;
}

}  // namespace jdsim
