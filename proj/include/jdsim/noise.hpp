#pragma once

// Driving noise for one Monte Carlo path: Brownian motion sampled on a dyadic
// grid plus a Poisson jump stream with exact event times. A realization built
// at the finest level drives every coarser step size through coarsen(), which
// is what couples the paths in a strong-error study.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jdsim/rng.hpp"
#include "jdsim/sde_core.hpp"

namespace jdsim {

/// Streams of a path; the jump stream does not depend on the Brownian level.
enum class NoiseStream : std::uint64_t { brownian = 0, jumps = 1, initial = 2 };

/// Brownian path values W(t_k), t_k = k T / 2^level, k = 0..2^level, stored
/// row-major ((N + 1) x m) with W(0) = 0. The values are primary: increments
/// are differences of stored values, so W at any time shared by two
/// resolutions is the same double.
class BrownianGrid {
public:
    BrownianGrid() = default;
    BrownianGrid(int level, double horizon, std::size_t dim, std::vector<double> values)
        : level_(level), horizon_(horizon), dim_(dim), values_(std::move(values)) {
        if (values_.size() != (steps() + 1) * dim_)
            throw std::invalid_argument("BrownianGrid: value array has wrong size");
    }

    int level() const noexcept { return level_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t steps() const noexcept { return std::size_t{1} << level_; }
    double step_size() const noexcept { return horizon_ / static_cast<double>(steps()); }

    /// Grid time t_k; exact scaling by a power of two keeps times shared
    /// between levels bit-identical.
    double time(std::size_t k) const noexcept {
        return static_cast<double>(k) * horizon_ / static_cast<double>(steps());
    }

    std::span<const double> value(std::size_t k) const { return {values_.data() + k * dim_, dim_}; }
    const std::vector<double>& values() const noexcept { return values_; }

    double increment(std::size_t k, std::size_t j) const noexcept {
        return values_[(k + 1) * dim_ + j] - values_[k * dim_ + j];
    }

    void increment(std::size_t k, std::span<double> out) const noexcept {
        for (std::size_t j = 0; j < dim_; ++j) out[j] = increment(k, j);
    }

    /// N x m array of increments.
    std::vector<double> increments() const {
        std::vector<double> out(steps() * dim_);
        for (std::size_t k = 0; k < steps(); ++k)
            for (std::size_t j = 0; j < dim_; ++j) out[k * dim_ + j] = increment(k, j);
        return out;
    }

    /// Builds a grid from fine increments (N x m, summed left to right).
    static BrownianGrid from_increments(int level, double horizon, std::size_t dim,
                                        std::span<const double> increments) {
        const std::size_t n = std::size_t{1} << level;
        if (increments.size() != n * dim) throw std::invalid_argument("BrownianGrid: increment array has wrong size");
        std::vector<double> values((n + 1) * dim, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < dim; ++j)
                values[(k + 1) * dim + j] = values[k * dim + j] + increments[k * dim + j];
        return BrownianGrid(level, horizon, dim, std::move(values));
    }

    friend bool operator==(const BrownianGrid&, const BrownianGrid&) = default;

private:
    int level_ = 0;
    double horizon_ = 1.0;
    std::size_t dim_ = 1;
    std::vector<double> values_;
};

/// 2^level x m i.i.d. N(0, T / 2^level) increments.
inline BrownianGrid sample_brownian(Rng& rng, double horizon, int level, std::size_t dim) {
    if (level < 0 || level > 40) throw std::invalid_argument("sample_brownian: level out of range");
    if (!(horizon > 0.0)) throw std::invalid_argument("sample_brownian: horizon must be > 0");
    if (dim == 0) throw std::invalid_argument("sample_brownian: dimension must be >= 1");
    const std::size_t n = std::size_t{1} << level;
    const double scale = std::sqrt(horizon / static_cast<double>(n));
    std::vector<double> values((n + 1) * dim, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < dim; ++j)
            values[(k + 1) * dim + j] = values[k * dim + j] + scale * standard_normal(rng);
    return BrownianGrid(level, horizon, dim, std::move(values));
}

/// Grid with `factor` fine steps per coarse step.
inline BrownianGrid coarsen(const BrownianGrid& grid, std::size_t factor) {
    if (factor == 0 || !std::has_single_bit(factor) || factor > grid.steps())
        throw std::invalid_argument("coarsen: factor " + std::to_string(factor) +
                                    " is not a power of two <= 2^level");
    if (factor == 1) return grid;
    const int shift = std::countr_zero(factor);
    const std::size_t n = grid.steps() / factor;
    const std::size_t m = grid.dim();
    std::vector<double> values((n + 1) * m);
    for (std::size_t k = 0; k <= n; ++k) {
        const auto src = grid.value(k * factor);
        std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(k * m));
    }
    return BrownianGrid(grid.level() - shift, grid.horizon(), m, std::move(values));
}

/// Jump events sorted strictly increasing in time, all in (0, T].
struct JumpStream {
    double horizon = 1.0;
    std::vector<JumpEvent> events;

    std::size_t size() const noexcept { return events.size(); }
    bool empty() const noexcept { return events.empty(); }
};

/// Exponential inter-arrival times with rate lambda: the event count is
/// Poisson(lambda T) and, given the count, the times are distributed as
/// sorted i.i.d. uniforms on (0, T]. Marks are i.i.d. from nu / lambda.
inline JumpStream sample_jump_stream(Rng& rng, const MarkMeasure& measure, double horizon) {
    const double rate = measure.total_mass();
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ProblemError("sample_jump_stream: intensity must be finite and > 0");
    JumpStream stream;
    stream.horizon = horizon;
    double t = 0.0;
    for (;;) {
        t += standard_exponential(rng) / rate;
        if (!(t <= horizon)) break;
        const std::size_t atom = measure.size() == 1 ? 0 : measure.select(uniform_open01(rng));
        if (!stream.events.empty() && !(t > stream.events.back().time)) continue;  // tie at double resolution
        stream.events.push_back({t, atom});
    }
    return stream;
}

/// Events with time in the half-open window (t0, t1].
inline std::span<const JumpEvent> jumps_in_window(const JumpStream& stream, double t0, double t1) {
    if (!(t0 < t1)) throw std::invalid_argument("jumps_in_window: window must satisfy t0 < t1");
    const auto& ev = stream.events;
    auto by_time = [](const JumpEvent& e, double t) { return e.time <= t; };
    const auto first = std::lower_bound(ev.begin(), ev.end(), t0, by_time);
    const auto last = std::lower_bound(first, ev.end(), t1, by_time);
    return {ev.data() + (first - ev.begin()), static_cast<std::size_t>(last - first)};
}

/// Marks of the events in (t0, t1].
inline std::vector<Vector> window_marks(const JumpStream& stream, const MarkMeasure& measure, double t0, double t1) {
    std::vector<Vector> out;
    for (const auto& e : jumps_in_window(stream, t0, t1)) out.push_back(measure.atom(e.atom).mark);
    return out;
}

struct NoiseRealization {
    BrownianGrid brownian;
    JumpStream jumps;
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
};

/// Fully determined by (master_seed, path_index, level, T, m, measure).
inline NoiseRealization make_noise(std::uint64_t master_seed, std::uint64_t path_index, int level, double horizon,
                                   std::size_t noise_dim, const MarkMeasure& measure) {
    Rng brng = derive_path_rng(master_seed, path_index, static_cast<std::uint64_t>(NoiseStream::brownian));
    Rng jrng = derive_path_rng(master_seed, path_index, static_cast<std::uint64_t>(NoiseStream::jumps));
    NoiseRealization out;
    out.brownian = sample_brownian(brng, horizon, level, noise_dim);
    out.jumps = sample_jump_stream(jrng, measure, horizon);
    out.master_seed = master_seed;
    out.path_index = path_index;
    return out;
}

inline NoiseRealization make_noise(std::uint64_t master_seed, std::uint64_t path_index, int level,
                                   const JumpDiffusionProblem& problem) {
    return make_noise(master_seed, path_index, level, problem.horizon, problem.noise_dim(), problem.measure);
}

/// X0 of path `path_index`; draws from its own stream when the problem has a sampler.
inline Vector path_initial_state(const JumpDiffusionProblem& problem, std::uint64_t master_seed,
                                 std::uint64_t path_index) {
    if (!problem.initial_sampler) return problem.initial;
    Rng rng = derive_path_rng(master_seed, path_index, static_cast<std::uint64_t>(NoiseStream::initial));
    return problem.initial_sampler(rng);
}

}  // namespace jdsim
