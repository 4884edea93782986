#pragma once

// Reproducible per-path random streams.
//
// Every path of a Monte Carlo study owns generators derived from
// (master_seed, path_index, stream_id) through an avalanche mixer, so the
// draws of path i never depend on how many threads ran or in which order.
// Normal variates use inverse-CDF sampling so the bit pattern of every draw
// is fixed by this file alone (no dependence on the standard library's
// distribution implementations).

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace jdsim {

/// Bumped whenever any draw sequence below changes.
inline constexpr std::uint32_t kRngAlgorithmVersion = 1;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ 1.0 (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        // SplitMix64 sequence fills the state; never all-zero.
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            s = mix64(x);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = std::rotl(state_[3], 45);
        return result;
    }

    const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }

    friend bool operator==(const Xoshiro256pp&, const Xoshiro256pp&) = default;

private:
    std::array<std::uint64_t, 4> state_{};
};

using Rng = Xoshiro256pp;

/// 64-bit seed for stream `stream_id` of path `path_index`.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t path_index,
                                    std::uint64_t stream_id) noexcept {
    std::uint64_t h = mix64(master_seed ^ 0x6a09e667f3bcc909ULL);
    h = mix64(h ^ mix64(path_index + 0x3c6ef372fe94f82bULL));
    h = mix64(h ^ mix64(stream_id + 0xa54ff53a5f1d36f1ULL));
    return h;
}

inline Rng derive_path_rng(std::uint64_t master_seed, std::uint64_t path_index,
                           std::uint64_t stream_id) noexcept {
    return Rng(derive_seed(master_seed, path_index, stream_id));
}

/// Uniform on the open interval (0, 1); midpoints of a 2^-52 lattice, so both
/// endpoints are excluded exactly.
inline double uniform_open01(Rng& rng) noexcept {
    return (static_cast<double>(rng() >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile. Acklam's rational approximation followed by one
/// Halley refinement step against erfc; relative accuracy near machine epsilon.
inline double normal_quantile(double p) noexcept {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    // Upper half by symmetry: 1 - p is exact there, and the refinement below
    // would otherwise lose digits to cancellation near p = 1.
    if (p > 0.5) return -normal_quantile(1.0 - p);

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

inline double standard_normal(Rng& rng) noexcept { return normal_quantile(uniform_open01(rng)); }

/// Exponential with rate 1.
inline double standard_exponential(Rng& rng) noexcept { return -std::log(uniform_open01(rng)); }

}  // namespace jdsim
