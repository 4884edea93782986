#pragma once

// Binary dump of a NoiseRealization for debugging. Little-endian throughout:
//
//   magic    8 bytes  "JDNOISE\0"
//   version  u32
//   seed     u64
//   path     u64
//   level    u32
//   horizon  f64
//   m        u32
//   values   u64 count, then f64 Brownian path values ((2^level + 1) * m)
//   events   u64 count, then (f64 time, u64 atom index) pairs

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "jdsim/noise.hpp"

namespace jdsim {

inline constexpr std::array<char, 8> kNoiseMagic{'J', 'D', 'N', 'O', 'I', 'S', 'E', '\0'};
inline constexpr std::uint32_t kNoiseFormatVersion = 1;

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw std::runtime_error("noise file truncated");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

}  // namespace detail

inline void write_noise(std::ostream& os, const NoiseRealization& noise) {
    using namespace detail;
    os.write(kNoiseMagic.data(), kNoiseMagic.size());
    put_le<std::uint32_t>(os, kNoiseFormatVersion);
    put_le<std::uint64_t>(os, noise.master_seed);
    put_le<std::uint64_t>(os, noise.path_index);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(noise.brownian.level()));
    put_f64(os, noise.brownian.horizon());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(noise.brownian.dim()));
    put_le<std::uint64_t>(os, noise.brownian.values().size());
    for (double v : noise.brownian.values()) put_f64(os, v);
    put_le<std::uint64_t>(os, noise.jumps.events.size());
    for (const auto& e : noise.jumps.events) {
        put_f64(os, e.time);
        put_le<std::uint64_t>(os, e.atom);
    }
    if (!os) throw std::runtime_error("failed writing noise file");
}

inline NoiseRealization read_noise(std::istream& is) {
    using namespace detail;
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kNoiseMagic) throw std::runtime_error("not a noise file");
    const auto version = get_le<std::uint32_t>(is);
    if (version != kNoiseFormatVersion)
        throw std::runtime_error("unsupported noise file version " + std::to_string(version));
    NoiseRealization out;
    out.master_seed = get_le<std::uint64_t>(is);
    out.path_index = get_le<std::uint64_t>(is);
    const auto level = get_le<std::uint32_t>(is);
    const double horizon = get_f64(is);
    const auto m = get_le<std::uint32_t>(is);
    if (level > 40 || m == 0) throw std::runtime_error("corrupt noise header");
    const auto nvalues = get_le<std::uint64_t>(is);
    if (nvalues != ((std::uint64_t{1} << level) + 1) * m) throw std::runtime_error("corrupt noise value count");
    std::vector<double> values(nvalues);
    for (auto& v : values) v = get_f64(is);
    out.brownian = BrownianGrid(static_cast<int>(level), horizon, m, std::move(values));
    out.jumps.horizon = horizon;
    const auto nevents = get_le<std::uint64_t>(is);
    out.jumps.events.reserve(nevents);
    for (std::uint64_t i = 0; i < nevents; ++i) {
        JumpEvent e;
        e.time = get_f64(is);
        e.atom = static_cast<std::size_t>(get_le<std::uint64_t>(is));
        out.jumps.events.push_back(e);
    }
    return out;
}

}  // namespace jdsim
