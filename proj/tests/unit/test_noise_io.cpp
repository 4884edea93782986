#include <gtest/gtest.h>

#include <sstream>

#include "jdsim/noise_io.hpp"

using namespace jdsim;

TEST(NoiseIo, RoundTripIsBitExact) {
    const MarkMeasure m({{Vector{1.0}, 2.0}, {Vector{-0.5}, 1.0}});
    const auto noise = make_noise(123, 45, 6, 0.75, 2, m);
    std::stringstream buf;
    write_noise(buf, noise);
    const auto back = read_noise(buf);
    EXPECT_EQ(back.brownian, noise.brownian);
    EXPECT_EQ(back.master_seed, 123u);
    EXPECT_EQ(back.path_index, 45u);
    EXPECT_EQ(back.jumps.horizon, 0.75);
    ASSERT_EQ(back.jumps.size(), noise.jumps.size());
    for (std::size_t k = 0; k < back.jumps.size(); ++k) {
        EXPECT_EQ(back.jumps.events[k].time, noise.jumps.events[k].time);
        EXPECT_EQ(back.jumps.events[k].atom, noise.jumps.events[k].atom);
    }
}

TEST(NoiseIo, HeaderIsLittleEndianWithMagic) {
    const auto noise = make_noise(1, 2, 0, 1.0, 1, MarkMeasure::poisson(1.0));
    std::stringstream buf;
    write_noise(buf, noise);
    const std::string bytes = buf.str();
    ASSERT_GE(bytes.size(), 12u);
    EXPECT_EQ(bytes.substr(0, 8), std::string("JDNOISE\0", 8));
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // version, low byte first
    EXPECT_EQ(bytes[9], 0);
}

TEST(NoiseIo, RejectsCorruptInput) {
    std::stringstream bad("not a noise file at all");
    EXPECT_THROW(read_noise(bad), std::runtime_error);
    const auto noise = make_noise(1, 2, 3, 1.0, 1, MarkMeasure::poisson(1.0));
    std::stringstream buf;
    write_noise(buf, noise);
    std::string s = buf.str();
    s.resize(s.size() / 2);
    std::stringstream truncated(s);
    EXPECT_THROW(read_noise(truncated), std::runtime_error);
}
