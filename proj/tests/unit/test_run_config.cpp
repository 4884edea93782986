#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "jdsim/run_config.hpp"

using namespace jdsim;

namespace {

RunConfig parse(const std::string& text, RunConfig c = {}) {
    std::istringstream in(text);
    apply_config_text(c, in);
    return c;
}

}  // namespace

TEST(RunConfig, ParsesSectionsAndComments) {
    const auto c = parse(
        "# leading comment\n"
        "command = moments\n"
        "seed = 42\n"
        "[run]\n"
        "schemes = tamed, sine\n"
        "exponents = 3,4 ,5\n"
        "  ; indented comment\n"
        "[model]\n"
        "id = cubic-additive\n"
        "x0 = 2.5\n"
        "[moments]\n"
        "p = 4\n"
        "[local_order]\n"
        "x = 1, -2\n"
        "exact = true\n"
        "[constants]\n"
        "monotone = 3\n");
    EXPECT_EQ(c.command, "moments");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.schemes, (std::vector<std::string>{"tamed", "sine"}));
    EXPECT_EQ(c.exponents, (std::vector<int>{3, 4, 5}));
    EXPECT_EQ(c.model, "cubic-additive");
    EXPECT_EQ(c.model_params.at("x0"), 2.5);
    EXPECT_EQ(c.moment_p, 4);
    EXPECT_EQ(c.local_x, (std::vector<double>{1.0, -2.0}));
    EXPECT_TRUE(c.local_exact);
    EXPECT_EQ(c.constants.at("monotone"), 3.0);
}

TEST(RunConfig, ErrorsCarryLineNumbers) {
    try {
        parse("seed = 1\n\n[run]\nbogus = 3\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("[run\n"), ConfigError);
    EXPECT_THROW(parse("seed\n"), ConfigError);
    EXPECT_THROW(parse("seed = -1\n"), ConfigError);
    EXPECT_THROW(parse("paths = lots\n"), ConfigError);
    EXPECT_THROW(parse("[constants]\nno-such-condition = 1\n"), ConfigError);
    EXPECT_THROW(parse("[nowhere]\nkey = 1\n"), ConfigError);
}

TEST(RunConfig, TextRoundTrips) {
    RunConfig c;
    c.command = "local-order";
    c.model = "merton-linear";
    c.model_params = {{"b", 0.3}};
    c.schemes = {"sine", "euler-maruyama"};
    c.exponents = {2, 7};
    c.seed = 18446744073709551615ull;
    c.local_x = {0.1};
    c.tolerance = 0.1 + 0.2;  // not exactly representable in short decimal
    c.eps = 1e-300;
    c.constants = {{"coercivity", 4.5}};
    const std::string text = config_text(c);
    const auto back = parse(text);
    EXPECT_EQ(config_text(back), text);
    RunConfig expected = c;
    expected.model_params = default_registry().resolve(c.model, c.model_params);
    EXPECT_EQ(back, expected);
}

TEST(RunConfig, PrefixedTextListsEverySection) {
    const std::string text = config_text(RunConfig{}, "# ");
    for (const char* s : {"# [run]", "# [model]", "# [moments]", "# [local_order]", "# [assumptions]"})
        EXPECT_NE(text.find(s), std::string::npos) << s;
    EXPECT_EQ(text.find("[constants]"), std::string::npos);
}

TEST(RunConfig, LaterSourcesOverrideEarlier) {
    RunConfig c = parse("seed = 5\npaths = 100\n");
    c = parse("seed = 9\n", c);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.paths, 100u);
    for (const auto& f : config_fields())
        if (f.flag == "--paths") f.set(c, "7");
    EXPECT_EQ(c.paths, 7u);
}

TEST(RunConfig, SeedFromEnvironment) {
    ::setenv(kSeedEnvVar, "1234", 1);
    EXPECT_EQ(default_config().seed, 1234u);
    ::setenv(kSeedEnvVar, "x", 1);
    EXPECT_THROW(default_config(), ConfigError);
    ::unsetenv(kSeedEnvVar);
    EXPECT_EQ(default_config().seed, 0u);
}

TEST(RunConfig, CommandDefaults) {
    RunConfig c;
    c.command = "local-order";
    auto r = resolve_config(c);
    EXPECT_EQ(r.exponents, (std::vector<int>{4, 5, 6, 7, 8}));
    EXPECT_EQ(r.paths, 10000u);
    c.command = "bench";
    r = resolve_config(c);
    EXPECT_EQ(r.schemes, (std::vector<std::string>{"tamed", "sine"}));
    c.command = "convergence";
    r = resolve_config(c);
    EXPECT_EQ(r.exponents, (std::vector<int>{8, 9, 10, 11, 12}));
    EXPECT_EQ(r.paths, 5000u);
    EXPECT_EQ(r.reference_exponent, 13);
    EXPECT_NO_THROW(validate_config(r));
}

TEST(RunConfig, ValidationRejectsBadValues) {
    auto bad = [](auto mutate) {
        RunConfig c = resolve_config(RunConfig{});
        mutate(c);
        return c;
    };
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.command = "fly"; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.model = "nope"; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.model_params["zeta"] = 1; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.model_params["mu"] = -1; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.schemes = {"rk4"}; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.reference_exponent = 11; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.mode = "max"; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.moment_p = 3; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.substeps = 12; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.lower = 5; })), ConfigError);
    EXPECT_THROW(validate_config(bad([](RunConfig& c) { c.pbar = 7; })), ConfigError);
    EXPECT_NO_THROW(validate_config(bad([](RunConfig& c) { c.reference_exponent = 12; })));
}
