#pragma once

// Run configuration shared by every CLI command. The same (section, key)
// table drives the config-file parser, the command-line flags and the
// provenance text embedded in outputs, so an embedded config parses back to
// an identical RunConfig.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jdsim/format.hpp"
#include "jdsim/models.hpp"
#include "jdsim/schemes.hpp"

namespace jdsim {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr const char* kSeedEnvVar = "JDSIM_SEED";

inline const std::vector<std::string>& command_ids() {
    static const std::vector<std::string> ids{"convergence",       "moments", "local-order",
                                              "check-assumptions", "bench",   "list-models"};
    return ids;
}

struct RunConfig {
    std::string command = "convergence";
    std::string model = "three-half-jump";
    ParameterMap model_params;         // overrides of the model defaults
    std::vector<std::string> schemes;  // empty: command default
    std::vector<int> exponents;        // empty: command default
    int reference_exponent = 13;
    std::string reference = "numerical";
    std::string reference_scheme;  // empty: the studied scheme
    std::size_t paths = 0;         // 0: command default
    std::uint64_t seed = 0;
    std::string mode = "terminal";
    std::string overflow = "infinity";
    unsigned threads = 0;
    std::string output_dir = ".";

    int moment_p = 2;

    std::vector<double> local_x;  // empty: the model's X0
    double local_t = 0.0;
    std::size_t substeps = 64;
    bool local_exact = false;
    double tolerance = 0.15;

    double lower = -5.0;
    double upper = 5.0;
    std::size_t points_per_dim = 101;
    std::size_t random_points = 10000;
    std::size_t random_pairs = 10000;
    double q = 2.0;
    int pbar = 20;
    double eps = 1.0;
    bool derivatives = false;
    bool finite_difference = true;
    std::map<std::string, double> constants;  // condition id -> user constant

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <class T, class Fmt>
std::string join_list(const std::vector<T>& v, Fmt fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt(v[i]);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!parse_double(v, out)) throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
    return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    if (!parse_u64(v, out)) throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
    return out;
}

inline int to_int(const std::string& key, const std::string& v) {
    const bool neg = !v.empty() && v[0] == '-';
    const std::uint64_t mag = to_u64(key, neg ? v.substr(1) : v);
    if (mag > 1000000000ULL) throw ConfigError("'" + key + "': integer out of range");
    return neg ? -static_cast<int>(mag) : static_cast<int>(mag);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace detail

/// One scalar configuration field: file location, flag name and converters.
struct ConfigField {
    std::string section;
    std::string key;
    std::string flag;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
    using namespace detail;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        auto add = [&f](std::string section, std::string key, std::string flag, std::string help, auto set,
                        auto get) {
            f.push_back({std::move(section), std::move(key), std::move(flag), std::move(help), set, get});
        };
        add("run", "command", "", "command to run",
            [](RunConfig& c, const std::string& v) { c.command = v; }, [](const RunConfig& c) { return c.command; });
        add("model", "id", "--model", "model id (see list-models)",
            [](RunConfig& c, const std::string& v) { c.model = v; }, [](const RunConfig& c) { return c.model; });
        add("run", "schemes", "--schemes", "comma-separated scheme ids",
            [](RunConfig& c, const std::string& v) { c.schemes = split_list(v); },
            [](const RunConfig& c) { return join_list(c.schemes, [](const std::string& s) { return s; }); });
        add("run", "exponents", "--exponents", "comma-separated step exponents i (h = 2^-i T)",
            [](RunConfig& c, const std::string& v) {
                c.exponents.clear();
                for (const auto& s : split_list(v)) c.exponents.push_back(to_int("exponents", s));
            },
            [](const RunConfig& c) { return join_list(c.exponents, [](int e) { return std::to_string(e); }); });
        add("run", "reference_exponent", "--reference-exponent", "reference step exponent L",
            [](RunConfig& c, const std::string& v) { c.reference_exponent = to_int("reference_exponent", v); },
            [](const RunConfig& c) { return std::to_string(c.reference_exponent); });
        add("run", "reference", "--reference", "numerical or exact",
            [](RunConfig& c, const std::string& v) { c.reference = v; },
            [](const RunConfig& c) { return c.reference; });
        add("run", "reference_scheme", "--reference-scheme", "scheme for the numerical reference (default: studied)",
            [](RunConfig& c, const std::string& v) { c.reference_scheme = v; },
            [](const RunConfig& c) { return c.reference_scheme; });
        add("run", "paths", "--paths", "Monte Carlo paths M",
            [](RunConfig& c, const std::string& v) { c.paths = to_u64("paths", v); },
            [](const RunConfig& c) { return std::to_string(c.paths); });
        add("run", "seed", "--seed", "master seed",
            [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); });
        add("run", "mode", "--mode", "terminal or sup",
            [](RunConfig& c, const std::string& v) { c.mode = v; }, [](const RunConfig& c) { return c.mode; });
        add("run", "overflow", "--overflow", "infinity or exclude",
            [](RunConfig& c, const std::string& v) { c.overflow = v; },
            [](const RunConfig& c) { return c.overflow; });
        add("run", "threads", "--threads", "worker threads (0: all available)",
            [](RunConfig& c, const std::string& v) {
                const auto n = to_u64("threads", v);
                if (n > 4096) throw ConfigError("'threads': out of range");
                c.threads = static_cast<unsigned>(n);
            },
            [](const RunConfig& c) { return std::to_string(c.threads); });
        add("run", "output", "--output", "output directory",
            [](RunConfig& c, const std::string& v) { c.output_dir = v; },
            [](const RunConfig& c) { return c.output_dir; });
        add("moments", "p", "--p", "moment order (even)",
            [](RunConfig& c, const std::string& v) { c.moment_p = to_int("p", v); },
            [](const RunConfig& c) { return std::to_string(c.moment_p); });
        add("local_order", "x", "--x", "start state, comma-separated (default: X0)",
            [](RunConfig& c, const std::string& v) {
                c.local_x.clear();
                for (const auto& s : split_list(v)) c.local_x.push_back(to_double("x", s));
            },
            [](const RunConfig& c) { return join_list(c.local_x, [](double x) { return format_double(x); }); });
        add("local_order", "t", "--t", "start time",
            [](RunConfig& c, const std::string& v) { c.local_t = to_double("t", v); },
            [](const RunConfig& c) { return format_double(c.local_t); });
        add("local_order", "substeps", "--substeps", "reference substeps per window (power of two)",
            [](RunConfig& c, const std::string& v) { c.substeps = to_u64("substeps", v); },
            [](const RunConfig& c) { return std::to_string(c.substeps); });
        add("local_order", "exact", "--exact-local", "use the closed-form flow as the one-step reference",
            [](RunConfig& c, const std::string& v) { c.local_exact = to_bool("exact", v); },
            [](const RunConfig& c) { return fmt_bool(c.local_exact); });
        add("local_order", "tolerance", "--tolerance", "tolerance on the order conditions",
            [](RunConfig& c, const std::string& v) { c.tolerance = to_double("tolerance", v); },
            [](const RunConfig& c) { return format_double(c.tolerance); });
        add("assumptions", "lower", "--lower", "lower box bound (every coordinate)",
            [](RunConfig& c, const std::string& v) { c.lower = to_double("lower", v); },
            [](const RunConfig& c) { return format_double(c.lower); });
        add("assumptions", "upper", "--upper", "upper box bound (every coordinate)",
            [](RunConfig& c, const std::string& v) { c.upper = to_double("upper", v); },
            [](const RunConfig& c) { return format_double(c.upper); });
        add("assumptions", "points_per_dim", "--points-per-dim", "lattice points per axis",
            [](RunConfig& c, const std::string& v) { c.points_per_dim = to_u64("points_per_dim", v); },
            [](const RunConfig& c) { return std::to_string(c.points_per_dim); });
        add("assumptions", "random_points", "--random-points", "extra random sample points",
            [](RunConfig& c, const std::string& v) { c.random_points = to_u64("random_points", v); },
            [](const RunConfig& c) { return std::to_string(c.random_points); });
        add("assumptions", "random_pairs", "--random-pairs", "extra random sample pairs",
            [](RunConfig& c, const std::string& v) { c.random_pairs = to_u64("random_pairs", v); },
            [](const RunConfig& c) { return std::to_string(c.random_pairs); });
        add("assumptions", "q", "--q", "polynomial growth exponent",
            [](RunConfig& c, const std::string& v) { c.q = to_double("q", v); },
            [](const RunConfig& c) { return format_double(c.q); });
        add("assumptions", "pbar", "--pbar", "moment order for the pbar condition (even)",
            [](RunConfig& c, const std::string& v) { c.pbar = to_int("pbar", v); },
            [](const RunConfig& c) { return std::to_string(c.pbar); });
        add("assumptions", "eps", "--eps", "epsilon in the pbar condition",
            [](RunConfig& c, const std::string& v) { c.eps = to_double("eps", v); },
            [](const RunConfig& c) { return format_double(c.eps); });
        add("assumptions", "derivatives", "--derivatives", "also check drift derivative growth",
            [](RunConfig& c, const std::string& v) { c.derivatives = to_bool("derivatives", v); },
            [](const RunConfig& c) { return fmt_bool(c.derivatives); });
        add("assumptions", "finite_difference", "--finite-difference",
            "allow finite differences when derivatives are not registered",
            [](RunConfig& c, const std::string& v) { c.finite_difference = to_bool("finite_difference", v); },
            [](const RunConfig& c) { return fmt_bool(c.finite_difference); });
        return f;
    }();
    return fields;
}

inline const std::vector<std::string>& assumption_condition_ids() {
    static const std::vector<std::string> ids{"monotone", "coercivity", "pbar-moment", "polynomial-growth",
                                              "derivative-growth"};
    return ids;
}

/// Sets one (section, key) entry. Section "model" takes any key other than
/// "id" as a model parameter; section "constants" maps condition ids to
/// user constants.
inline void set_config_value(RunConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
    if (section == "model" && key != "id") {
        c.model_params[key] = detail::to_double(key, value);
        return;
    }
    if (section == "constants") {
        const auto& ids = assumption_condition_ids();
        if (std::find(ids.begin(), ids.end(), key) == ids.end())
            throw ConfigError("unknown assumption condition '" + key + "'");
        c.constants[key] = detail::to_double(key, value);
        return;
    }
    for (const auto& f : config_fields()) {
        if (f.section == section && f.key == key) {
            f.set(c, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "' in section [" + section + "]");
}

/// Parses `key = value` lines grouped under `[section]` headers (keys before
/// the first header belong to [run]); '#' and ';' start comment lines.
inline void apply_config_text(RunConfig& c, std::istream& in) {
    std::string line, section = "run";
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        try {
            set_config_value(c, section, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    apply_config_text(c, in);
}

/// Built-in defaults with the seed taken from the environment when set.
inline RunConfig default_config() {
    RunConfig c;
    if (const char* s = std::getenv(kSeedEnvVar); s && *s) c.seed = detail::to_u64(kSeedEnvVar, s);
    return c;
}

/// Command-dependent defaults for fields left empty or zero.
inline RunConfig resolve_config(RunConfig c) {
    const bool local = c.command == "local-order";
    if (c.schemes.empty()) {
        if (c.command == "bench")
            c.schemes = {"tamed", "sine"};
        else
            c.schemes = {"tamed"};
    }
    if (c.exponents.empty()) {
        if (local)
            c.exponents = {4, 5, 6, 7, 8};
        else if (c.command == "moments")
            c.exponents = {8};
        else
            c.exponents = {8, 9, 10, 11, 12};
    }
    if (c.paths == 0) {
        if (local)
            c.paths = 10000;
        else if (c.command == "moments")
            c.paths = 1000;
        else
            c.paths = 5000;
    }
    return c;
}

/// Checks everything that can be checked without running; throws ConfigError.
inline void validate_config(const RunConfig& c) {
    const auto& cmds = command_ids();
    if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end())
        throw ConfigError("unknown command '" + c.command + "'");
    try {
        default_registry().build(c.model, c.model_params);
        for (const auto& s : c.schemes) make_scheme(s);
        if (!c.reference_scheme.empty()) make_scheme(c.reference_scheme);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.schemes.empty()) throw ConfigError("no schemes given");
    if (c.exponents.empty()) throw ConfigError("no step exponents given");
    for (int e : c.exponents)
        if (e < 0 || e > 30) throw ConfigError("step exponent out of range [0, 30]");
    if (c.reference != "numerical" && c.reference != "exact") throw ConfigError("reference must be numerical or exact");
    if (c.mode != "terminal" && c.mode != "sup") throw ConfigError("mode must be terminal or sup");
    if (c.overflow != "infinity" && c.overflow != "exclude") throw ConfigError("overflow must be infinity or exclude");
    if (c.command == "convergence") {
        if (c.paths < 2) throw ConfigError("convergence needs at least 2 paths");
        const int max_e = *std::max_element(c.exponents.begin(), c.exponents.end());
        if (c.reference == "numerical" && (c.reference_exponent < max_e || c.reference_exponent > 30))
            throw ConfigError("reference exponent must lie in [max step exponent, 30]");
    }
    if (c.command == "local-order" && c.paths < 2) throw ConfigError("local-order needs at least 2 paths");
    if (c.paths == 0 && c.command != "check-assumptions" && c.command != "list-models")
        throw ConfigError("paths must be positive");
    if (c.moment_p < 2 || c.moment_p % 2 != 0) throw ConfigError("moment order p must be an even integer >= 2");
    if (c.substeps == 0 || (c.substeps & (c.substeps - 1)) != 0)
        throw ConfigError("substeps must be a power of two");
    if (!(c.tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
    if (!(c.lower < c.upper)) throw ConfigError("box: lower must be below upper");
    if (c.points_per_dim < 2) throw ConfigError("points_per_dim must be >= 2");
    if (!(c.q >= 0.0)) throw ConfigError("q must be >= 0");
    if (c.pbar < 2 || c.pbar % 2 != 0) throw ConfigError("pbar must be an even integer >= 2");
    if (!(c.eps > 0.0)) throw ConfigError("eps must be > 0");
}

/// (section, key, value) triples in a fixed order: the provenance record.
inline std::vector<std::tuple<std::string, std::string, std::string>> config_entries(const RunConfig& c) {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& f : config_fields()) out.emplace_back(f.section, f.key, f.get(c));
    for (const auto& [k, v] : default_registry().resolve(c.model, c.model_params))
        out.emplace_back("model", k, format_double(v));
    for (const auto& [k, v] : c.constants) out.emplace_back("constants", k, format_double(v));
    return out;
}

/// Config-file text that parses back to `c` (with model parameters resolved).
inline std::string config_text(const RunConfig& c, const std::string& line_prefix = "") {
    std::string out, section;
    const auto entries = config_entries(c);
    for (const char* s : {"run", "model", "moments", "local_order", "assumptions", "constants"}) {
        bool header = false;
        for (const auto& [sec, key, value] : entries) {
            if (sec != s) continue;
            if (!header) {
                out += line_prefix + "[" + sec + "]\n";
                header = true;
            }
            out += line_prefix + key + " = " + value + "\n";
        }
    }
    return out;
}

}  // namespace jdsim
