#pragma once

// CLI command implementations. Each takes a resolved, validated RunConfig,
// writes its files under config.output_dir and returns the process exit code.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jdsim/analysis.hpp"
#include "jdsim/assumptions.hpp"
#include "jdsim/format.hpp"
#include "jdsim/models.hpp"
#include "jdsim/parallel.hpp"
#include "jdsim/run_config.hpp"
#include "jdsim/schemes.hpp"
#include "jdsim/version.hpp"

namespace jdsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitViolation = 2;

inline constexpr const char* kErrorsHeader = "h,rms_error,stderr,wall_seconds,overflow_count";
inline constexpr const char* kMomentsHeader = "t,p,moment_estimate,overflow_count";
inline constexpr const char* kBenchHeader = "h,scheme,wall_seconds";

namespace detail {

using json = nlohmann::ordered_json;

inline std::filesystem::path output_path(const RunConfig& c, const std::string& name) {
    std::filesystem::create_directories(c.output_dir);
    return std::filesystem::path(c.output_dir) / name;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    return out;
}

/// Trailing '# ' lines: library version and the resolved config. Stripping
/// the prefix yields a config file that reproduces the run.
inline std::string provenance_trailer(const RunConfig& c) {
    return std::string("# ; jdsim ") + kVersion + "\n" + config_text(c, "# ");
}

inline json config_json(const RunConfig& c) {
    json j = json::object();
    for (const auto& [sec, key, value] : config_entries(c)) j[sec][key] = value;
    return j;
}

inline json header_json(const RunConfig& c) {
    json j;
    j["version"] = kVersion;
    j["command"] = c.command;
    j["model"] = c.model;
    j["config"] = config_json(c);
    return j;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json fit_json(const std::optional<OrderFit>& fit) {
    if (!fit) return nullptr;
    return json{{"slope", fit->slope},
                {"intercept", fit->intercept},
                {"r_squared", fit->r_squared},
                {"rows_used", fit->rows_used}};
}

inline void write_json(const std::filesystem::path& p, const json& j) {
    auto out = open_output(p);
    out << j.dump(2) << '\n';
}

inline StudyConfig study_config(const RunConfig& c) {
    StudyConfig s;
    s.coarse_exponents = c.exponents;
    s.reference_exponent = c.reference_exponent;
    s.paths = c.paths;
    s.seed = c.seed;
    s.mode = c.mode == "sup" ? ErrorMode::sup : ErrorMode::terminal;
    s.reference = c.reference == "exact" ? ReferenceKind::exact : ReferenceKind::numerical;
    if (!c.reference_scheme.empty()) s.reference_scheme = make_scheme(c.reference_scheme);
    s.overflow = c.overflow == "exclude" ? OverflowPolicy::exclude : OverflowPolicy::infinity;
    s.threads = c.threads;
    return s;
}

inline const char* kPlotScript = R"(import sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

files = sys.argv[1:] or FILES
fig, ax = plt.subplots()
anchor = None
for name in files:
    data = np.atleast_2d(np.loadtxt(name, delimiter=",", skiprows=1, comments="#"))
    h, err = data[:, 0], data[:, 1]
    ax.loglog(h, err, "o-", label=name)
    if anchor is None:
        anchor = (h, err[0] / h[0] ** 0.5, err[0] / h[0])
if anchor is not None:
    h, c_half, c_one = anchor
    ax.loglog(h, c_half * h ** 0.5, "k--", label="slope 1/2")
    ax.loglog(h, c_one * h, "k:", label="slope 1")
ax.set_xlabel("h")
ax.set_ylabel("rms error")
ax.legend()
fig.savefig("convergence.png", dpi=150)
)";

}  // namespace detail

inline std::string errors_csv(const ErrorTable& table) {
    std::string out = std::string(kErrorsHeader) + "\n";
    for (const auto& r : table.rows)
        out += format_double(r.h) + "," + format_double(r.rms_error) + "," + format_double(r.standard_error) + "," +
               format_double(r.wall_seconds) + "," + std::to_string(r.overflow_count) + "\n";
    return out;
}

inline int cmd_convergence(const RunConfig& c, std::ostream& out, std::ostream& /*err*/) {
    const auto problem = default_registry().build(c.model, c.model_params);
    const StudyConfig study = detail::study_config(c);
    auto summary = detail::header_json(c);
    summary["results"] = detail::json::object();
    std::vector<std::string> files;
    for (const auto& id : c.schemes) {
        const auto scheme = make_scheme(id);
        const ErrorTable table = estimate_strong_error(problem, *scheme, study);
        const std::string name = "errors_" + id + "_" + c.model + ".csv";
        {
            auto f = detail::open_output(detail::output_path(c, name));
            f << errors_csv(table) << detail::provenance_trailer(c);
        }
        files.push_back(name);
        std::optional<OrderFit> fit;
        std::string fit_error;
        try {
            fit = fit_order(table);
        } catch (const FitError& e) {
            fit_error = e.what();
        }
        auto& res = summary["results"][id];
        res["csv"] = name;
        res["fit"] = detail::fit_json(fit);
        if (!fit_error.empty()) res["fit_error"] = fit_error;
        out << id << " on " << c.model << ": ";
        if (fit)
            out << "slope " << format_double(fit->slope) << ", r^2 " << format_double(fit->r_squared) << "\n";
        else
            out << "no fit (" << fit_error << ")\n";
    }
    detail::write_json(detail::output_path(c, "summary.json"), summary);

    std::string script = "FILES = [";
    for (std::size_t i = 0; i < files.size(); ++i) script += (i ? ", \"" : "\"") + files[i] + "\"";
    script += "]\n";
    script += detail::kPlotScript;
    auto f = detail::open_output(detail::output_path(c, "plot_convergence.py"));
    f << script;
    return kExitOk;
}

inline std::string moments_csv(const MomentEstimate& m) {
    std::string out = std::string(kMomentsHeader) + "\n";
    for (std::size_t n = 0; n < m.times.size(); ++n)
        out += format_double(m.times[n]) + "," + std::to_string(m.p) + "," + format_double(m.estimates[n]) + "," +
               std::to_string(m.overflow_counts[n]) + "\n";
    return out;
}

inline int cmd_moments(const RunConfig& c, std::ostream& out, std::ostream& /*err*/) {
    const auto problem = default_registry().build(c.model, c.model_params);
    auto summary = detail::header_json(c);
    summary["results"] = detail::json::array();
    for (const auto& id : c.schemes) {
        const auto scheme = make_scheme(id);
        for (int e : c.exponents) {
            MomentConfig mc;
            mc.exponent = e;
            mc.p = c.moment_p;
            mc.paths = c.paths;
            mc.seed = c.seed;
            mc.overflow = c.overflow == "exclude" ? OverflowPolicy::exclude : OverflowPolicy::infinity;
            mc.threads = c.threads;
            const MomentEstimate m = estimate_moments(problem, *scheme, mc);
            const std::string name = "moments_" + id + "_" + c.model + "_" + std::to_string(e) + ".csv";
            {
                auto f = detail::open_output(detail::output_path(c, name));
                f << moments_csv(m) << detail::provenance_trailer(c);
            }
            summary["results"].push_back({{"scheme", id},
                                          {"exponent", e},
                                          {"h", m.h},
                                          {"csv", name},
                                          {"max_moment_estimate", detail::number_or_null(m.max_estimate)},
                                          {"overflowed_paths", m.overflowed_paths}});
            out << id << " h=" << format_double(m.h) << ": max E|Y|^" << m.p << " = " << format_double(m.max_estimate)
                << ", overflowed paths " << m.overflowed_paths << "\n";
        }
    }
    detail::write_json(detail::output_path(c, "moments_summary.json"), summary);
    return kExitOk;
}

inline detail::json local_order_json(const LocalOrderResult& r) {
    using detail::json;
    json j;
    j["exact"] = r.exact;
    j["p1_hat"] = r.p1_hat ? json(*r.p1_hat) : json(nullptr);
    j["p2_hat"] = r.p2_hat ? json(*r.p2_hat) : json(nullptr);
    j["p2_condition"] = r.p2_condition;
    j["p1_condition"] = r.p1_condition;
    j["tolerance"] = r.tolerance;
    j["weak_fit"] = detail::fit_json(r.weak_fit);
    j["strong_fit"] = detail::fit_json(r.strong_fit);
    j["rows"] = json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"h", row.h},
                             {"weak_error", row.weak_error},
                             {"weak_stderr", row.weak_standard_error},
                             {"strong_error", row.strong_error},
                             {"strong_stderr", row.strong_standard_error},
                             {"weak_flagged", row.weak_flagged}});
    return j;
}

inline int cmd_local_order(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto problem = default_registry().build(c.model, c.model_params);
    for (const auto& id : c.schemes) {
        const auto scheme = make_scheme(id);
        LocalOrderConfig lc;
        lc.x = c.local_x;
        lc.t = c.local_t;
        lc.exponents = c.exponents;
        lc.paths = c.paths;
        lc.seed = c.seed;
        lc.substeps = c.substeps;
        lc.use_exact = c.local_exact;
        if (!c.reference_scheme.empty()) lc.reference_scheme = make_scheme(c.reference_scheme);
        lc.tolerance = c.tolerance;
        lc.threads = c.threads;
        const LocalOrderResult r = estimate_local_orders(problem, *scheme, lc);
        auto report = detail::header_json(c);
        report["scheme"] = id;
        report["result"] = local_order_json(r);
        const std::string name = "local_order_" + id + "_" + c.model + ".json";
        detail::write_json(detail::output_path(c, name), report);

        std::size_t flagged = 0;
        for (const auto& row : r.rows) flagged += row.weak_flagged ? 1 : 0;
        if (flagged)
            err << "warning: " << flagged << " of " << r.rows.size()
                << " weak one-step errors are within 3 standard errors of zero and were left out of the p1 fit\n";
        out << id << " on " << c.model << ": ";
        if (r.exact) {
            out << "one-step errors vanish identically\n";
            continue;
        }
        out << "p1_hat " << (r.p1_hat ? format_double(*r.p1_hat) : "n/a") << ", p2_hat "
            << (r.p2_hat ? format_double(*r.p2_hat) : "n/a") << ", p2 >= 1/2: " << (r.p2_condition ? "yes" : "no")
            << ", p1 >= p2 + 1/2: " << (r.p1_condition ? "yes" : "no") << "\n";
    }
    return kExitOk;
}

inline GridSpec assumption_grid(const RunConfig& c, std::size_t dim) {
    GridSpec g = GridSpec::box(c.lower, c.upper, dim);
    g.points_per_dim = c.points_per_dim;
    g.random_points = c.random_points;
    g.random_pairs = c.random_pairs;
    g.seed = c.seed;
    return g;
}

/// Every configured condition, with user constants applied.
inline std::vector<AssumptionReport> run_assumption_checks(const RunConfig& c) {
    const auto problem = default_registry().build(c.model, c.model_params);
    const GridSpec grid = assumption_grid(c, problem.dim());
    std::vector<AssumptionReport> reports;
    reports.push_back(check_monotone(problem, grid));
    reports.push_back(check_coercivity(problem, grid));
    reports.push_back(check_pbar_moment_condition(problem, grid, c.pbar, c.eps));
    reports.push_back(check_polynomial_growth(problem, grid, c.q));
    if (c.derivatives) {
        DerivativeOptions opt;
        opt.allow_finite_difference = c.finite_difference;
        reports.push_back(check_derivative_growth(problem, grid, c.q, opt));
    }
    for (auto& r : reports) {
        const auto it = c.constants.find(r.condition);
        if (it != c.constants.end()) r.apply_constant(it->second);
    }
    return reports;
}

inline detail::json assumption_json(const AssumptionReport& r) {
    using detail::json;
    json j;
    j["condition"] = r.condition;
    j["k_hat"] = detail::number_or_null(r.k_hat);
    j["violated"] = r.violated();
    j["user_constant"] = r.user_constant ? json(*r.user_constant) : json(nullptr);
    j["satisfied"] = r.satisfied ? json(*r.satisfied) : json(nullptr);
    j["worst_points"] = r.worst_points;
    j["parameters"] = json(r.parameters);
    j["samples"] = r.samples;
    if (r.q_stable) {
        j["q_stable"] = *r.q_stable;
        j["fitted_q"] = r.fitted_q ? json(*r.fitted_q) : json(nullptr);
        j["q_ladder"] = json::array();
        for (const auto& [q, k] : r.q_ladder) j["q_ladder"].push_back({{"q", q}, {"k_hat", detail::number_or_null(k)}});
    }
    j["notes"] = r.notes;
    return j;
}

inline std::string assumption_text(const AssumptionReport& r) {
    std::string s = r.condition + ": K_hat = " + format_double(r.k_hat);
    if (r.user_constant)
        s += ", constant " + format_double(*r.user_constant) + (*r.satisfied ? " (satisfied)" : " (EXCEEDED)");
    for (const auto& [k, v] : r.parameters) s += ", " + k + " = " + format_double(v);
    if (r.q_stable) {
        s += *r.q_stable ? ", q stable" : ", q UNSTABLE";
        s += ", smallest stable q on ladder: " + (r.fitted_q ? format_double(*r.fitted_q) : std::string("none"));
    }
    s += r.violated() ? "  [VIOLATION]\n" : "  [ok]\n";
    for (const auto& n : r.notes) s += "    note: " + n + "\n";
    return s;
}

inline int cmd_check_assumptions(const RunConfig& c, std::ostream& out, std::ostream& /*err*/) {
    const auto reports = run_assumption_checks(c);
    auto doc = detail::header_json(c);
    doc["reports"] = detail::json::array();
    std::string text;
    bool violated = false;
    for (const auto& r : reports) {
        doc["reports"].push_back(assumption_json(r));
        text += assumption_text(r);
        violated = violated || r.violated();
    }
    doc["violations"] = violated;
    detail::write_json(detail::output_path(c, "assumptions_" + c.model + ".json"), doc);
    {
        auto f = detail::open_output(detail::output_path(c, "assumptions_" + c.model + ".txt"));
        f << text << detail::provenance_trailer(c);
    }
    out << text;
    return violated ? kExitViolation : kExitOk;
}

struct BenchRow {
    double h = 0.0;
    std::string scheme;
    double wall_seconds = 0.0;
};

/// Time to simulate M paths per (h, scheme); noise generation is not timed.
inline std::vector<BenchRow> run_bench(const RunConfig& c) {
    const auto problem = default_registry().build(c.model, c.model_params);
    std::vector<BenchRow> rows;
    for (int e : c.exponents) {
        for (const auto& id : c.schemes) {
            const auto scheme = make_scheme(id);
            const std::size_t nblocks = (c.paths + detail::kBlockPaths - 1) / detail::kBlockPaths;
            std::vector<double> seconds(nblocks, 0.0);
            parallel_for(nblocks, c.threads, [&](std::size_t b) {
                const std::size_t end = std::min(c.paths, (b + 1) * detail::kBlockPaths);
                for (std::size_t i = b * detail::kBlockPaths; i < end; ++i) {
                    const auto noise = make_noise(c.seed, i, e, problem);
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto path = simulate_path(problem, *scheme, noise, std::size_t{1} << e);
                    seconds[b] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    (void)path;
                }
            });
            double total = 0.0;
            for (double s : seconds) total += s;
            rows.push_back({problem.horizon / static_cast<double>(std::size_t{1} << e), id, total});
        }
    }
    return rows;
}

inline int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream& /*err*/) {
    const auto rows = run_bench(c);
    std::string csv = std::string(kBenchHeader) + "\n";
    for (const auto& r : rows) csv += format_double(r.h) + "," + r.scheme + "," + format_double(r.wall_seconds) + "\n";
    {
        auto f = detail::open_output(detail::output_path(c, "bench_" + c.model + ".csv"));
        f << csv << detail::provenance_trailer(c);
    }
    out << csv;
    std::size_t compared = 0, sine_faster = 0;
    for (const auto& a : rows) {
        if (a.scheme != "sine") continue;
        for (const auto& b : rows) {
            if (b.scheme == "tamed" && b.h == a.h) {
                ++compared;
                if (a.wall_seconds <= b.wall_seconds) ++sine_faster;
            }
        }
    }
    if (compared)
        out << "sine wall time <= tamed wall time in " << sine_faster << " of " << compared << " rows\n";
    return kExitOk;
}

inline int cmd_list_models(const RunConfig& /*c*/, std::ostream& out, std::ostream& /*err*/) {
    for (const auto& m : default_registry().models()) {
        out << m.id << "\n    " << m.description << "\n    defaults:";
        for (const auto& [k, v] : m.defaults) out << " " << k << "=" << format_double(v);
        out << "\n";
    }
    return kExitOk;
}

/// Resolves, validates and dispatches on c.command.
inline int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(config);
    validate_config(c);
    if (c.command == "convergence") return cmd_convergence(c, out, err);
    if (c.command == "moments") return cmd_moments(c, out, err);
    if (c.command == "local-order") return cmd_local_order(c, out, err);
    if (c.command == "check-assumptions") return cmd_check_assumptions(c, out, err);
    if (c.command == "bench") return cmd_bench(c, out, err);
    return cmd_list_models(c, out, err);
}

}  // namespace jdsim
