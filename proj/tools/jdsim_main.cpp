#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jdsim/commands.hpp"

namespace {

struct FlagValues {
    std::string config_file;
    std::map<std::string, std::string> fields;  // flag -> raw value
    std::vector<std::string> params;            // key=value model parameters
    std::vector<std::string> constants;         // condition=value user constants
};

void add_flags(CLI::App& sub, FlagValues& v) {
    sub.add_option("--config", v.config_file, "config file (key = value under [section] headers)");
    for (const auto& f : jdsim::config_fields())
        if (!f.flag.empty()) sub.add_option(f.flag, v.fields[f.flag], f.help);
    sub.add_option("--param", v.params, "model parameter override key=value (repeatable)");
    sub.add_option("--constant", v.constants, "user constant for a condition, id=value (repeatable)");
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
        throw jdsim::ConfigError(std::string(what) + " must look like key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strong-convergence experiments for tamed and sine Euler schemes on jump-diffusion SDEs"};
    app.require_subcommand(1);
    FlagValues values;
    std::vector<CLI::App*> subs;
    for (const auto& id : jdsim::command_ids()) {
        auto* sub = app.add_subcommand(id);
        add_flags(*sub, values);
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? jdsim::kExitOk : jdsim::kExitUsage;
    }

    try {
        jdsim::RunConfig config = jdsim::default_config();
        if (!values.config_file.empty()) jdsim::apply_config_file(config, values.config_file);
        for (auto* sub : subs) {
            if (!sub->parsed()) continue;
            config.command = sub->get_name();
            for (const auto& f : jdsim::config_fields())
                if (!f.flag.empty() && sub->count(f.flag) > 0) f.set(config, values.fields[f.flag]);
        }
        for (const auto& p : values.params) {
            const auto [k, v] = split_assignment(p, "--param");
            jdsim::set_config_value(config, "model", k, v);
        }
        for (const auto& p : values.constants) {
            const auto [k, v] = split_assignment(p, "--constant");
            jdsim::set_config_value(config, "constants", k, v);
        }
        return jdsim::run_command(config, std::cout, std::cerr);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return jdsim::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return jdsim::kExitUsage;
    }
}
