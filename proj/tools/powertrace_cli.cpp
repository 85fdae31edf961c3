#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli_commands.hpp"
#include "cli_config.hpp"
#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

using namespace powertrace;
using namespace powertrace::cli;
using nlohmann::json;

namespace {

void print_human(const std::string& command, const std::string& out, const Manifest& m, const json& summary) {
    std::cout << command << ": wrote " << m.artifacts.size() << " artifact(s) to " << out << "\n";
    for (const auto& [key, value] : summary.items()) {
        if (value.is_object() || (value.is_array() && value.size() > 8)) continue;
        std::cout << "  " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
}

int fail(int code, const std::string& message, bool json_mode) {
    std::cerr << "error: " << message << "\n";
    if (json_mode) std::cout << json{{"status", "error"}, {"exit_code", code}, {"error", message}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"powertrace: vehicle power consumption prediction from powertrain telemetry"};
    app.require_subcommand(1);
    app.set_version_flag("--version", POWERTRACE_VERSION);
    std::vector<std::pair<CLI::App*, std::unique_ptr<OptionBinder>>> subs;
    for (const auto& cmd : commands()) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.description);
        subs.emplace_back(sub, std::make_unique<OptionBinder>(*sub, cmd.keys));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i].first->parsed()) continue;
        const Command& cmd = commands()[i];
        const OptionBinder& binder = *subs[i].second;
        const bool json_mode = binder.json_output();
        try {
            json resolved = binder.resolve();
            const Config cfg(std::move(resolved), binder.explicit_keys());
            std::string out = cfg.str("out");
            if (cmd.name == "report" && !cfg.is_explicit("out")) {
                out = (std::filesystem::path(cfg.str("run_dir")) / "plots").string();
            }
            ensure_dir(out);
            Manifest m;
            m.command = cmd.name;
            m.config = cfg.values();
            m.config.erase("out");
            m.seed = cfg.seed();
            const auto t0 = std::chrono::steady_clock::now();
            const json summary = cmd.run(cfg, m, out);
            if (cfg.flag("record_timing")) {
                m.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
            const json manifest = m.to_json();
            write_file((std::filesystem::path(out) / "manifest.json").string(), manifest.dump(2) + "\n");
            if (json_mode) {
                std::cout << json{{"status", "ok"},
                                  {"command", cmd.name},
                                  {"out", out},
                                  {"config_hash", manifest.at("config_hash")},
                                  {"summary", summary}}
                                 .dump()
                          << "\n";
            } else {
                print_human(cmd.name, out, m, summary);
            }
            return 0;
        } catch (const ConfigError& e) {
            return fail(2, e.what(), json_mode);
        } catch (const DataError& e) {
            return fail(3, e.what(), json_mode);
        } catch (const NumericError& e) {
            return fail(4, e.what(), json_mode);
        } catch (const nlohmann::json::exception& e) {
            return fail(2, e.what(), json_mode);
        } catch (const std::exception& e) {
            return fail(1, e.what(), json_mode);
        }
    }
    return 2;
}
