#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "powertrace/models.hpp"
#include "powertrace/preprocess.hpp"
#include "powertrace/signal.hpp"

namespace powertrace::cli {

enum class ValueType {
    string,
    number,
    count,
    boolean,
    // Number or null; the flag accepts "none".
    optional_number,
    // Flag: comma-separated.
    string_list,
    count_list,
    // Flag: sets separated by ';', names by ','.
    string_list_list,
    // Flag: name=rate pairs separated by ','.
    rate_map,
};

struct KeySpec {
    std::string key;
    ValueType type;
    std::string help;
};

// Every key a config file may contain.
const std::vector<KeySpec>& key_table();
const KeySpec& key_spec(const std::string& key);

// Keys that tune a model architecture; absent unless set explicitly.
const std::vector<std::string>& model_field_keys();

struct CommandKeys {
    std::vector<std::string> keys;
    // key -> flag name without dashes, when it differs from the key.
    std::map<std::string, std::string> flag_names;
};

// Registers --config, --json and one flag per key on a subcommand.
class OptionBinder {
public:
    OptionBinder(CLI::App& app, CommandKeys keys);

    // Defaults < POWERTRACE_SEED < config file < flags.
    nlohmann::json resolve() const;
    const std::set<std::string>& explicit_keys() const { return explicit_; }
    bool json_output() const { return json_; }

private:
    CommandKeys keys_;
    std::string config_path_;
    bool json_ = false;
    std::map<std::string, std::string> text_;
    std::map<std::string, bool> flags_;
    std::map<std::string, CLI::Option*> options_;
    mutable std::set<std::string> explicit_;
};

// Typed view of a resolved configuration.
class Config {
public:
    Config(nlohmann::json values, std::set<std::string> explicit_keys)
        : values_(std::move(values)), explicit_(std::move(explicit_keys)) {}

    const nlohmann::json& values() const { return values_; }
    bool is_explicit(const std::string& key) const { return explicit_.count(key) != 0; }
    bool has(const std::string& key) const { return values_.contains(key) && !values_.at(key).is_null(); }

    std::string str(const std::string& key) const;
    double num(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::optional<double> optional_num(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;
    std::vector<std::vector<std::string>> list_list(const std::string& key) const;
    std::uint64_t seed() const;

    PowertrainKind kind() const { return parse_powertrain(str("kind")); }
    SplitSpec split() const;
    TrainConfig train() const;

private:
    nlohmann::json values_;
    std::set<std::string> explicit_;
};

// Loads the configured dataset (raw log, aligned CSV or synthetic preset) as an aligned series.
AlignedSeries load_series(const Config& cfg, std::vector<std::string>* warnings = nullptr);

// The explicit feature list, or every admissible input of the kind that the series
// carries. ConfigError on inadmissible or repeated names.
std::vector<std::string> resolve_features(const Config& cfg, const AlignedSeries& series);
void check_features(PowertrainKind kind, const std::vector<std::string>& features);

// Default architecture, then preset, then explicit model-field keys. Fields that
// belong to other model kinds are reported in `ignored`.
ModelConfig resolve_model(const Config& cfg, ModelKind model, std::size_t input_dim,
                          std::vector<std::string>* ignored = nullptr);
std::size_t resolve_window(const Config& cfg, ModelKind model);
TrainConfig resolve_train(const Config& cfg, ModelKind model);

struct Manifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> artifacts;
    std::optional<double> runtime_s;

    // Writes `contents` under the output directory and records its hash.
    void write(const std::string& out_dir, const std::string& name, const std::string& contents);
    nlohmann::json to_json() const;
};

std::string config_hash(const nlohmann::json& config);
void ensure_dir(const std::string& dir);

}  // namespace powertrace::cli
