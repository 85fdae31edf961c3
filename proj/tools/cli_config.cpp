#include "cli_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "powertrace/errors.hpp"
#include "powertrace/hpo.hpp"
#include "powertrace/ingest.hpp"
#include "powertrace/kernels.hpp"
#include "powertrace/synthgen.hpp"
#include "powertrace/text.hpp"

#ifndef POWERTRACE_VERSION
#define POWERTRACE_VERSION "0.0.0"
#endif

namespace powertrace::cli {

using nlohmann::json;

const std::vector<KeySpec>& key_table() {
    using T = ValueType;
    static const std::vector<KeySpec> table{
        {"kind", T::string, "powertrain: ice, ev or hev"},
        {"data", T::string, "raw long-format log or aligned CSV"},
        {"synth_preset", T::string, "generate data from a drive-cycle preset instead of reading --data"},
        {"synth_duration", T::number, "synthetic cycle length in seconds"},
        {"synth_rate", T::number, "synthetic base sampling rate in Hz"},
        {"jitter", T::number, "timestamp jitter as a fraction of each channel period"},
        {"drop", T::number, "per-sample drop probability"},
        {"rates", T::rate_map, "per-channel resampling rates, e.g. speed=2,engine_torque=0.2"},
        {"reference", T::string, "reference channel for synchronization (default: least noisy)"},
        {"max_gap", T::optional_number, "largest tolerated distance to a nearest sample, seconds"},
        {"features", T::string_list, "ordered input channels"},
        {"feature_sets", T::string_list_list, "matrix feature sets, e.g. speed;speed,engine_rpm"},
        {"grid", T::string, "matrix feature-set grid when none are given: prefix or ablation"},
        {"models", T::string_list, "matrix model kinds"},
        {"model", T::string, "model kind: lstm, tcn, transformer or rf"},
        {"preset", T::string, "tuned configuration: ice-tcn, ev-transformer or hev-lstm"},
        {"model_dir", T::string, "trained model directory"},
        {"run_dir", T::string, "directory holding evaluate or uncertainty outputs"},
        {"window", T::count, "window length in samples"},
        {"stride", T::count, "window stride in samples"},
        {"split_train", T::number, "training fraction"},
        {"split_val", T::number, "validation fraction"},
        {"split_test", T::number, "test fraction"},
        {"epochs", T::count, "maximum training epochs"},
        {"batch", T::count, "minibatch size"},
        {"lr", T::number, "Adam learning rate"},
        {"hidden", T::count, "LSTM hidden size"},
        {"layers", T::count, "LSTM layers"},
        {"channels", T::count, "TCN channels"},
        {"dilations", T::count_list, "TCN dilations, one residual block each"},
        {"convs_per_block", T::count, "TCN convolutions per block"},
        {"kernel", T::count, "TCN kernel size"},
        {"d_model", T::count, "Transformer embedding size"},
        {"encoder_layers", T::count, "Transformer encoder layers"},
        {"heads", T::count, "Transformer attention heads"},
        {"ff_dim", T::count, "Transformer feed-forward size"},
        {"conv_kernel", T::count, "Transformer input projection kernel"},
        {"dropout", T::number, "dropout rate"},
        {"n_trees", T::count, "forest size"},
        {"max_depth", T::count, "tree depth limit"},
        {"min_samples_leaf", T::count, "minimum samples per leaf"},
        {"bootstrap", T::boolean, "bootstrap rows per tree"},
        {"bootstrap_fraction", T::number, "bootstrap sample size as a fraction of the rows"},
        {"runs", T::count, "ensemble size"},
        {"inference_dropout", T::optional_number, "Monte Carlo dropout rate at inference, or none"},
        {"inject_train_noise", T::boolean, "add estimated sensor noise to training inputs"},
        {"inject_test_noise", T::boolean, "add estimated sensor noise to test inputs"},
        {"reinitialize_weights", T::boolean, "fresh initialization per run"},
        {"share_noise", T::boolean, "reuse one noise realization across runs"},
        {"noise_segment", T::count, "steady-state segment length for noise estimation"},
        {"budget", T::count, "number of trials"},
        {"search_space", T::string, "search-space JSON file"},
        {"objective", T::string, "mae or rmse"},
        {"warmup_trials", T::count, "completed trials before pruning starts"},
        {"warmup_steps", T::count, "epochs before a trial can be pruned"},
        {"trial_epochs", T::count, "epoch cap per trial"},
        {"workers", T::count, "parallel workers"},
        {"seed", T::count, "global seed (falls back to POWERTRACE_SEED)"},
        {"out", T::string, "output directory"},
        {"record_timing", T::boolean, "store wall-clock runtimes in outputs"},
    };
    return table;
}

const KeySpec& key_spec(const std::string& key) {
    for (const auto& k : key_table()) {
        if (k.key == key) return k;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

const std::vector<std::string>& model_field_keys() {
    static const std::vector<std::string> keys{"hidden",  "layers", "channels", "dilations", "convs_per_block",
                                               "kernel",  "d_model", "encoder_layers", "heads", "ff_dim",
                                               "conv_kernel", "dropout", "n_trees", "max_depth",
                                               "min_samples_leaf", "bootstrap", "bootstrap_fraction"};
    return keys;
}

namespace {

json defaults() {
    return {{"kind", "ice"},
            {"data", ""},
            {"synth_preset", ""},
            {"synth_duration", 1800.0},
            {"synth_rate", 2.0},
            {"jitter", 0.0},
            {"drop", 0.0},
            {"rates", json::object()},
            {"reference", ""},
            {"max_gap", nullptr},
            {"features", json::array()},
            {"feature_sets", json::array()},
            {"grid", "prefix"},
            {"models", {"tcn", "lstm", "transformer", "rf"}},
            {"model", "tcn"},
            {"preset", ""},
            {"model_dir", ""},
            {"run_dir", ""},
            {"window", 10},
            {"stride", 1},
            {"split_train", 0.7},
            {"split_val", 0.1},
            {"split_test", 0.2},
            {"epochs", 300},
            {"batch", 64},
            {"lr", 1e-3},
            {"runs", 30},
            {"inference_dropout", 0.2},
            {"inject_train_noise", false},
            {"inject_test_noise", false},
            {"reinitialize_weights", false},
            {"share_noise", false},
            {"noise_segment", 200},
            {"budget", 20},
            {"search_space", ""},
            {"objective", "mae"},
            {"warmup_trials", 5},
            {"warmup_steps", 10},
            {"trial_epochs", 60},
            {"workers", 1},
            {"seed", 0},
            {"out", "out"},
            {"record_timing", false}};
}

std::vector<std::string> split_names(std::string_view text, char sep) {
    std::vector<std::string> out;
    for (const auto part : split(text, sep)) {
        const auto t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::uint64_t parse_count(std::string_view text, const std::string& key) {
    const auto t = trim(text);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError(key + " expects a non-negative integer, got '" + std::string(text) + "'");
    }
    try {
        return std::stoull(std::string(t));
    } catch (const std::exception&) {
        throw ConfigError(key + " is out of range");
    }
}

double parse_number(std::string_view text, const std::string& key) {
    try {
        return parse_double(trim(text), 0);
    } catch (const DataError&) {
        throw ConfigError(key + " expects a number, got '" + std::string(text) + "'");
    }
}

json from_flag(const KeySpec& spec, const std::string& text) {
    switch (spec.type) {
        case ValueType::string:
            return text;
        case ValueType::number:
            return parse_number(text, spec.key);
        case ValueType::count:
            return parse_count(text, spec.key);
        case ValueType::boolean:
            return true;
        case ValueType::optional_number:
            if (trim(text) == "none") return nullptr;
            return parse_number(text, spec.key);
        case ValueType::string_list:
            return split_names(text, ',');
        case ValueType::count_list: {
            json out = json::array();
            for (const auto& s : split_names(text, ',')) out.push_back(parse_count(s, spec.key));
            return out;
        }
        case ValueType::string_list_list: {
            json out = json::array();
            for (const auto& set : split_names(text, ';')) out.push_back(split_names(set, ','));
            return out;
        }
        case ValueType::rate_map: {
            json out = json::object();
            for (const auto& pair : split_names(text, ',')) {
                const auto eq = pair.find('=');
                if (eq == std::string::npos) throw ConfigError("rates expects name=hz pairs, got '" + pair + "'");
                out[std::string(trim(pair.substr(0, eq)))] = parse_number(pair.substr(eq + 1), "rates");
            }
            return out;
        }
    }
    return text;
}

// Type check for values read from a config file.
void check_value(const KeySpec& spec, const json& v) {
    const auto fail = [&](const char* expected) {
        throw ConfigError("config key '" + spec.key + "' expects " + expected + ", got " + v.dump());
    };
    const auto is_count = [](const json& x) { return x.is_number_unsigned() || (x.is_number_integer() && x.get<long long>() >= 0); };
    switch (spec.type) {
        case ValueType::string:
            if (!v.is_string()) fail("a string");
            break;
        case ValueType::number:
            if (!v.is_number()) fail("a number");
            break;
        case ValueType::count:
            if (!is_count(v)) fail("a non-negative integer");
            break;
        case ValueType::boolean:
            if (!v.is_boolean()) fail("true or false");
            break;
        case ValueType::optional_number:
            if (!v.is_null() && !v.is_number()) fail("a number or null");
            break;
        case ValueType::string_list:
            if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
                fail("a list of strings");
            }
            break;
        case ValueType::count_list:
            if (!v.is_array() || !std::all_of(v.begin(), v.end(), is_count)) fail("a list of non-negative integers");
            break;
        case ValueType::string_list_list:
            if (!v.is_array()) fail("a list of string lists");
            for (const auto& inner : v) {
                if (!inner.is_array() ||
                    !std::all_of(inner.begin(), inner.end(), [](const json& x) { return x.is_string(); })) {
                    fail("a list of string lists");
                }
            }
            break;
        case ValueType::rate_map:
            if (!v.is_object()) fail("an object of name: hz");
            for (const auto& [k, r] : v.items()) {
                if (!r.is_number()) fail("an object of name: hz");
            }
            break;
    }
}

std::string flag_of(const std::string& key) {
    std::string f = key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

}  // namespace

OptionBinder::OptionBinder(CLI::App& app, CommandKeys keys) : keys_(std::move(keys)) {
    app.add_option("--config", config_path_, "flat JSON config file; flags override its values");
    app.add_flag("--json", json_, "print a machine-readable summary");
    for (const auto& key : keys_.keys) {
        const KeySpec& spec = key_spec(key);
        const auto it = keys_.flag_names.find(key);
        const std::string name = "--" + (it == keys_.flag_names.end() ? flag_of(key) : it->second);
        if (spec.type == ValueType::boolean) {
            options_[key] = app.add_flag(name + ",!--no-" + name.substr(2), flags_[key], spec.help);
        } else {
            options_[key] = app.add_option(name, text_[key], spec.help);
        }
    }
}

json OptionBinder::resolve() const {
    json cfg = defaults();
    explicit_.clear();
    if (const char* env = std::getenv("POWERTRACE_SEED"); env && *env) {
        cfg["seed"] = parse_count(env, "POWERTRACE_SEED");
    }
    if (!config_path_.empty()) {
        json file;
        try {
            file = json::parse(read_file(config_path_));
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + config_path_ + "' is not valid JSON: " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        if (!file.is_object()) throw ConfigError("config file must hold a flat JSON object");
        for (const auto& [key, value] : file.items()) {
            check_value(key_spec(key), value);
            cfg[key] = value;
            explicit_.insert(key);
        }
    }
    for (const auto& [key, opt] : options_) {
        if (opt->count() == 0) continue;
        const KeySpec& spec = key_spec(key);
        cfg[key] = spec.type == ValueType::boolean ? json(flags_.at(key)) : from_flag(spec, text_.at(key));
        explicit_.insert(key);
    }
    json out = json::object();
    for (const auto& key : keys_.keys) {
        if (cfg.contains(key)) out[key] = cfg[key];
    }
    return out;
}

std::string Config::str(const std::string& key) const { return values_.at(key).get<std::string>(); }
double Config::num(const std::string& key) const { return values_.at(key).get<double>(); }
std::size_t Config::count(const std::string& key) const { return values_.at(key).get<std::size_t>(); }
bool Config::flag(const std::string& key) const { return values_.at(key).get<bool>(); }

std::optional<double> Config::optional_num(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return values_.at(key).get<double>();
}

std::vector<std::string> Config::list(const std::string& key) const {
    return values_.at(key).get<std::vector<std::string>>();
}

std::vector<std::vector<std::string>> Config::list_list(const std::string& key) const {
    return values_.at(key).get<std::vector<std::vector<std::string>>>();
}

std::uint64_t Config::seed() const { return values_.at("seed").get<std::uint64_t>(); }

SplitSpec Config::split() const {
    SplitSpec s{num("split_train"), num("split_val"), num("split_test")};
    s.validate();
    return s;
}

TrainConfig Config::train() const {
    TrainConfig t;
    t.epochs = count("epochs");
    t.batch = count("batch");
    t.lr = num("lr");
    t.seed = seed();
    t.validate();
    return t;
}

AlignedSeries load_series(const Config& cfg, std::vector<std::string>* warnings) {
    const PowertrainKind kind = cfg.kind();
    DriveLog log;
    if (cfg.has("synth_preset") && !cfg.str("synth_preset").empty()) {
        auto spec = synth::preset_cycle(cfg.str("synth_preset"), kind, cfg.num("synth_duration"), cfg.seed());
        spec.rate_hz = cfg.num("synth_rate");
        log = synth::generate_cycle(spec).log;
    } else {
        if (!cfg.has("data") || cfg.str("data").empty()) throw ConfigError("no input: pass --data or --synth-preset");
        const std::string path = cfg.str("data");
        if (!std::filesystem::exists(path)) throw ConfigError("input '" + path + "' does not exist");
        const std::string text = read_file(path);
        if (text.rfind(kRawLogHeader, 0) != 0) return parse_aligned_csv(text);
        log = parse_log(text, kind, warnings);
    }
    const auto violations = validate_log(log);
    if (!violations.empty()) {
        std::string msg = "log fails validation:";
        for (const auto& v : violations) msg += " [" + v.channel + ": " + v.rule + "]";
        throw DataError(msg);
    }
    SyncConfig sc;
    if (cfg.has("reference") && !cfg.str("reference").empty()) sc.reference = cfg.str("reference");
    if (cfg.has("max_gap")) sc.max_gap = cfg.optional_num("max_gap");
    return synchronize(log, sc);
}

void check_features(PowertrainKind kind, const std::vector<std::string>& features) {
    if (features.empty()) throw ConfigError("feature set is empty");
    std::set<std::string> seen;
    for (const auto& f : features) {
        if (!is_admissible_feature(kind, f)) {
            throw ConfigError("feature '" + f + "' is not an admissible input for " + std::string(to_string(kind)));
        }
        if (!seen.insert(f).second) throw ConfigError("feature '" + f + "' is listed twice");
    }
}

std::vector<std::string> resolve_features(const Config& cfg, const AlignedSeries& series) {
    std::vector<std::string> out = cfg.list("features");
    if (out.empty()) {
        for (const auto& name : input_channels(cfg.kind())) {
            if (std::find(series.feature_names.begin(), series.feature_names.end(), name) != series.feature_names.end()) {
                out.push_back(name);
            }
        }
    }
    check_features(cfg.kind(), out);
    return out;
}

namespace {

const hpo::Preset* preset_for(const Config& cfg, ModelKind model) {
    if (!cfg.has("preset") || cfg.str("preset").empty()) return nullptr;
    const auto& p = hpo::find_preset(cfg.str("preset"));
    return p.model == model ? &p : nullptr;
}

}  // namespace

ModelConfig resolve_model(const Config& cfg, ModelKind model, std::size_t input_dim,
                          std::vector<std::string>* ignored) {
    ModelConfig base = default_config(model, input_dim);
    if (const auto* p = preset_for(cfg, model)) base = hpo::config_from_point(model, p->point, input_dim);
    json j = config_to_json(base);
    for (const auto& key : model_field_keys()) {
        if (!cfg.is_explicit(key) || !cfg.has(key)) continue;
        if (!j.contains(key)) {
            if (ignored) ignored->push_back(key);
            continue;
        }
        j[key] = cfg.values().at(key);
    }
    ModelConfig out = config_from_json(j);
    validate(out);
    return out;
}

std::size_t resolve_window(const Config& cfg, ModelKind model) {
    if (cfg.is_explicit("window")) return cfg.count("window");
    if (const auto* p = preset_for(cfg, model)) return hpo::window_from_point(p->point, cfg.count("window"));
    return cfg.count("window");
}

TrainConfig resolve_train(const Config& cfg, ModelKind model) {
    TrainConfig t = cfg.train();
    if (!cfg.is_explicit("lr")) {
        if (const auto* p = preset_for(cfg, model)) t = hpo::train_from_point(p->point, t);
    }
    return t;
}

void Manifest::write(const std::string& out_dir, const std::string& name, const std::string& contents) {
    const auto path = std::filesystem::path(out_dir) / name;
    std::filesystem::create_directories(path.parent_path());
    write_file(path.string(), contents);
    artifacts[name] = hex64(fnv1a64(contents));
}

json Manifest::to_json() const {
    json j = {{"tool", "powertrace"},
              {"version", POWERTRACE_VERSION},
              {"command", command},
              {"config", config},
              {"config_hash", config_hash(config)},
              {"seed", seed},
              {"simd", std::string(simd::active().name)},
              {"artifacts", artifacts}};
    if (runtime_s) j["runtime_s"] = *runtime_s;
    return j;
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace powertrace::cli
