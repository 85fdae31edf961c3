#include "cli_commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <thread>

#include "powertrace/errors.hpp"
#include "powertrace/evaluation.hpp"
#include "powertrace/hpo.hpp"
#include "powertrace/ingest.hpp"
#include "powertrace/synthgen.hpp"
#include "powertrace/text.hpp"
#include "powertrace/uncertainty.hpp"

namespace powertrace::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommon{"seed", "out", "record_timing"};
const std::vector<std::string> kData{"kind", "data", "synth_preset", "synth_duration", "synth_rate", "reference",
                                     "max_gap"};
const std::vector<std::string> kSplit{"split_train", "split_val", "split_test"};
const std::vector<std::string> kTrain{"epochs", "batch", "lr", "model", "preset", "window", "stride"};

std::vector<std::string> keys(std::initializer_list<std::vector<std::string>> groups) {
    std::vector<std::string> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
}

std::vector<std::string> with_model_fields(std::vector<std::string> base) {
    const auto& f = model_field_keys();
    base.insert(base.end(), f.begin(), f.end());
    return base;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Hashes every file below out_dir/sub that a library call wrote directly.
void record_tree(Manifest& m, const std::string& out_dir, const std::string& sub) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(fs::path(out_dir) / sub)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        m.artifacts[fs::relative(p, out_dir).generic_string()] = hex64(fnv1a64(read_file(p.string())));
    }
}

DriveLog read_log(const Config& cfg, std::vector<std::string>* warnings) {
    if (!cfg.has("data") || cfg.str("data").empty()) throw ConfigError("--data is required");
    const std::string path = cfg.str("data");
    if (!fs::exists(path)) throw ConfigError("input '" + path + "' does not exist");
    return parse_log(read_file(path), cfg.kind(), warnings);
}

json violations_json(const std::vector<Violation>& vs) {
    json out = json::array();
    for (const auto& v : vs) out.push_back({{"channel", v.channel}, {"rule", v.rule}});
    return out;
}

std::string history_csv(const TrainingHistory& h) {
    std::string out = "epoch,train_mse,val_mse\n";
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        out += std::to_string(e + 1) + ',' + format_double(h.epochs[e].train) + ',' + format_double(h.epochs[e].val) +
               '\n';
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json run_synth(const Config& cfg, Manifest& m, const std::string& out) {
    const std::string preset = cfg.str("synth_preset").empty() ? "mixed-route" : cfg.str("synth_preset");
    auto spec = synth::preset_cycle(preset, cfg.kind(), cfg.num("synth_duration"), cfg.seed());
    spec.rate_hz = cfg.num("synth_rate");
    const auto gen = synth::generate_cycle(spec);
    DriveLog log = gen.log;
    const double jitter = cfg.num("jitter");
    const double drop = cfg.num("drop");
    auto rates = cfg.values().at("rates").get<std::map<std::string, double>>();
    if (!rates.empty() || jitter > 0.0 || drop > 0.0) {
        if (rates.empty()) {
            for (const auto& [name, ch] : log.channels) rates[name] = spec.rate_hz;
        }
        for (const auto& [name, r] : rates) {
            if (!log.has(name)) throw ConfigError("rates names unknown channel '" + name + "'");
        }
        synth::JitterSpec js;
        js.rates_hz = rates;
        js.jitter_fraction = jitter;
        js.drop_probability = drop;
        js.seed = derive_seed(cfg.seed(), 0x4a54);
        log = synth::add_multirate_jitter(log, js);
    }
    m.write(out, "log.csv", write_log_csv(log));
    m.write(out, "truth.csv", synth::truth_csv(gen.truth));
    double energy = 0.0;
    for (const double p : gen.truth.power_kw) energy += p / spec.rate_hz;
    json channels = json::object();
    for (const auto& [name, ch] : log.channels) channels[name] = ch.size();
    return {{"preset", preset},
            {"kind", std::string(to_string(cfg.kind()))},
            {"samples", gen.truth.timestamps.size()},
            {"phases", spec.phases.size()},
            {"true_energy_kws", energy},
            {"channels", channels}};
}

json run_ingest(const Config& cfg, Manifest& m, const std::string& out) {
    std::vector<std::string> warnings;
    const DriveLog log = read_log(cfg, &warnings);
    const auto violations = validate_log(log);
    json channels = json::object();
    for (const auto& [name, ch] : log.channels) {
        channels[name] = {{"samples", ch.size()}, {"unit", ch.unit}, {"median_period_s", median_period(ch.timestamps)}};
    }
    json extra = json::array();
    for (const auto& [name, ch] : log.extra) extra.push_back(name);
    const json report = {{"violations", violations_json(violations)},
                         {"warnings", warnings},
                         {"channels", channels},
                         {"ignored_channels", extra}};
    m.write(out, "validation.json", dump(report));
    if (!violations.empty()) {
        throw DataError("log fails validation with " + std::to_string(violations.size()) +
                        " violation(s); see validation.json");
    }
    m.write(out, "log.csv", write_log_csv(log));
    return report;
}

json run_sync(const Config& cfg, Manifest& m, const std::string& out) {
    std::vector<std::string> warnings;
    const DriveLog log = read_log(cfg, &warnings);
    const auto violations = validate_log(log);
    if (!violations.empty()) {
        throw DataError("log fails validation: " + violations_json(violations).dump());
    }
    SyncConfig sc;
    if (!cfg.str("reference").empty()) sc.reference = cfg.str("reference");
    sc.max_gap = cfg.optional_num("max_gap");
    const std::string reference = sc.reference ? *sc.reference : select_reference(log);
    sc.reference = reference;
    const AlignedSeries s = synchronize(log, sc);
    m.write(out, "aligned.csv", write_aligned_csv(s));
    return {{"rows", s.rows()}, {"dt_s", s.dt}, {"reference", reference}, {"features", s.feature_names},
            {"warnings", warnings}};
}

json run_window(const Config& cfg, Manifest& m, const std::string& out) {
    const AlignedSeries s = load_series(cfg);
    const auto features = resolve_features(cfg, s);
    const auto data = prepare_dataset(s, features, cfg.count("window"), cfg.count("stride"), cfg.split());
    const std::pair<const char*, const WindowedDataset*> parts[] = {
        {"train", &data.splits.train}, {"val", &data.splits.val}, {"test", &data.splits.test}};
    json sizes = json::object();
    for (const auto& [name, ds] : parts) {
        const auto [x, y] = write_windowed_csv(*ds);
        m.write(out, std::string(name) + "_x.csv", x);
        m.write(out, std::string(name) + "_y.csv", y);
        sizes[name] = ds->size();
    }
    m.write(out, "scaler.json", dump(data.scaler.to_json()));
    return {{"features", features}, {"window", cfg.count("window")}, {"stride", cfg.count("stride")},
            {"windows", sizes}};
}

struct ModelSetup {
    ModelKind kind;
    std::vector<std::string> features;
    std::size_t window;
    ModelConfig config;
    TrainConfig train;
    std::vector<std::string> ignored;
};

ModelSetup model_setup(const Config& cfg, ModelKind kind, std::vector<std::string> features) {
    ModelSetup s;
    s.kind = kind;
    s.features = std::move(features);
    s.window = resolve_window(cfg, kind);
    s.config = resolve_model(cfg, kind, s.features.size(), &s.ignored);
    s.train = resolve_train(cfg, kind);
    return s;
}

json run_train(const Config& cfg, Manifest& m, const std::string& out) {
    const AlignedSeries s = load_series(cfg);
    const auto setup = model_setup(cfg, parse_model_kind(cfg.str("model")), resolve_features(cfg, s));
    const auto data = prepare_dataset(s, setup.features, setup.window, cfg.count("stride"), cfg.split());
    const auto t0 = std::chrono::steady_clock::now();
    const TrainedModel model = fit_model(setup.config, data, setup.train, cfg.seed());
    const double train_s = seconds_since(t0);
    save_model(model, (fs::path(out) / "model").string());
    record_tree(m, out, "model");
    if (model.net) m.write(out, "history.csv", history_csv(model.history));
    json summary = {{"model", std::string(to_string(setup.kind))},
                    {"config", config_to_json(model.config)},
                    {"features", setup.features},
                    {"window", setup.window},
                    {"train_windows", data.splits.train.size()},
                    {"parameters", count_parameters(model)},
                    {"flops", estimate_flops(model)},
                    {"epochs_run", model.history.epochs.size()},
                    {"best_epoch", model.history.best_epoch},
                    {"best_val_mse", model.history.best_val},
                    {"ignored_fields", setup.ignored}};
    if (cfg.flag("record_timing")) summary["train_s"] = train_s;
    return summary;
}

WindowedDataset test_split_for(const TrainedModel& model, const AlignedSeries& s, const SplitSpec& split) {
    const AlignedSeries scaled = apply_minmax(s.select_features(model.feature_names), model.scaler);
    return chrono_split(make_windows(scaled, model.window, model.stride), split).test;
}

json run_evaluate(const Config& cfg, Manifest& m, const std::string& out) {
    if (cfg.str("model_dir").empty()) throw ConfigError("--model-dir is required");
    if (!fs::exists(fs::path(cfg.str("model_dir")) / "model.json")) {
        throw ConfigError("no model.json under '" + cfg.str("model_dir") + "'");
    }
    const TrainedModel model = load_model(cfg.str("model_dir"));
    if (cfg.is_explicit("features")) {
        const auto requested = cfg.list("features");
        check_features(cfg.kind(), requested);
        if (requested != model.feature_names) {
            throw ConfigError("feature order " + join(requested, ",") + " does not match the model's " +
                              join(model.feature_names, ","));
        }
    }
    check_features(cfg.kind(), model.feature_names);
    const AlignedSeries s = load_series(cfg);
    const WindowedDataset test = test_split_for(model, s, cfg.split());
    const auto t0 = std::chrono::steady_clock::now();
    Evaluation ev = evaluate_run(model, test, window_spacing(test), cfg.kind());
    if (cfg.flag("record_timing")) ev.report.runtime_s = seconds_since(t0);
    m.write(out, "report.json", dump(ev.report.to_json()));
    m.write(out, "series.csv", series_csv(ev.series));
    return ev.report.to_json();
}

std::vector<std::vector<std::string>> ablation_grid(PowertrainKind kind) {
    switch (kind) {
        case PowertrainKind::ice:
            return {{"speed"},
                    {"acceleration"},
                    {"engine_rpm"},
                    {"engine_torque"},
                    {"speed", "engine_rpm"},
                    {"speed", "acceleration", "engine_torque"},
                    {"speed", "engine_torque", "engine_rpm"},
                    {"acceleration", "speed", "engine_torque", "engine_rpm"}};
        case PowertrainKind::ev:
            return {{"acceleration"},
                    {"speed"},
                    {"motor_torque"},
                    {"motor_rpm"},
                    {"acceleration", "speed"},
                    {"acceleration", "motor_torque"},
                    {"acceleration", "motor_rpm"},
                    {"acceleration", "speed", "motor_torque"},
                    {"acceleration", "speed", "motor_rpm"},
                    {"acceleration", "motor_torque", "motor_rpm"},
                    {"acceleration", "speed", "motor_torque", "motor_rpm"}};
        case PowertrainKind::hev:
            return {{"acceleration"},
                    {"speed"},
                    {"engine_rpm"},
                    {"acceleration", "speed"},
                    {"acceleration", "engine_rpm"},
                    {"speed", "engine_rpm"},
                    {"acceleration", "speed", "engine_rpm"},
                    {"acceleration", "speed", "engine_torque", "engine_rpm"}};
    }
    return {};
}

std::vector<std::vector<std::string>> matrix_sets(const Config& cfg, const AlignedSeries& s) {
    auto sets = cfg.list_list("feature_sets");
    if (!sets.empty()) return sets;
    const std::string grid = cfg.str("grid");
    if (grid == "ablation") return ablation_grid(cfg.kind());
    if (grid != "prefix") throw ConfigError("unknown grid '" + grid + "' (expected prefix or ablation)");
    const auto features = resolve_features(cfg, s);
    for (std::size_t n = 1; n <= features.size(); ++n) sets.emplace_back(features.begin(), features.begin() + n);
    return sets;
}

int exit_code_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return 2;
    } catch (const DataError&) {
        return 3;
    } catch (const NumericError&) {
        return 4;
    } catch (...) {
        return 1;
    }
}

json run_matrix(const Config& cfg, Manifest& m, const std::string& out) {
    const AlignedSeries s = load_series(cfg);
    const auto sets = matrix_sets(cfg, s);
    std::vector<ModelKind> models;
    for (const auto& name : cfg.list("models")) models.push_back(parse_model_kind(name));
    if (models.empty()) throw ConfigError("matrix needs at least one model");
    struct Cell {
        ModelSetup setup;
        std::optional<Report> report;
        std::string error;
        int exit_code = 0;
    };
    std::vector<Cell> cells;
    for (const auto& set : sets) {
        check_features(cfg.kind(), set);
        for (const ModelKind k : models) cells.push_back({model_setup(cfg, k, set), std::nullopt, "", 0});
    }
    const SplitSpec split = cfg.split();
    const bool timing = cfg.flag("record_timing");

    const auto run_cell = [&](Cell& c) {
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const auto data = prepare_dataset(s, c.setup.features, c.setup.window, cfg.count("stride"), split);
            const TrainedModel model = fit_model(c.setup.config, data, c.setup.train, cfg.seed());
            Evaluation ev = evaluate_run(model, data.splits.test, window_spacing(data.splits.test), cfg.kind());
            if (timing) ev.report.runtime_s = seconds_since(t0);
            c.report = ev.report;
        } catch (const Error& e) {
            c.error = e.what();
            c.exit_code = exit_code_of(std::current_exception());
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(cfg.count("workers"), 1, cells.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
        });
    }
    for (auto& t : pool) t.join();

    std::vector<Report> reports;
    json cell_log = json::array();
    std::size_t failed = 0;
    for (const auto& c : cells) {
        json j = {{"features", c.setup.features}, {"model", std::string(to_string(c.setup.kind))}};
        if (c.report) {
            reports.push_back(*c.report);
            j["status"] = "ok";
            j["report"] = c.report->to_json();
        } else {
            ++failed;
            j["status"] = "failed";
            j["error"] = c.error;
            j["exit_code"] = c.exit_code;
        }
        cell_log.push_back(j);
    }
    m.write(out, "results_long.csv", results_long_csv(reports));
    m.write(out, "results_table.csv", results_table_csv(reports));
    m.write(out, "cells.json", dump(cell_log));
    return {{"cells", cells.size()}, {"succeeded", cells.size() - failed}, {"failed", failed},
            {"feature_sets", sets.size()}, {"models", cfg.list("models")}};
}

AlignedSeries train_rows(const PreparedData& data) {
    const AlignedSeries& s = data.scaled;
    AlignedSeries out;
    out.dt = s.dt;
    out.feature_names = s.feature_names;
    const std::size_t c = s.cols();
    for (std::size_t r = data.train_rows.begin; r < data.train_rows.end; ++r) {
        out.timestamps.push_back(s.timestamps[r]);
        out.target.push_back(s.target[r]);
        out.features.insert(out.features.end(), s.features.begin() + static_cast<std::ptrdiff_t>(r * c),
                            s.features.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
    }
    return out;
}

json run_uncertainty(const Config& cfg, Manifest& m, const std::string& out) {
    const AlignedSeries s = load_series(cfg);
    const auto setup = model_setup(cfg, parse_model_kind(cfg.str("model")), resolve_features(cfg, s));
    const auto data = prepare_dataset(s, setup.features, setup.window, cfg.count("stride"), cfg.split());
    const WindowedDataset& test = data.splits.test;
    EnsembleResult r;
    if (setup.kind == ModelKind::random_forest) {
        const TrainedModel model = fit_model(setup.config, data, setup.train, cfg.seed());
        r = rf_bootstrap_uncertainty(model, test, window_spacing(test));
    } else {
        const NoiseModel noise = estimate_feature_noise(train_rows(data), cfg.count("noise_segment"));
        m.write(out, "noise.json", dump(noise.to_json()));
        EnsembleConfig ec;
        ec.runs = cfg.count("runs");
        ec.inference_dropout = cfg.optional_num("inference_dropout");
        ec.inject_train_noise = cfg.flag("inject_train_noise");
        ec.inject_test_noise = cfg.flag("inject_test_noise");
        ec.reinitialize_weights = cfg.flag("reinitialize_weights");
        ec.share_noise_realization = cfg.flag("share_noise");
        ec.base_seed = cfg.seed();
        ec.workers = cfg.count("workers");
        r = monte_carlo_ensemble(setup.config, data, setup.train, noise, ec);
    }
    m.write(out, "ensemble_instant.csv", ensemble_csv(r, false));
    m.write(out, "ensemble_cumulative.csv", ensemble_csv(r, true));
    const json summary = ensemble_summary_json(r);
    m.write(out, "summary.json", dump(summary));
    return summary;
}

json run_hpo(const Config& cfg, Manifest& m, const std::string& out) {
    hpo::SearchSpace space;
    if (!cfg.str("search_space").empty()) {
        const std::string path = cfg.str("search_space");
        if (!fs::exists(path)) throw ConfigError("search space '" + path + "' does not exist");
        try {
            space = hpo::SearchSpace::from_json(json::parse(read_file(path)));
        } catch (const json::parse_error& e) {
            throw ConfigError("search space is not valid JSON: " + std::string(e.what()));
        }
        if (cfg.is_explicit("objective")) space.objective = hpo::parse_metric(cfg.str("objective"));
    } else {
        space = hpo::default_space(parse_model_kind(cfg.str("model")), hpo::parse_metric(cfg.str("objective")));
    }
    hpo::ModelObjectiveConfig oc;
    oc.series = load_series(cfg);
    const auto features = resolve_features(cfg, oc.series);
    oc.features = features;
    oc.split = cfg.split();
    oc.stride = cfg.count("stride");
    oc.default_window = cfg.count("window");
    oc.model = space.model;
    oc.metric = space.objective;
    oc.train.epochs = cfg.count("trial_epochs");
    oc.train.batch = cfg.count("batch");
    oc.seed = cfg.seed();

    std::string log;
    hpo::SearchOptions so;
    so.budget = cfg.count("budget");
    so.seed = cfg.seed();
    so.workers = cfg.count("workers");
    so.pruner = {cfg.count("warmup_trials"), cfg.count("warmup_steps")};
    so.log = [&](const json& j) { log += j.dump() + "\n"; };
    const auto res = hpo::search(space, hpo::make_model_objective(std::move(oc)), so);

    std::string board = "rank,trial,objective";
    for (const auto& [name, d] : space.dimensions) board += "," + name;
    board += "\n";
    for (std::size_t rank = 0; rank < res.leaderboard.size(); ++rank) {
        const auto& t = res.trials[res.leaderboard[rank]];
        board += std::to_string(rank + 1) + "," + std::to_string(t.id) + "," + format_double(*t.objective);
        for (const auto& [name, v] : t.point) board += "," + format_double(v);
        board += "\n";
    }
    std::size_t pruned = 0;
    std::size_t failed = 0;
    for (const auto& t : res.trials) {
        pruned += t.status == hpo::TrialStatus::pruned;
        failed += t.status == hpo::TrialStatus::failed;
    }
    const json best = {{"trial", res.best.id},
                       {"objective", *res.best.objective},
                       {"metric", std::string(hpo::to_string(space.objective))},
                       {"point", res.best.point},
                       {"window", hpo::window_from_point(res.best.point, cfg.count("window"))},
                       {"model_config", config_to_json(hpo::config_from_point(space.model, res.best.point,
                                                                               features.size()))}};
    m.write(out, "space.json", dump(space.to_json()));
    m.write(out, "trials.jsonl", log);
    m.write(out, "leaderboard.csv", board);
    m.write(out, "best.json", dump(best));
    return {{"best", best},
            {"trials", res.trials.size()},
            {"complete", res.leaderboard.size()},
            {"pruned", pruned},
            {"failed", failed}};
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& col(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
        return columns[static_cast<std::size_t>(it - header.begin())];
    }
};

Table read_table(const std::string& path) {
    const std::string text = read_file(path);
    Table t;
    std::size_t line_no = 0;
    for (const auto line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (t.header.empty()) {
            for (const auto f : fields) t.header.emplace_back(trim(f));
            t.columns.resize(t.header.size());
            continue;
        }
        if (fields.size() != t.header.size()) throw ParseError(line_no, "expected " + std::to_string(t.header.size()) + " fields");
        for (std::size_t i = 0; i < fields.size(); ++i) t.columns[i].push_back(parse_double(fields[i], line_no));
    }
    return t;
}

json run_report(const Config& cfg, Manifest& m, const std::string& out) {
    const std::string dir = cfg.str("run_dir");
    if (dir.empty()) throw ConfigError("--run-dir is required");
    if (!fs::is_directory(dir)) throw ConfigError("run directory '" + dir + "' does not exist");
    json rendered = json::array();
    const auto series = fs::path(dir) / "series.csv";
    if (fs::exists(series)) {
        const Table t = read_table(series.string());
        PlotSpec inst{"Instantaneous power", "time (s)", "power (kW)", t.col("t_end_s"),
                      {{"actual", t.col("actual_kw"), "#1f77b4"}, {"predicted", t.col("predicted_kw"), "#d62728"}},
                      {}};
        m.write(out, "instant.svg", render_svg(inst));
        PlotSpec cum{"Cumulative power", "time (s)", "energy (kW.s)", t.col("t_end_s"),
                     {{"actual", t.col("cum_actual_kws"), "#1f77b4"},
                      {"predicted", t.col("cum_predicted_kws"), "#d62728"}},
                     {}};
        m.write(out, "cumulative.svg", render_svg(cum));
        rendered.push_back("instant.svg");
        rendered.push_back("cumulative.svg");
    }
    for (const auto& [file, label, unit] : {std::tuple{"ensemble_instant", "Instantaneous power", "power (kW)"},
                                           std::tuple{"ensemble_cumulative", "Cumulative power", "energy (kW.s)"}}) {
        const auto path = fs::path(dir) / (std::string(file) + ".csv");
        if (!fs::exists(path)) continue;
        const Table t = read_table(path.string());
        PlotSpec p{std::string(label) + " with ensemble spread", "time (s)", unit, t.col("t_end_s"),
                   {{"actual", t.col("actual"), "#1f77b4"}, {"mean prediction", t.col("mean"), "#d62728"}},
                   {{"mean +- std", t.col("lower"), t.col("upper"), "#ff9896"}}};
        const std::string name = "uncertainty_" + std::string(file).substr(9) + ".svg";
        m.write(out, name, render_svg(p));
        rendered.push_back(name);
    }
    if (rendered.empty()) throw DataError("no series.csv or ensemble_*.csv under '" + dir + "'");
    return {{"plots", rendered}};
}

}  // namespace

const std::vector<Command>& commands() {
    static const std::vector<Command> all{
        {"synth", "generate a synthetic drive cycle with oracle power",
         {keys({kCommon, {"kind", "synth_preset", "synth_duration", "synth_rate", "jitter", "drop", "rates"}}),
          {{"synth_preset", "preset"}, {"synth_duration", "duration"}, {"synth_rate", "rate"}}},
         run_synth},
        {"ingest", "parse and validate a raw long-format log", {keys({kCommon, {"kind", "data"}}), {}}, run_ingest},
        {"sync", "align every channel onto the reference clock",
         {keys({kCommon, {"kind", "data", "reference", "max_gap"}}), {}}, run_sync},
        {"window", "scale, window and split an aligned series",
         {keys({kCommon, kData, kSplit, {"features", "window", "stride"}}), {}}, run_window},
        {"train", "train one model", {with_model_fields(keys({kCommon, kData, kSplit, kTrain, {"features"}})), {}},
         run_train},
        {"evaluate", "score a trained model on the test split",
         {keys({kCommon, kData, kSplit, {"features", "model_dir"}}), {}}, run_evaluate},
        {"matrix", "run every feature set x model cell",
         {with_model_fields(keys({kCommon, kData, kSplit, kTrain, {"features", "feature_sets", "grid", "models",
                                                                   "workers"}})),
          {}},
         run_matrix},
        {"uncertainty", "Monte Carlo ensemble or forest bootstrap spread",
         {with_model_fields(keys({kCommon, kData, kSplit, kTrain,
                                  {"features", "runs", "inference_dropout", "inject_train_noise", "inject_test_noise",
                                   "reinitialize_weights", "share_noise", "noise_segment", "workers"}})),
          {}},
         run_uncertainty},
        {"hpo", "hyperparameter search with median pruning",
         {keys({kCommon, kData, kSplit,
                {"features", "model", "window", "stride", "batch", "search_space", "objective", "budget",
                 "warmup_trials", "warmup_steps", "trial_epochs", "workers"}}),
          {}},
         run_hpo},
        {"report", "render SVG plots from evaluate or uncertainty outputs", {keys({kCommon, {"run_dir"}}), {}},
         run_report},
    };
    return all;
}

}  // namespace powertrace::cli
