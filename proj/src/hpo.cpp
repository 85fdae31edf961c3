#include "powertrace/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "powertrace/errors.hpp"
#include "powertrace/evaluation.hpp"

namespace powertrace::hpo {

using nlohmann::json;

double Dimension::sample(Rng& rng) const {
    switch (kind) {
        case Kind::choice:
            return values[rng.below(values.size())];
        case Kind::uniform:
            return rng.uniform(low, high);
        case Kind::log_uniform:
            return std::exp(rng.uniform(std::log(low), std::log(high)));
        case Kind::int_uniform:
            return low + static_cast<double>(rng.below(static_cast<std::uint64_t>(high - low) + 1));
    }
    return low;
}

bool Dimension::contains(double v) const {
    switch (kind) {
        case Kind::choice:
            return std::find(values.begin(), values.end(), v) != values.end();
        case Kind::int_uniform:
            return v >= low && v <= high && std::floor(v) == v;
        case Kind::uniform:
        case Kind::log_uniform:
            return v >= low && v <= high;
    }
    return false;
}

std::string_view to_string(Metric m) { return m == Metric::mae ? "mae" : "rmse"; }

Metric parse_metric(std::string_view text) {
    if (text == "mae" || text == "MAE") return Metric::mae;
    if (text == "rmse" || text == "RMSE") return Metric::rmse;
    throw ConfigError("unknown objective '" + std::string(text) + "' (expected mae or rmse)");
}

namespace {

std::string_view kind_name(Dimension::Kind k) {
    switch (k) {
        case Dimension::Kind::choice:
            return "choice";
        case Dimension::Kind::uniform:
            return "uniform";
        case Dimension::Kind::log_uniform:
            return "log_uniform";
        case Dimension::Kind::int_uniform:
            return "int_uniform";
    }
    return "choice";
}

Dimension::Kind parse_kind(const std::string& s) {
    if (s == "choice") return Dimension::Kind::choice;
    if (s == "uniform") return Dimension::Kind::uniform;
    if (s == "log_uniform") return Dimension::Kind::log_uniform;
    if (s == "int_uniform") return Dimension::Kind::int_uniform;
    throw ConfigError("unknown dimension type '" + s + "'");
}

// Dimensions that are integral model sizes.
bool is_integral(const std::string& name) { return name != "LR" && name != "DO"; }

std::vector<double> candidate_values(const Dimension& d) {
    if (d.kind == Dimension::Kind::choice) return d.values;
    std::vector<double> out;
    for (double v = d.low; v <= d.high; v += 1.0) out.push_back(v);
    return out;
}

}  // namespace

void SearchSpace::validate() const {
    const auto& known = known_dimensions();
    for (const auto& [name, d] : dimensions) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            throw ConfigError("unknown search dimension '" + name + "'");
        }
        if (d.kind == Dimension::Kind::choice) {
            if (d.values.empty()) throw ConfigError("dimension " + name + " has no choices");
        } else if (!(d.low <= d.high) || !std::isfinite(d.low) || !std::isfinite(d.high)) {
            throw ConfigError("dimension " + name + " has an invalid range");
        }
        if (d.kind == Dimension::Kind::log_uniform && !(d.low > 0.0)) {
            throw ConfigError("dimension " + name + " must be positive for log_uniform");
        }
        if (is_integral(name)) {
            if (d.kind == Dimension::Kind::uniform || d.kind == Dimension::Kind::log_uniform) {
                throw ConfigError("dimension " + name + " is integral; use choice or int_uniform");
            }
            for (const double v : candidate_values(d)) {
                if (v < 1.0 || std::floor(v) != v) throw ConfigError("dimension " + name + " needs integers >= 1");
            }
        }
        if (name == "LR") {
            for (const double v : candidate_values(d)) {
                if (!(v > 0.0)) throw ConfigError("LR must be positive");
            }
            if (d.kind != Dimension::Kind::choice && !(d.low > 0.0)) throw ConfigError("LR must be positive");
        }
        if (name == "DO") {
            const double lo = d.kind == Dimension::Kind::choice ? *std::min_element(d.values.begin(), d.values.end())
                                                                : d.low;
            const double hi = d.kind == Dimension::Kind::choice ? *std::max_element(d.values.begin(), d.values.end())
                                                                : d.high;
            if (lo < 0.0 || hi >= 1.0) throw ConfigError("DO must lie in [0, 1)");
        }
    }
    if (model == ModelKind::transformer) {
        const auto mh = dimensions.find("MH");
        const auto ed = dimensions.find("ED");
        const std::vector<double> heads = mh == dimensions.end() ? std::vector<double>{2.0} : candidate_values(mh->second);
        const std::vector<double> dims = ed == dimensions.end() ? std::vector<double>{64.0} : candidate_values(ed->second);
        for (const double h : heads) {
            for (const double e : dims) {
                if (std::fmod(e, h) != 0.0) {
                    throw ConfigError("ED " + std::to_string(static_cast<long>(e)) + " is not divisible by MH " +
                                      std::to_string(static_cast<long>(h)));
                }
            }
        }
    }
    if (model == ModelKind::random_forest) throw ConfigError("random forests are not tuned by the search");
}

json SearchSpace::to_json() const {
    json dims = json::object();
    for (const auto& [name, d] : dimensions) {
        json dj = {{"type", kind_name(d.kind)}};
        if (d.kind == Dimension::Kind::choice) {
            dj["values"] = d.values;
        } else {
            dj["low"] = d.low;
            dj["high"] = d.high;
        }
        dims[name] = dj;
    }
    return {{"model", std::string(powertrace::to_string(model))},
            {"objective", std::string(to_string(objective))},
            {"dimensions", dims}};
}

SearchSpace SearchSpace::from_json(const json& j) {
    try {
        SearchSpace s;
        s.model = parse_model_kind(j.at("model").get<std::string>());
        s.objective = parse_metric(j.value("objective", std::string("mae")));
        for (const auto& [name, dj] : j.at("dimensions").items()) {
            Dimension d;
            d.kind = parse_kind(dj.at("type").get<std::string>());
            if (d.kind == Dimension::Kind::choice) {
                d.values = dj.at("values").get<std::vector<double>>();
            } else {
                d.low = dj.at("low").get<double>();
                d.high = dj.at("high").get<double>();
            }
            s.dimensions[name] = d;
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed search space: ") + e.what());
    }
}

SearchSpace default_space(ModelKind model, Metric objective) {
    using K = Dimension::Kind;
    SearchSpace s;
    s.model = model;
    s.objective = objective;
    s.dimensions["WS"] = {K::choice, {10, 20, 30, 50}, 0, 0};
    s.dimensions["LR"] = {K::log_uniform, {}, 1e-4, 1e-2};
    switch (model) {
        case ModelKind::lstm:
            s.dimensions["HD"] = {K::choice, {16, 32, 64, 132}, 0, 0};
            s.dimensions["NL"] = {K::int_uniform, {}, 1, 4};
            break;
        case ModelKind::tcn:
            s.dimensions["HD"] = {K::choice, {16, 32, 64}, 0, 0};
            s.dimensions["NL"] = {K::int_uniform, {}, 1, 4};
            s.dimensions["KS"] = {K::choice, {2, 3, 5}, 0, 0};
            break;
        case ModelKind::transformer:
            s.dimensions["ED"] = {K::choice, {32, 64}, 0, 0};
            s.dimensions["MH"] = {K::choice, {1, 2, 4}, 0, 0};
            s.dimensions["NL"] = {K::int_uniform, {}, 1, 4};
            s.dimensions["FFD"] = {K::choice, {32, 64, 128}, 0, 0};
            s.dimensions["DO"] = {K::uniform, {}, 0.0, 0.3};
            s.dimensions["KS"] = {K::choice, {1, 3, 5}, 0, 0};
            break;
        case ModelKind::random_forest:
            throw ConfigError("random forests are not tuned by the search");
    }
    return s;
}

Point RandomSampler::sample(const SearchSpace& space, std::size_t trial_id) const {
    Rng rng(derive_seed(seed_, trial_id));
    Point p;
    for (const auto& [name, d] : space.dimensions) p[name] = d.sample(rng);
    return p;
}

std::string_view to_string(TrialStatus s) {
    switch (s) {
        case TrialStatus::running:
            return "running";
        case TrialStatus::pruned:
            return "pruned";
        case TrialStatus::complete:
            return "complete";
        case TrialStatus::failed:
            return "failed";
    }
    return "running";
}

std::optional<double> Trial::value_at(std::size_t step) const {
    for (const auto& [s, v] : intermediate) {
        if (s == step) return v;
    }
    return std::nullopt;
}

json Trial::to_json() const {
    json j = {{"trial", id}, {"status", std::string(to_string(status))}, {"point", point}};
    j["objective"] = objective ? json(*objective) : json(nullptr);
    json steps = json::array();
    for (const auto& [s, v] : intermediate) steps.push_back({s, v});
    j["intermediate"] = steps;
    if (!error.empty()) j["error"] = error;
    return j;
}

bool median_prune(std::size_t step, double value, const std::vector<Trial>& history, const PrunerConfig& config) {
    if (step < config.warmup_steps) return false;
    std::size_t complete = 0;
    std::vector<double> at_step;
    for (const auto& t : history) {
        if (t.status != TrialStatus::complete) continue;
        ++complete;
        if (const auto v = t.value_at(step)) at_step.push_back(*v);
    }
    if (complete < config.warmup_trials || at_step.empty()) return false;
    std::sort(at_step.begin(), at_step.end());
    const std::size_t n = at_step.size();
    const double median = n % 2 == 1 ? at_step[n / 2] : 0.5 * (at_step[n / 2 - 1] + at_step[n / 2]);
    return value > median;
}

namespace {

class Context final : public TrialContext {
public:
    Context(Trial& trial, const std::vector<Trial>& completed, const PrunerConfig& pruner,
            std::vector<json>& records)
        : trial_(trial), completed_(completed), pruner_(pruner), records_(records) {}

    bool report(std::size_t step, double value) override {
        trial_.intermediate.emplace_back(step, value);
        const bool prune = median_prune(step, value, completed_, pruner_);
        if (prune) pruned_ = true;
        records_.push_back({{"trial", trial_.id}, {"step", step}, {"value", value}, {"pruned", prune}});
        return prune;
    }

    std::size_t trial_id() const override { return trial_.id; }
    bool pruned() const { return pruned_; }

private:
    Trial& trial_;
    const std::vector<Trial>& completed_;
    const PrunerConfig& pruner_;
    std::vector<json>& records_;
    bool pruned_ = false;
};

}  // namespace

SearchResult search(const SearchSpace& space, const Objective& objective, const SearchOptions& options,
                    const Sampler* sampler) {
    space.validate();
    if (options.budget < 1) throw ConfigError("search budget must be at least 1");
    const RandomSampler fallback(options.seed);
    const Sampler& s = sampler ? *sampler : fallback;

    std::vector<Trial> trials(options.budget);
    std::vector<std::vector<json>> records(options.budget);
    for (std::size_t i = 0; i < options.budget; ++i) {
        trials[i].id = i;
        trials[i].point = s.sample(space, i);
    }

    const auto run_trial = [&](std::size_t i, const std::vector<Trial>& completed) {
        Trial& trial = trials[i];
        Context ctx(trial, completed, options.pruner, records[i]);
        try {
            const double v = objective(trial.point, ctx);
            if (ctx.pruned()) {
                trial.status = TrialStatus::pruned;
            } else if (!std::isfinite(v)) {
                trial.status = TrialStatus::failed;
                trial.error = "objective is not finite";
            } else {
                trial.status = TrialStatus::complete;
                trial.objective = v;
            }
        } catch (const Error& e) {
            trial.status = TrialStatus::failed;
            trial.error = e.what();
        }
        records[i].push_back(trial.to_json());
    };

    // Trials run in waves of `workers`; each wave prunes against the trials
    // completed before it started, so results do not depend on thread timing.
    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, options.budget);
    for (std::size_t begin = 0; begin < options.budget; begin += workers) {
        const std::size_t end = std::min(options.budget, begin + workers);
        std::vector<Trial> completed;
        for (std::size_t i = 0; i < begin; ++i) {
            if (trials[i].status == TrialStatus::complete) completed.push_back(trials[i]);
        }
        if (end - begin == 1) {
            run_trial(begin, completed);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t i = begin; i < end; ++i) pool.emplace_back(run_trial, i, std::cref(completed));
            for (auto& t : pool) t.join();
        }
        if (options.log) {
            for (std::size_t i = begin; i < end; ++i) {
                for (const auto& r : records[i]) options.log(r);
            }
        }
    }

    SearchResult result;
    result.trials = std::move(trials);
    for (const auto& t : result.trials) {
        if (t.status == TrialStatus::complete) result.leaderboard.push_back(t.id);
    }
    if (result.leaderboard.empty()) {
        throw ConfigError("all " + std::to_string(options.budget) +
                          " trials were pruned or failed; increase the pruner warm-up or the budget");
    }
    std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(), [&](std::size_t a, std::size_t b) {
        return *result.trials[a].objective < *result.trials[b].objective;
    });
    result.best = result.trials[result.leaderboard.front()];
    return result;
}

namespace {

std::size_t as_size(const Point& p, const char* key, std::size_t fallback) {
    const auto it = p.find(key);
    return it == p.end() ? fallback : static_cast<std::size_t>(std::llround(it->second));
}

double as_double(const Point& p, const char* key, double fallback) {
    const auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

std::vector<std::size_t> doubling_dilations(std::size_t blocks) {
    std::vector<std::size_t> d;
    for (std::size_t i = 0; i < blocks; ++i) d.push_back(std::size_t{1} << i);
    return d;
}

}  // namespace

ModelConfig config_from_point(ModelKind model, const Point& point, std::size_t input_dim) {
    ModelConfig out;
    switch (model) {
        case ModelKind::lstm: {
            LstmConfig c;
            c.input_dim = input_dim;
            c.hidden = as_size(point, "HD", c.hidden);
            c.layers = as_size(point, "NL", c.layers);
            c.dropout = as_double(point, "DO", c.dropout);
            out = c;
            break;
        }
        case ModelKind::tcn: {
            TcnConfig c;
            c.input_dim = input_dim;
            c.channels = as_size(point, "NCH", as_size(point, "HD", c.channels));
            c.dilations = doubling_dilations(as_size(point, "NL", c.dilations.size()));
            c.kernel = as_size(point, "KS", c.kernel);
            c.dropout = as_double(point, "DO", c.dropout);
            out = c;
            break;
        }
        case ModelKind::transformer: {
            TransformerConfig c;
            c.input_dim = input_dim;
            c.d_model = as_size(point, "ED", c.d_model);
            c.heads = as_size(point, "MH", c.heads);
            c.encoder_layers = as_size(point, "NL", c.encoder_layers);
            c.ff_dim = as_size(point, "FFD", c.ff_dim);
            c.dropout = as_double(point, "DO", c.dropout);
            c.conv_kernel = as_size(point, "KS", c.conv_kernel);
            out = c;
            break;
        }
        case ModelKind::random_forest:
            out = RfConfig{};
            break;
    }
    validate(out);
    return out;
}

TrainConfig train_from_point(const Point& point, TrainConfig base) {
    base.lr = as_double(point, "LR", base.lr);
    return base;
}

std::size_t window_from_point(const Point& point, std::size_t fallback) { return as_size(point, "WS", fallback); }

Objective make_model_objective(ModelObjectiveConfig config) {
    auto shared = std::make_shared<const ModelObjectiveConfig>(std::move(config));
    return [shared](const Point& point, TrialContext& ctx) -> double {
        const ModelObjectiveConfig& c = *shared;
        const std::size_t window = window_from_point(point, c.default_window);
        const PreparedData data = prepare_dataset(c.series, c.features, window, c.stride, c.split);
        const ModelConfig mc = config_from_point(c.model, point, c.features.size());
        const std::uint64_t seed = derive_seed(c.seed, ctx.trial_id());
        auto net = build_network(mc, seed);
        const WindowedDataset& val = data.splits.val.size() > 0 ? data.splits.val : data.splits.train;
        const auto metric = [&]() {
            const auto pred = predict(*net, val);
            return c.metric == Metric::mae ? mae(val.y, pred) : rmse(val.y, pred);
        };
        TrainConfig tc = train_from_point(point, c.train);
        tc.seed = seed;
        tc.on_epoch = [&](const EpochCallbackInfo& info) {
            const double v = c.metric == Metric::rmse ? std::sqrt(info.val_loss) : metric();
            return !ctx.report(info.epoch + 1, v);
        };
        train(*net, data.splits.train, data.splits.val, tc);
        return metric();
    };
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all{
        {"ice-tcn", PowertrainKind::ice, ModelKind::tcn, Metric::mae,
         {{"WS", 10}, {"LR", 0.01}, {"HD", 64}, {"NL", 3}, {"KS", 3}},
         "HD sets the TCN channel width; NL is the number of residual blocks."},
        {"ev-transformer", PowertrainKind::ev, ModelKind::transformer, Metric::mae,
         {{"WS", 50}, {"LR", 0.001}, {"ED", 64}, {"MH", 2}, {"NL", 2}, {"FFD", 32}, {"DO", 0.1}},
         "Two encoder layers; the architecture default elsewhere is four."},
        {"hev-lstm", PowertrainKind::hev, ModelKind::lstm, Metric::rmse,
         {{"WS", 10}, {"LR", 0.01}, {"HD", 132}, {"NL", 9}, {"KS", 5}},
         "KS is stored for completeness; an LSTM has no kernel and the builder ignores it."},
    };
    return all;
}

const Preset& find_preset(std::string_view name) {
    for (const auto& p : presets()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected ice-tcn, ev-transformer or hev-lstm)");
}

}  // namespace powertrace::hpo
