#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powertrace/models.hpp"
#include "powertrace/preprocess.hpp"
#include "powertrace/signal.hpp"

namespace powertrace::hpo {

// Dimension names follow the usual abbreviations: WS window size, LR learning
// rate, HD hidden dimension, NCH channels, NL layers, KS kernel size, MH heads,
// ED embedding dimension, FFD feed-forward dimension, DO dropout.
inline const std::vector<std::string>& known_dimensions() {
    static const std::vector<std::string> names{"WS", "LR", "HD", "NCH", "NL", "KS", "MH", "ED", "FFD", "DO"};
    return names;
}

struct Dimension {
    enum class Kind { choice, uniform, log_uniform, int_uniform };
    Kind kind = Kind::choice;
    std::vector<double> values;
    double low = 0.0;
    double high = 0.0;

    double sample(Rng& rng) const;
    bool contains(double v) const;
};

enum class Metric { mae, rmse };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view text);

using Point = std::map<std::string, double>;

struct SearchSpace {
    ModelKind model = ModelKind::tcn;
    Metric objective = Metric::mae;
    std::map<std::string, Dimension> dimensions;

    // Rejects unknown names, empty or inverted ranges, and head counts that do
    // not divide every embedding choice.
    void validate() const;
    nlohmann::json to_json() const;
    static SearchSpace from_json(const nlohmann::json& j);
};

// Space used when no search-space file is given.
SearchSpace default_space(ModelKind model, Metric objective);

class Sampler {
public:
    virtual ~Sampler() = default;
    // Must depend only on the trial id so that worker scheduling cannot change the points.
    virtual Point sample(const SearchSpace& space, std::size_t trial_id) const = 0;
};

class RandomSampler final : public Sampler {
public:
    explicit RandomSampler(std::uint64_t seed) : seed_(seed) {}
    Point sample(const SearchSpace& space, std::size_t trial_id) const override;

private:
    std::uint64_t seed_;
};

enum class TrialStatus { running, pruned, complete, failed };
std::string_view to_string(TrialStatus s);

struct Trial {
    std::size_t id = 0;
    Point point;
    // (step, value); steps are 1-based epochs.
    std::vector<std::pair<std::size_t, double>> intermediate;
    TrialStatus status = TrialStatus::running;
    std::optional<double> objective;
    std::string error;

    std::optional<double> value_at(std::size_t step) const;
    nlohmann::json to_json() const;
};

struct PrunerConfig {
    std::size_t warmup_trials = 5;
    std::size_t warmup_steps = 10;
};

// True iff at least warmup_trials trials are complete, step >= warmup_steps and
// `value` is strictly worse (larger) than the median of the complete trials'
// values at `step`.
bool median_prune(std::size_t step, double value, const std::vector<Trial>& history, const PrunerConfig& config);

class TrialContext {
public:
    // Records an intermediate value; returns true when the trial should stop.
    virtual bool report(std::size_t step, double value) = 0;
    virtual std::size_t trial_id() const = 0;

protected:
    ~TrialContext() = default;
};

using Objective = std::function<double(const Point&, TrialContext&)>;

struct SearchOptions {
    std::size_t budget = 20;
    std::uint64_t seed = 0;
    // Trials run in waves of this size and prune against trials finished before their wave.
    std::size_t workers = 1;
    PrunerConfig pruner;
    // Receives one JSON record per checkpoint and per finished trial, in trial order.
    std::function<void(const nlohmann::json&)> log;
};

struct SearchResult {
    Trial best;
    std::vector<Trial> trials;
    // Complete trial ids ordered by objective, then id.
    std::vector<std::size_t> leaderboard;
};

// Throws ConfigError when no trial completes.
SearchResult search(const SearchSpace& space, const Objective& objective, const SearchOptions& options,
                    const Sampler* sampler = nullptr);

ModelConfig config_from_point(ModelKind model, const Point& point, std::size_t input_dim);
TrainConfig train_from_point(const Point& point, TrainConfig base);
std::size_t window_from_point(const Point& point, std::size_t fallback);

struct ModelObjectiveConfig {
    AlignedSeries series;
    std::vector<std::string> features;
    SplitSpec split;
    std::size_t stride = 1;
    std::size_t default_window = 10;
    ModelKind model = ModelKind::tcn;
    Metric metric = Metric::mae;
    // Per-trial epoch cap.
    TrainConfig train = [] {
        TrainConfig t;
        t.epochs = 60;
        return t;
    }();
    std::uint64_t seed = 0;
};

// Trains the model described by a point and returns the validation metric
// (scaled units), reporting it after every epoch.
Objective make_model_objective(ModelObjectiveConfig config);

struct Preset {
    std::string name;
    PowertrainKind vehicle;
    ModelKind model;
    Metric metric;
    Point point;
    std::string notes;
};

const std::vector<Preset>& presets();
const Preset& find_preset(std::string_view name);

}  // namespace powertrace::hpo
