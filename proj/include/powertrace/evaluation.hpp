#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powertrace/models.hpp"
#include "powertrace/preprocess.hpp"

namespace powertrace {

// Throws ShapeError on length mismatch and DataError on empty input.
double mae(const std::vector<double>& actual, const std::vector<double>& predicted);
double rmse(const std::vector<double>& actual, const std::vector<double>& predicted);

// out[k] = dt * sum_{i<=k} p[i]  (kW -> kW.s).
std::vector<double> accumulate(const std::vector<double>& p_instant, double dt);
// Irregular sampling: sample k contributes p[k] * (t[k] - t[k-1]); the first uses first_dt.
std::vector<double> accumulate_irregular(const std::vector<double>& p_instant, const std::vector<double>& t,
                                         double first_dt);

struct PercentErrors {
    double mae_pct = 0.0;
    double rmse_pct = 0.0;

    bool operator==(const PercentErrors&) const = default;
};

// MAE and RMSE as a percentage of mean |cum_true|. NumericError when that is below 1e-9.
PercentErrors cumulative_percent_errors(const std::vector<double>& cum_true, const std::vector<double>& cum_pred);

struct PowerSeries {
    std::vector<double> t;
    std::vector<double> p_instant;
    std::vector<double> p_cumulative;
    double dt = 0.0;

    std::size_t n() const { return p_instant.size(); }
};

PowerSeries make_power_series(std::vector<double> t, std::vector<double> p_instant, double dt);

struct MetricPair {
    double mae = 0.0;
    double rmse = 0.0;

    bool operator==(const MetricPair&) const = default;
};

struct Report {
    std::string vehicle;
    std::vector<std::string> feature_set;
    std::string model;
    std::uint64_t seed = 0;
    std::size_t test_windows = 0;
    double dt = 0.0;
    MetricPair instant_scaled;
    MetricPair instant_kw;
    PercentErrors cumulative;
    // 100 * |cum_pred[-1] - cum_true[-1]| / |cum_true[-1]|; 0 when the true total is 0.
    double final_value_error_pct = 0.0;
    std::size_t parameters = 0;
    std::uint64_t flops = 0;
    std::size_t epochs_run = 0;
    double best_val_mse = 0.0;
    double final_val_mse = 0.0;
    // Wall-clock seconds; only set when timing is recorded.
    std::optional<double> runtime_s;

    nlohmann::json to_json() const;
    static Report from_json(const nlohmann::json& j);

    bool operator==(const Report&) const = default;
};

struct EvaluationSeries {
    std::vector<double> t_end;
    PowerSeries actual;
    PowerSeries predicted;
};

struct Evaluation {
    Report report;
    EvaluationSeries series;
};

// Time between consecutive windows.
inline double window_spacing(const WindowedDataset& ds) { return ds.dt * static_cast<double>(ds.stride); }

// Metrics for scaled predictions against the dataset's scaled targets.
Evaluation evaluate_predictions(const std::vector<double>& predicted_scaled, const WindowedDataset& test,
                                const ScalerParams& scaler, double dt);

// Predicts (dropout off), inverts scaling and fills every report field derivable from the model.
Evaluation evaluate_run(const TrainedModel& model, const WindowedDataset& test, double dt,
                        PowertrainKind kind);

// `t_end_s,actual_kw,predicted_kw,cum_actual_kws,cum_predicted_kws`
std::string series_csv(const EvaluationSeries& s);

// One row per report.
std::string results_long_csv(const std::vector<Report>& reports);
// Rows are feature sets, columns are model x metric, in first-seen order. Missing cells stay empty.
std::string results_table_csv(const std::vector<Report>& reports);

struct PlotLine {
    std::string name;
    std::vector<double> values;
    std::string color;
};

struct PlotBand {
    std::string name;
    std::vector<double> lower;
    std::vector<double> upper;
    std::string color;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<PlotLine> lines;
    std::vector<PlotBand> bands;
    int width = 900;
    int height = 360;
};

// Static SVG with the plotted data repeated as CSV inside a comment.
std::string render_svg(const PlotSpec& spec);

}  // namespace powertrace
