#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powertrace/evaluation.hpp"
#include "powertrace/models.hpp"
#include "powertrace/preprocess.hpp"

namespace powertrace {

struct NoiseModel {
    std::vector<std::string> feature_names;
    std::vector<double> sigma;
    // First row of the steady-state segment each sigma was measured on.
    std::vector<std::size_t> segment_start;
    std::size_t segment_len = 200;

    nlohmann::json to_json() const;
};

// Per feature, the contiguous `segment_len` rows with the smallest variance
// (earliest on ties); sigma is that segment's sample standard deviation.
NoiseModel estimate_feature_noise(const AlignedSeries& series, std::size_t segment_len = 200);

// Adds sigma[c] * N(0, 1) to every cell of channel c; targets are untouched.
WindowedDataset inject_noise(const WindowedDataset& ds, const NoiseModel& noise, std::uint64_t seed);

struct EnsembleConfig {
    std::size_t runs = 30;
    // Dropout rate used at inference; nullopt disables Monte Carlo dropout.
    std::optional<double> inference_dropout = 0.2;
    bool inject_train_noise = false;
    bool inject_test_noise = false;
    bool reinitialize_weights = false;
    // One noise realization reused by every run instead of fresh draws.
    bool share_noise_realization = false;
    std::uint64_t base_seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

struct RunMetrics {
    std::uint64_t seed = 0;
    MetricPair instant_kw;
    PercentErrors cumulative;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct EnsembleSummary {
    std::size_t runs = 0;
    MeanStd mae_kw;
    MeanStd rmse_kw;
    MeanStd cum_mae_pct;
    MeanStd cum_rmse_pct;
};

struct EnsembleResult {
    std::vector<double> t_end;
    std::vector<double> actual_kw;
    std::vector<double> cum_actual;
    // Per-timestep statistics across runs (population std).
    std::vector<double> mean_kw;
    std::vector<double> std_kw;
    std::vector<double> cum_mean;
    std::vector<double> cum_std;
    // runs x N, physical units.
    std::vector<std::vector<double>> run_predictions_kw;
    std::vector<RunMetrics> runs;
    EnsembleSummary summary;
    // Metrics of the mean prediction, reported next to the per-run spread.
    MetricPair mean_prediction_kw;
    PercentErrors mean_prediction_cumulative;
    std::vector<std::string> warnings;
};

// Population mean and std of each column of a runs x N matrix.
void column_mean_std(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                     std::vector<double>& std);
MeanStd mean_std(const std::vector<double>& values);

// Builds per-timestep statistics and per-run metrics from physical-unit predictions.
EnsembleResult summarize_ensemble(std::vector<std::vector<double>> run_predictions_kw,
                                  std::vector<std::uint64_t> run_seeds, const WindowedDataset& test,
                                  const ScalerParams& scaler, double dt);

// Runs the configured ensemble. Run i uses seed derive_seed(base_seed, i) for
// whichever stochastic sources are enabled; disabled sources stay fixed.
EnsembleResult monte_carlo_ensemble(const ModelConfig& model, const PreparedData& data, const TrainConfig& train,
                                    const NoiseModel& noise, const EnsembleConfig& config);

// Per-tree predictions of a fitted forest treated as ensemble members.
EnsembleResult rf_bootstrap_uncertainty(const TrainedModel& model, const WindowedDataset& test, double dt);

// `t_end_s,mean,std,lower,upper,actual` with lower = mean - std, upper = mean + std.
std::string ensemble_csv(const EnsembleResult& r, bool cumulative);
// MAE ± ΔMAE | RMSE ± ΔRMSE style summary.
nlohmann::json ensemble_summary_json(const EnsembleResult& r);

}  // namespace powertrace
