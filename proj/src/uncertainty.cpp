#include "powertrace/uncertainty.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <thread>

#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

nlohmann::json NoiseModel::to_json() const {
    return {{"feature_names", feature_names},
            {"sigma", sigma},
            {"segment_start", segment_start},
            {"segment_len", segment_len}};
}

NoiseModel estimate_feature_noise(const AlignedSeries& series, std::size_t segment_len) {
    if (segment_len == 0) throw ConfigError("noise segment length must be at least 1");
    const std::size_t rows = series.rows();
    const std::size_t cols = series.cols();
    if (rows < segment_len) {
        throw DataError("noise estimation needs at least " + std::to_string(segment_len) + " training rows, got " +
                        std::to_string(rows));
    }
    NoiseModel model;
    model.feature_names = series.feature_names;
    model.segment_len = segment_len;
    const double n = static_cast<double>(segment_len);
    for (std::size_t c = 0; c < cols; ++c) {
        double best_ss = std::numeric_limits<double>::infinity();
        std::size_t best_start = 0;
        for (std::size_t s = 0; s + segment_len <= rows; ++s) {
            double mean = 0.0;
            for (std::size_t r = s; r < s + segment_len; ++r) mean += series.feature(r, c);
            mean /= n;
            double ss = 0.0;
            for (std::size_t r = s; r < s + segment_len; ++r) {
                const double d = series.feature(r, c) - mean;
                ss += d * d;
            }
            if (ss < best_ss) {
                best_ss = ss;
                best_start = s;
            }
        }
        model.segment_start.push_back(best_start);
        model.sigma.push_back(segment_len > 1 ? std::sqrt(best_ss / (n - 1.0)) : 0.0);
    }
    return model;
}

WindowedDataset inject_noise(const WindowedDataset& ds, const NoiseModel& noise, std::uint64_t seed) {
    if (noise.sigma.size() != ds.channels) {
        throw ShapeError("noise model has " + std::to_string(noise.sigma.size()) + " features, dataset has " +
                         std::to_string(ds.channels));
    }
    if (!noise.feature_names.empty() && !ds.feature_names.empty() && noise.feature_names != ds.feature_names) {
        throw ConfigError("noise model features [" + join(noise.feature_names, ", ") +
                          "] do not match dataset features [" + join(ds.feature_names, ", ") + "]");
    }
    WindowedDataset out = ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] += noise.sigma[i % ds.channels] * rng.normal();
    return out;
}

void EnsembleConfig::validate() const {
    if (runs < 2) throw ConfigError("an ensemble needs at least 2 runs");
    if (inference_dropout && !(*inference_dropout >= 0.0 && *inference_dropout < 1.0)) {
        throw ConfigError("inference dropout must lie in [0, 1)");
    }
}

namespace {

struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    double pop_std() const { return n == 0 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n))); }
};

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
    Welford w;
    for (const double v : values) w.add(v);
    return {w.mean, w.pop_std()};
}

void column_mean_std(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                     std::vector<double>& std) {
    const std::size_t n = rows.empty() ? 0 : rows.front().size();
    mean.assign(n, 0.0);
    std.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        Welford w;
        for (const auto& row : rows) w.add(row.at(k));
        mean[k] = w.mean;
        std[k] = w.pop_std();
    }
}

EnsembleResult summarize_ensemble(std::vector<std::vector<double>> run_predictions_kw,
                                  std::vector<std::uint64_t> run_seeds, const WindowedDataset& test,
                                  const ScalerParams& scaler, double dt) {
    if (run_predictions_kw.empty()) throw DataError("ensemble has no runs");
    EnsembleResult r;
    r.t_end = test.t_end;
    r.actual_kw = invert_target(test.y, scaler);
    r.cum_actual = accumulate(r.actual_kw, dt);
    std::vector<std::vector<double>> cum_runs;
    std::vector<double> maes, rmses, cmaes, crmses;
    for (std::size_t i = 0; i < run_predictions_kw.size(); ++i) {
        const auto& pred = run_predictions_kw[i];
        cum_runs.push_back(accumulate(pred, dt));
        RunMetrics m;
        m.seed = i < run_seeds.size() ? run_seeds[i] : i;
        m.instant_kw = {mae(r.actual_kw, pred), rmse(r.actual_kw, pred)};
        m.cumulative = cumulative_percent_errors(r.cum_actual, cum_runs.back());
        maes.push_back(m.instant_kw.mae);
        rmses.push_back(m.instant_kw.rmse);
        cmaes.push_back(m.cumulative.mae_pct);
        crmses.push_back(m.cumulative.rmse_pct);
        r.runs.push_back(m);
    }
    column_mean_std(run_predictions_kw, r.mean_kw, r.std_kw);
    column_mean_std(cum_runs, r.cum_mean, r.cum_std);
    r.summary = {run_predictions_kw.size(), mean_std(maes), mean_std(rmses), mean_std(cmaes), mean_std(crmses)};
    r.mean_prediction_kw = {mae(r.actual_kw, r.mean_kw), rmse(r.actual_kw, r.mean_kw)};
    r.mean_prediction_cumulative = cumulative_percent_errors(r.cum_actual, accumulate(r.mean_kw, dt));
    r.run_predictions_kw = std::move(run_predictions_kw);
    return r;
}

namespace {

constexpr std::uint64_t kTrainNoiseStream = 1;
constexpr std::uint64_t kTestNoiseStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

template <typename E>
[[noreturn]] void rethrow_with_run(const E& e, std::size_t run) {
    throw E("ensemble run " + std::to_string(run) + ": " + e.what());
}

}  // namespace

EnsembleResult monte_carlo_ensemble(const ModelConfig& model, const PreparedData& data, const TrainConfig& train,
                                    const NoiseModel& noise, const EnsembleConfig& config) {
    config.validate();
    const WindowedDataset& test = data.splits.test;
    const std::size_t n = config.runs;
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = derive_seed(config.base_seed, i);

    std::optional<TrainedModel> shared;
    if (!config.reinitialize_weights && !config.inject_train_noise) {
        shared = fit_model(model, data, train, config.base_seed);
    }

    std::vector<std::vector<double>> preds(n);
    std::vector<std::exception_ptr> errors(n);
    const auto run_one = [&](std::size_t i) {
        try {
            const std::uint64_t noise_seed = config.share_noise_realization ? config.base_seed : seeds[i];
            std::optional<TrainedModel> own;
            if (!shared) {
                const std::uint64_t init_seed = config.reinitialize_weights ? seeds[i] : config.base_seed;
                if (config.inject_train_noise) {
                    PreparedData noisy = data;
                    noisy.splits.train =
                        inject_noise(data.splits.train, noise, derive_seed(noise_seed, kTrainNoiseStream));
                    own = fit_model(model, noisy, train, init_seed);
                } else {
                    own = fit_model(model, data, train, init_seed);
                }
            }
            const TrainedModel& m = shared ? *shared : *own;
            const WindowedDataset test_i =
                config.inject_test_noise ? inject_noise(test, noise, derive_seed(noise_seed, kTestNoiseStream)) : test;
            const bool mc = config.inference_dropout.has_value();
            const auto scaled = predict(m, test_i, mc, derive_seed(seeds[i], kDropoutStream), config.inference_dropout);
            preds[i] = invert_target(scaled, data.scaler);
        } catch (const NumericError& e) {
            try {
                rethrow_with_run(e, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        } catch (const ConfigError& e) {
            try {
                rethrow_with_run(e, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        } catch (const DataError& e) {
            try {
                rethrow_with_run(e, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            run_one(i);
            if (errors[i]) std::rethrow_exception(errors[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t i = next++; i < n; i = next++) run_one(i);
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return summarize_ensemble(std::move(preds), std::move(seeds), test, data.scaler, window_spacing(test));
}

EnsembleResult rf_bootstrap_uncertainty(const TrainedModel& model, const WindowedDataset& test, double dt) {
    if (!model.forest) throw ConfigError("bootstrap uncertainty needs a random forest model");
    auto per_tree = rf_per_tree(*model.forest, test);
    std::vector<std::uint64_t> ids(per_tree.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = i;
        per_tree[i] = invert_target(per_tree[i], model.scaler);
    }
    const bool single = per_tree.size() == 1;
    EnsembleResult r = summarize_ensemble(std::move(per_tree), std::move(ids), test, model.scaler, dt);
    if (single) r.warnings.push_back("forest has a single tree; the bootstrap spread is zero");
    return r;
}

std::string ensemble_csv(const EnsembleResult& r, bool cumulative) {
    const auto& mean = cumulative ? r.cum_mean : r.mean_kw;
    const auto& sd = cumulative ? r.cum_std : r.std_kw;
    const auto& actual = cumulative ? r.cum_actual : r.actual_kw;
    std::string out = "t_end_s,mean,std,lower,upper,actual\n";
    for (std::size_t k = 0; k < mean.size(); ++k) {
        out += format_time(r.t_end[k]) + ',' + format_double(mean[k]) + ',' + format_double(sd[k]) + ',' +
               format_double(mean[k] - sd[k]) + ',' + format_double(mean[k] + sd[k]) + ',' +
               format_double(actual[k]) + '\n';
    }
    return out;
}

namespace {

std::string pm(const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f ± %.3f", m.mean, m.std);
    return buf;
}

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"delta", m.std}}; }

}  // namespace

nlohmann::json ensemble_summary_json(const EnsembleResult& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& m : r.runs) {
        runs.push_back({{"seed", m.seed},
                        {"mae_kw", m.instant_kw.mae},
                        {"rmse_kw", m.instant_kw.rmse},
                        {"cum_mae_pct", m.cumulative.mae_pct},
                        {"cum_rmse_pct", m.cumulative.rmse_pct}});
    }
    const auto& s = r.summary;
    return {{"runs", s.runs},
            {"mae_kw", ms_json(s.mae_kw)},
            {"rmse_kw", ms_json(s.rmse_kw)},
            {"cum_mae_pct", ms_json(s.cum_mae_pct)},
            {"cum_rmse_pct", ms_json(s.cum_rmse_pct)},
            {"instant_table", pm(s.mae_kw) + " | " + pm(s.rmse_kw)},
            {"cumulative_table", pm(s.cum_mae_pct) + " | " + pm(s.cum_rmse_pct)},
            {"mean_prediction",
             {{"mae_kw", r.mean_prediction_kw.mae},
              {"rmse_kw", r.mean_prediction_kw.rmse},
              {"cum_mae_pct", r.mean_prediction_cumulative.mae_pct},
              {"cum_rmse_pct", r.mean_prediction_cumulative.rmse_pct}}},
            {"per_run", runs},
            {"warnings", r.warnings}};
}

}  // namespace powertrace
