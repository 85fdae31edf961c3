// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: acceptance [criterion numbers...]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "powertrace/errors.hpp"
#include "powertrace/evaluation.hpp"
#include "powertrace/hpo.hpp"
#include "powertrace/ingest.hpp"
#include "powertrace/models.hpp"
#include "powertrace/synthgen.hpp"
#include "powertrace/text.hpp"
#include "powertrace/uncertainty.hpp"
#include "test_support.hpp"

using namespace powertrace;
namespace fs = std::filesystem;

namespace tol {
constexpr double param_count_rel = 0.05;
constexpr double grad_rel = 1e-4;
constexpr double grad_runtime_s = 60.0;
constexpr double accumulate_rel = 1e-12;
constexpr double metric_rel = 1e-12;
constexpr double scale_invariance = 1e-9;
constexpr double sync_runtime_s = 10.0;
constexpr double ice_cum_mae_pct = 5.0;
constexpr std::size_t ice_max_epochs = 60;
constexpr double ice_runtime_s = 600.0;
constexpr double regen_negative_fraction = 0.5;
constexpr double ensemble_positive_fraction = 0.95;
constexpr double ensemble_summary = 1e-9;
constexpr double ensemble_runtime_s = 900.0;
constexpr double rf_importance_sum = 1e-9;
constexpr double rf_causal_importance = 0.9;
}  // namespace tol

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

WindowedDataset random_windows(std::size_t n, std::size_t w, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    WindowedDataset ds;
    ds.window = w;
    ds.channels = c;
    ds.dt = 0.5;
    for (std::size_t i = 0; i < c; ++i) ds.feature_names.push_back("f" + std::to_string(i));
    ds.x.resize(n * w * c);
    for (auto& v : ds.x) v = rng.uniform();
    ds.y.resize(n);
    for (auto& v : ds.y) v = rng.uniform();
    ds.t_end.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.t_end[i] = 0.5 * static_cast<double>(i + w - 1);
    return ds;
}

// ---------------------------------------------------------------------------

void criterion_1(Outcome& o) {
    const auto lstm = build_lstm({.input_dim = 4, .hidden = 32, .layers = 3}, 1);
    const auto tcn = build_tcn({.input_dim = 4, .channels = 64, .dilations = {1, 2, 4}, .convs_per_block = 2,
                                .kernel = 5},
                               1);
    const auto transformer = build_network(default_config(ModelKind::transformer, 4), 1);
    const std::size_t nl = count_parameters(*lstm);
    const std::size_t nt = count_parameters(*tcn);
    o.detail << "lstm=" << nl << " tcn=" << nt << " transformer=" << count_parameters(*transformer) << " (exempt)";
    o.expect(nl == 21409, "lstm exact 21409");
    o.expect(nt == 104449, "tcn exact 104449");
    o.expect(std::abs(static_cast<double>(nl) - 22000.0) <= tol::param_count_rel * 22000.0, "lstm within 5% of 22K");
    o.expect(std::abs(static_cast<double>(nt) - 104000.0) <= tol::param_count_rel * 104000.0,
             "tcn within 5% of 104K");
}

void criterion_2(Outcome& o) {
    using namespace powertrace::ad;
    using powertrace::testing::away_from_zero;
    using powertrace::testing::grad_check;
    using powertrace::testing::random_tensor;
    using powertrace::testing::weighted_sum;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t checks = 0;
    const auto record = [&](const std::string& name, const powertrace::testing::GradCheckResult& r) {
        ++checks;
        worst = std::max(worst, r.max_rel_error);
        o.expect(r.max_rel_error < tol::grad_rel, name + " " + r.worst);
    };
    const auto primitive = [&](const std::string& name, std::vector<std::pair<Shape, bool>> shapes,
                               const std::function<Var(Tape&, ParamStore&)>& loss) {
        ParamStore store;
        Rng rng(1234);
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            auto& [shape, avoid_zero] = shapes[i];
            store.add("p" + std::to_string(i), avoid_zero ? away_from_zero(shape, rng) : random_tensor(shape, rng));
        }
        record(name, grad_check(store, [&](Tape& t) { return loss(t, store); }));
    };

    primitive("matmul", {{{2, 6, 3}, false}, {{3, 5}, false}},
              [](Tape& t, ParamStore& s) { return weighted_sum(t, matmul(t, t.parameter(s, 0), t.parameter(s, 1))); });
    primitive("batched_matmul", {{{2, 3, 6, 4}, false}, {{2, 3, 4, 2}, false}, {{2, 3, 2, 4}, false}},
              [](Tape& t, ParamStore& s) {
                  const Var a = t.parameter(s, 0);
                  return add(t, weighted_sum(t, batched_matmul(t, a, t.parameter(s, 1)), 1),
                             weighted_sum(t, batched_matmul(t, a, t.parameter(s, 2), true), 2));
              });
    primitive("add/mul/scale", {{{6, 3}, false}, {{3}, false}, {{6, 3}, false}}, [](Tape& t, ParamStore& s) {
        const Var a = t.parameter(s, 0);
        return weighted_sum(
            t, scale(t, add(t, mul(t, a, t.parameter(s, 1)), mul(t, a, t.parameter(s, 2))), 1.7));
    });
    primitive("sigmoid/tanh/relu", {{{6, 3}, true}}, [](Tape& t, ParamStore& s) {
        const Var x = t.parameter(s, 0);
        return add(t, add(t, weighted_sum(t, sigmoid(t, x), 1), weighted_sum(t, ad::tanh(t, x), 2)),
                   weighted_sum(t, relu(t, x), 3));
    });
    primitive("softmax", {{{3, 6}, false}},
              [](Tape& t, ParamStore& s) { return weighted_sum(t, softmax(t, t.parameter(s, 0))); });
    primitive("layer_norm", {{{2, 6, 3}, false}, {{3}, false}, {{3}, false}}, [](Tape& t, ParamStore& s) {
        return weighted_sum(t, layer_norm(t, t.parameter(s, 0), t.parameter(s, 1), t.parameter(s, 2)));
    });
    for (std::size_t d : {1, 2, 4}) {
        primitive("causal_dilated_conv1d d=" + std::to_string(d), {{{2, 6, 3}, false}, {{3, 3, 4}, false}, {{4}, false}},
                  [d](Tape& t, ParamStore& s) {
                      return weighted_sum(t, causal_dilated_conv1d(t, t.parameter(s, 0), t.parameter(s, 1),
                                                                   t.parameter(s, 2), d));
                  });
    }
    primitive("dropout", {{{6, 3}, false}}, [](Tape& t, ParamStore& s) {
        Rng rng(5);
        return weighted_sum(t, dropout(t, t.parameter(s, 0), 0.3, true, rng));
    });
    primitive("mse_loss", {{{6}, false}}, [](Tape& t, ParamStore& s) {
        Rng rng(9);
        return mse_loss(t, t.parameter(s, 0), random_tensor({6}, rng));
    });
    primitive("reshape/permute/select_step/slice_last", {{{2, 6, 3}, false}}, [](Tape& t, ParamStore& s) {
        const Var x = t.parameter(s, 0);
        const Var p = permute(t, reshape(t, x, {2, 3, 2, 3}), {0, 2, 1, 3});
        return add(t, add(t, weighted_sum(t, p, 1), weighted_sum(t, select_step(t, x, 5), 2)),
                   weighted_sum(t, slice_last(t, x, 1, 2), 3));
    });

    const auto ds = random_windows(2, 6, 3, 11);
    const Tensor x(Shape{2, 6, 3}, ds.x);
    const Tensor y(Shape{2}, ds.y);
    std::vector<std::unique_ptr<Network>> nets;
    nets.push_back(build_lstm({.input_dim = 3, .hidden = 4, .layers = 2, .dropout = 0.2}, 21));
    nets.push_back(build_tcn(
        {.input_dim = 3, .channels = 4, .dilations = {1, 2}, .convs_per_block = 2, .kernel = 3, .dropout = 0.1}, 21));
    nets.push_back(build_transformer({.input_dim = 3, .d_model = 4, .encoder_layers = 2, .heads = 2, .ff_dim = 6,
                                      .dropout = 0.1, .conv_kernel = 2},
                                     21));
    for (auto& net : nets) {
        const std::string name(to_string(net->kind()));
        record(name, grad_check(net->params(), [&](Tape& t) { return mse_loss(t, net->forward(t, t.constant(x), {}), y); }));
        record(name + " dropout", grad_check(net->params(), [&](Tape& t) {
                   Rng rng(8);
                   ForwardMode mode;
                   mode.dropout = true;
                   mode.rng = &rng;
                   return mse_loss(t, net->forward(t, t.constant(x), mode), y);
               }));
    }
    const double s = seconds_since(t0);
    o.detail << checks << " checks, worst rel error " << worst << ", " << fixed(s) << " s";
    o.expect(s < tol::grad_runtime_s, "runtime");
}

void criterion_3(Outcome& o) {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(400);
        const double dt = rng.uniform(0.01, 2.0);
        std::vector<double> p(n);
        for (auto& v : p) v = rng.uniform(-80.0, 120.0);
        const auto got = accumulate(p, dt);
        if (got.size() != n) {
            o.expect(false, "length");
            return;
        }
        double prefix = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            prefix += p[k];
            const double want = prefix * dt;
            worst = std::max(worst, std::abs(got[k] - want) / std::max(1.0, std::abs(want)));
        }
    }
    o.detail << "1000 series, worst rel deviation " << worst;
    o.expect(worst <= tol::accumulate_rel, "prefix-sum oracle");
}

void criterion_4(Outcome& o) {
    Rng rng(4);
    double worst = 0.0;
    double worst_scale = 0.0;
    std::size_t ordering_violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-50.0, 50.0);
            b[i] = a[i] + rng.normal() * rng.uniform(0.0, 10.0);
        }
        double sa = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sa += std::abs(a[i] - b[i]);
            ss += (a[i] - b[i]) * (a[i] - b[i]);
        }
        const double want_mae = sa / static_cast<double>(n);
        const double want_rmse = std::sqrt(ss / static_cast<double>(n));
        const double got_mae = mae(a, b);
        const double got_rmse = rmse(a, b);
        worst = std::max({worst, std::abs(got_mae - want_mae) / std::max(1.0, want_mae),
                          std::abs(got_rmse - want_rmse) / std::max(1.0, want_rmse)});
        if (got_rmse < got_mae) ++ordering_violations;

        const auto cum_true = accumulate(std::vector<double>(a.begin(), a.end()), 0.5);
        const auto cum_pred = accumulate(b, 0.5);
        double mean_abs = 0.0;
        for (const double v : cum_true) mean_abs += std::abs(v);
        if (mean_abs / static_cast<double>(n) < 1e-6) continue;
        const auto base = cumulative_percent_errors(cum_true, cum_pred);
        const double k = (rng.bernoulli(0.5) ? 1.0 : -1.0) * std::exp(rng.uniform(-6.0, 6.0));
        std::vector<double> kt(cum_true), kp(cum_pred);
        for (auto& v : kt) v *= k;
        for (auto& v : kp) v *= k;
        const auto scaled = cumulative_percent_errors(kt, kp);
        worst_scale = std::max({worst_scale, std::abs(scaled.mae_pct - base.mae_pct) / std::max(1.0, base.mae_pct),
                                std::abs(scaled.rmse_pct - base.rmse_pct) / std::max(1.0, base.rmse_pct)});
    }
    o.detail << "formula deviation " << worst << ", RMSE<MAE cases " << ordering_violations
             << ", scale deviation " << worst_scale;
    o.expect(worst <= tol::metric_rel, "direct formula");
    o.expect(ordering_violations == 0, "RMSE >= MAE");
    o.expect(worst_scale <= tol::scale_invariance, "scale invariance");
}

std::size_t brute_nearest(const std::vector<double>& ts, double t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (std::abs(ts[i] - t) < std::abs(ts[best] - t)) best = i;
    }
    return best;
}

void criterion_5(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t cells = 0, mismatches = 0;
    const std::map<PowertrainKind, std::map<std::string, double>> rates{
        {PowertrainKind::ice, {{"speed", 2.0}, {"acceleration", 5.0}, {"engine_torque", 10.0}, {"engine_rpm", 4.0},
                               {"fuel_power", 1.0}}},
        {PowertrainKind::ev, {{"speed", 3.0}, {"acceleration", 7.0}, {"motor_torque", 10.0}, {"motor_rpm", 5.0},
                              {"electric_power", 2.0}}},
        {PowertrainKind::hev, {{"speed", 2.0}, {"acceleration", 4.0}, {"engine_torque", 10.0}, {"engine_rpm", 3.0},
                               {"motor_rpm", 6.0}, {"fuel_power", 1.0}, {"electric_power", 7.0}}},
    };
    std::uint64_t seed = 50;
    for (const auto& [kind, channel_rates] : rates) {
        for (int rep = 0; rep < 3; ++rep, ++seed) {
            auto spec = synth::preset_cycle("mixed-route", kind, 300.0, seed);
            spec.rate_hz = 20.0;
            const auto generated = synth::generate_cycle(spec);
            synth::JitterSpec jitter;
            jitter.rates_hz = channel_rates;
            jitter.jitter_fraction = 0.6;
            jitter.seed = seed;
            const auto log = synth::add_multirate_jitter(generated.log, jitter);
            const auto aligned = synchronize(log, {.reference = std::string("speed"), .max_gap = 1e6});
            const auto& ref = log.channel("speed").timestamps;
            if (aligned.timestamps != ref) {
                o.expect(false, "reference clock");
                return;
            }
            const auto value_at = [&](const std::string& name, double t) {
                const auto& ch = log.channel(name);
                return ch.values[brute_nearest(ch.timestamps, t)];
            };
            for (std::size_t r = 0; r < aligned.rows(); ++r) {
                for (std::size_t c = 0; c < aligned.cols(); ++c) {
                    ++cells;
                    if (aligned.feature(r, c) != value_at(aligned.feature_names[c], ref[r])) ++mismatches;
                }
                double target = 0.0;
                for (const auto& name : target_channels(kind)) target += value_at(name, ref[r]);
                ++cells;
                if (aligned.target[r] != target) ++mismatches;
            }
        }
    }

    // Equidistant fixture: source samples at 0.75/1.25/1.75/2.25 around references 1.0 and 2.0.
    DriveLog tie;
    tie.kind = PowertrainKind::ice;
    const auto add = [&](const std::string& name, const std::string& unit, std::vector<double> ts,
                         std::vector<double> vs) { tie.channels[name] = Channel{name, unit, std::move(ts), std::move(vs)}; };
    add("speed", "km/h", {1.0, 2.0}, {10.0, 20.0});
    add("engine_rpm", "rpm", {0.75, 1.25, 1.75, 2.25}, {100.0, 101.0, 102.0, 103.0});
    add("fuel_power", "kW", {1.0, 2.0}, {5.0, 6.0});
    const auto tied = synchronize(tie, {.reference = std::string("speed"), .max_gap = 1.0});
    const std::size_t rpm = tied.column_index("engine_rpm");
    const bool earlier = tied.feature(0, rpm) == 100.0 && tied.feature(1, rpm) == 102.0 &&
                         nearest_index({1e-7, 3e-7}, 2e-7) == 0;
    const double s = seconds_since(t0);
    o.detail << cells << " cells, " << mismatches << " mismatches, ties earlier=" << (earlier ? "yes" : "no") << ", "
             << fixed(s) << " s";
    o.expect(mismatches == 0, "exhaustive nearest");
    o.expect(earlier, "equidistant ties");
    o.expect(s < tol::sync_runtime_s, "runtime");
}

void criterion_6(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto generated = synth::generate_cycle(synth::preset_cycle("mixed-route", PowertrainKind::ice, 1800.0, 7));
    const auto series = synchronize(generated.log);
    const std::vector<std::string> features{"speed", "engine_torque", "engine_rpm"};
    const auto& preset = hpo::find_preset("ice-tcn");
    const auto data = prepare_dataset(series, features, hpo::window_from_point(preset.point, 10), 1, {});
    TrainConfig train = hpo::train_from_point(preset.point, {});
    train.epochs = tol::ice_max_epochs;
    const auto model = fit_model(hpo::config_from_point(preset.model, preset.point, features.size()), data, train, 1);
    const auto ev = evaluate_run(model, data.splits.test, window_spacing(data.splits.test), PowertrainKind::ice);
    const double s = seconds_since(t0);
    o.detail << series.rows() << " rows at " << format_double(1.0 / series.dt) << " Hz, " << model.history.epochs.size()
             << " epochs, cum MAE% " << fixed(ev.report.cumulative.mae_pct, 3) << ", cum RMSE% "
             << fixed(ev.report.cumulative.rmse_pct, 3) << ", " << fixed(s) << " s";
    o.expect(ev.report.cumulative.mae_pct < tol::ice_cum_mae_pct, "cumulative MAE%");
    o.expect(model.history.epochs.size() <= tol::ice_max_epochs, "epoch cap");
    o.expect(s < tol::ice_runtime_s, "runtime");
}

void criterion_7(Outcome& o) {
    const auto generated = synth::generate_cycle(synth::preset_cycle("urban", PowertrainKind::ev, 1800.0, 11));
    const auto series = synchronize(generated.log);
    const std::vector<std::string> features{"speed", "acceleration", "motor_torque", "motor_rpm"};
    const auto data = prepare_dataset(series, features, 10, 1, {});
    TrainConfig train;
    train.lr = 0.01;
    train.epochs = 40;
    const auto model = fit_model(LstmConfig{.input_dim = 4, .hidden = 16, .layers = 1}, data, train, 3);
    const auto& test = data.splits.test;
    const auto pred = invert_target(predict(model, test), data.scaler);
    const double dt = window_spacing(test);

    std::map<double, double> truth;
    for (std::size_t i = 0; i < generated.truth.timestamps.size(); ++i) {
        truth[generated.truth.timestamps[i]] = generated.truth.power_kw[i];
    }
    std::vector<double> oracle(test.size());
    for (std::size_t k = 0; k < test.size(); ++k) oracle[k] = truth.at(test.t_end[k]);

    std::size_t negative = 0, matched = 0;
    for (std::size_t k = 0; k < test.size(); ++k) {
        if (oracle[k] < 0.0) {
            ++negative;
            if (pred[k] < 0.0) ++matched;
        }
    }
    // Braking windows are maximal runs of oracle-negative steps.
    const auto cum = accumulate(pred, dt);
    std::size_t runs = 0, decreasing = 0;
    for (std::size_t k = 0; k < test.size();) {
        if (oracle[k] >= 0.0) {
            ++k;
            continue;
        }
        std::size_t end = k;
        while (end < test.size() && oracle[end] < 0.0) ++end;
        const double before = k == 0 ? 0.0 : cum[k - 1];
        ++runs;
        if (cum[end - 1] < before) ++decreasing;
        k = end;
    }
    const double fraction = negative ? static_cast<double>(matched) / static_cast<double>(negative) : 0.0;
    o.detail << matched << "/" << negative << " oracle-negative steps predicted negative ("
             << fixed(100.0 * fraction, 1) << "%), accumulation falls in " << decreasing << "/" << runs
             << " braking windows";
    o.expect(negative > 0, "test split contains braking");
    o.expect(fraction > tol::regen_negative_fraction, "negative predictions");
    o.expect(runs > 0 && 2 * decreasing > runs, "accumulation decreases during braking");
}

void criterion_8(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto generated = synth::generate_cycle(synth::preset_cycle("mixed-route", PowertrainKind::ice, 600.0, 8));
    const auto series = synchronize(generated.log);
    const std::vector<std::string> features{"speed", "engine_torque", "engine_rpm"};
    const auto data = prepare_dataset(series, features, 8, 1, {});
    const auto train_rows = slice_time_range(data.scaled, data.scaled.timestamps.front(),
                                             data.scaled.timestamps[data.train_rows.end - 1] + 0.5 * series.dt);
    const NoiseModel noise = estimate_feature_noise(train_rows, 100);
    const ModelConfig model = LstmConfig{.input_dim = 3, .hidden = 4, .layers = 1, .dropout = 0.2};
    TrainConfig train;
    train.epochs = 2;
    train.batch = 32;

    EnsembleConfig off;
    off.runs = 30;
    off.inference_dropout.reset();
    off.base_seed = 5;
    const auto collapsed = monte_carlo_ensemble(model, data, train, noise, off);
    const bool all_zero = std::all_of(collapsed.std_kw.begin(), collapsed.std_kw.end(), [](double v) { return v == 0.0; }) &&
                          std::all_of(collapsed.cum_std.begin(), collapsed.cum_std.end(), [](double v) { return v == 0.0; });

    EnsembleConfig on = off;
    on.inference_dropout = 0.2;
    on.inject_train_noise = true;
    on.inject_test_noise = true;
    on.reinitialize_weights = true;
    const auto spread = monte_carlo_ensemble(model, data, train, noise, on);
    const auto positive = static_cast<std::size_t>(
        std::count_if(spread.std_kw.begin(), spread.std_kw.end(), [](double v) { return v > 0.0; }));
    const double fraction = static_cast<double>(positive) / static_cast<double>(spread.std_kw.size());

    double worst = 0.0;
    const auto check = [&](const std::vector<double>& v, const MeanStd& got) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (const double x : v) ss += (x - m) * (x - m);
        worst = std::max({worst, std::abs(got.mean - m), std::abs(got.std - std::sqrt(ss / static_cast<double>(v.size())))});
    };
    std::vector<double> maes, rmses, cmae, crmse;
    const double dt = window_spacing(data.splits.test);
    for (const auto& pred : spread.run_predictions_kw) {
        maes.push_back(mae(spread.actual_kw, pred));
        rmses.push_back(rmse(spread.actual_kw, pred));
        const auto e = cumulative_percent_errors(spread.cum_actual, accumulate(pred, dt));
        cmae.push_back(e.mae_pct);
        crmse.push_back(e.rmse_pct);
    }
    check(maes, spread.summary.mae_kw);
    check(rmses, spread.summary.rmse_kw);
    check(cmae, spread.summary.cum_mae_pct);
    check(crmse, spread.summary.cum_rmse_pct);
    const double s = seconds_since(t0);
    o.detail << "collapse std==0: " << (all_zero ? "yes" : "no") << ", std>0 on " << positive << "/"
             << spread.std_kw.size() << " points, summary deviation " << worst << ", "
             << ensemble_summary_json(spread).at("instant_table").get<std::string>() << ", " << fixed(s)
             << " s";
    o.expect(all_zero, "collapse");
    o.expect(spread.runs.size() == 30, "30 runs");
    o.expect(fraction >= tol::ensemble_positive_fraction, "spread coverage");
    o.expect(worst <= tol::ensemble_summary, "summary recomputation");
    o.expect(s < tol::ensemble_runtime_s, "runtime");
}

void criterion_9(Outcome& o) {
    const auto ds = random_windows(200, 3, 2, 51);
    const Forest forest = rf_fit(ds, {.n_trees = 17, .max_depth = 6, .seed = 3});
    const auto per_tree = rf_per_tree(forest, ds);
    const auto mean = rf_predict(forest, ds);
    bool exact_mean = per_tree.size() == 17;
    for (std::size_t k = 0; exact_mean && k < ds.size(); ++k) {
        double s = 0.0;
        for (const auto& row : per_tree) s += row[k];
        exact_mean = mean[k] == s / 17.0;
    }
    const auto& imp_mean = rf_feature_importance(forest);
    const double sum_a = std::accumulate(imp_mean.begin(), imp_mean.end(), 0.0);

    const auto memo = random_windows(50, 2, 2, 52);
    const Forest single = rf_fit(memo, {.n_trees = 1, .max_depth = 64, .min_samples_leaf = 1, .bootstrap = false});
    const bool memorized = rf_predict(single, memo) == memo.y;

    auto causal = random_windows(500, 1, 4, 53);
    Rng noise(9);
    for (std::size_t k = 0; k < causal.size(); ++k) causal.y[k] = 3.0 * causal.x[k * 4] + 0.01 * noise.normal();
    const Forest one_factor = rf_fit(causal, {.n_trees = 30, .seed = 5});
    const auto& imp = rf_feature_importance(one_factor);
    const double sum_b = std::accumulate(imp.begin(), imp.end(), 0.0);
    o.detail << "mean exact=" << (exact_mean ? "yes" : "no") << ", memorized=" << (memorized ? "yes" : "no")
             << ", importance sums " << fixed(sum_a, 12) << "/" << fixed(sum_b, 12) << ", causal share "
             << fixed(imp[0], 4);
    o.expect(exact_mean, "per-tree mean");
    o.expect(memorized, "memorization");
    o.expect(std::abs(sum_a - 1.0) <= tol::rf_importance_sum && std::abs(sum_b - 1.0) <= tol::rf_importance_sum,
             "importance sum");
    o.expect(imp[0] > tol::rf_causal_importance, "causal concentration");
}

hpo::Trial scripted(std::size_t id, std::vector<double> curve, hpo::TrialStatus status) {
    hpo::Trial t;
    t.id = id;
    t.status = status;
    for (std::size_t i = 0; i < curve.size(); ++i) t.intermediate.emplace_back(i + 1, curve[i]);
    if (status == hpo::TrialStatus::complete) t.objective = curve.back();
    return t;
}

void criterion_10(Outcome& o) {
    using hpo::TrialStatus;
    const hpo::PrunerConfig cfg{.warmup_trials = 5, .warmup_steps = 3};
    std::vector<hpo::Trial> history;
    for (std::size_t i = 0; i < 6; ++i) {
        const double v = static_cast<double>(i + 1);
        history.push_back(scripted(i, {v, v, v, v}, TrialStatus::complete));
    }
    // Complete values at every step: 1..6, median 3.5.
    o.expect(!hpo::median_prune(3, 3.5, history, cfg), "value equal to the median survives");
    o.expect(hpo::median_prune(3, 3.5000001, history, cfg), "value above the median is pruned");
    o.expect(!hpo::median_prune(2, 100.0, history, cfg), "step warm-up");
    const std::vector<hpo::Trial> few(history.begin(), history.begin() + 4);
    o.expect(!hpo::median_prune(3, 100.0, few, cfg), "trial warm-up");
    auto with_pruned = history;
    with_pruned.push_back(scripted(6, {0.0, 0.0, 0.0}, TrialStatus::pruned));
    with_pruned.push_back(scripted(7, {0.0, 0.0, 0.0}, TrialStatus::pruned));
    o.expect(hpo::median_prune(3, 3.6, with_pruned, cfg), "pruned trials do not move the median");
    o.expect(!hpo::median_prune(5, 100.0, history, cfg), "no completed value at the step");

    hpo::SearchSpace space;
    space.model = ModelKind::tcn;
    space.dimensions["LR"] = {.kind = hpo::Dimension::Kind::log_uniform, .values = {}, .low = 1e-4, .high = 1e-1};
    space.dimensions["HD"] = {.kind = hpo::Dimension::Kind::choice, .values = {8, 16, 32}};
    const auto objective = [](const hpo::Point& p, hpo::TrialContext& ctx) {
        const double final_value = std::pow(std::log10(p.at("LR")) + 2.5, 2) + p.at("HD") / 100.0;
        for (std::size_t step = 1; step <= 12; ++step) {
            const double v = final_value + 1.0 / static_cast<double>(step);
            if (ctx.report(step, v)) return v;
        }
        return final_value;
    };
    hpo::SearchOptions options;
    options.budget = 40;
    options.seed = 9;
    options.pruner = {5, 6};
    const auto result = hpo::search(space, objective, options);
    double min_final = std::numeric_limits<double>::infinity();
    std::size_t complete = 0, pruned = 0;
    for (const auto& t : result.trials) {
        if (t.status == TrialStatus::complete) {
            ++complete;
            min_final = std::min(min_final, *t.objective);
        }
        if (t.status == TrialStatus::pruned) ++pruned;
    }
    o.detail << result.trials.size() << " trials, " << complete << " complete, " << pruned << " pruned, best "
             << fixed(*result.best.objective, 6);
    o.expect(result.best.status == TrialStatus::complete && *result.best.objective == min_final, "exact min");
    o.expect(pruned > 0, "pruning happened");
}

// ---------------------------------------------------------------------------

const fs::path& scratch() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "powertrace_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "cd '" + scratch().string() + "' && env -u POWERTRACE_SEED '" + POWERTRACE_CLI_PATH +
                            "' " + args + " > /dev/null 2>> cli_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Relative path -> FNV-1a hash of every file below `dir`.
std::map<std::string, std::string> hash_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        out[fs::relative(e.path(), dir).string()] = hex64(fnv1a64(read_file(e.path().string())));
    }
    return out;
}

void criterion_11(Outcome& o) {
    const std::string data = "--kind ice --data synth/log.csv";
    const std::string feats = " --features speed,engine_torque,engine_rpm";
    // Each command runs twice into out_a / out_b; the synth output feeds the later commands.
    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "synth --kind ice --preset mixed-route --duration 300 --seed 7 --rates engine_torque=5 --jitter 0.2"},
        {"ingest", "ingest " + data},
        {"sync", "sync " + data},
        {"window", "window " + data + feats + " --window 6"},
        {"train", "train " + data + feats + " --model tcn --channels 8 --dilations 1,2 --kernel 3 --epochs 3 --seed 2"},
        {"evaluate", "evaluate " + data + feats + " --model-dir train/model"},
        {"matrix", "matrix " + data + " --models lstm,rf --hidden 4 --layers 1 --epochs 1 --n-trees 3 --max-depth 4"
                   " --workers 2 --seed 3"},
        {"uncertainty", "uncertainty " + data + feats + " --model lstm --hidden 4 --layers 1 --epochs 1 --runs 3"
                        " --noise-segment 50 --reinitialize-weights --inject-train-noise --inject-test-noise"
                        " --workers 2 --seed 4"},
        {"hpo", "hpo " + data + feats + " --model tcn --budget 3 --trial-epochs 2 --workers 2 --seed 5"},
        {"report", "report --run-dir evaluate"},
    };
    std::size_t artifacts = 0;
    for (const auto& [name, args] : commands) {
        const int a = run_cli(args + " --out " + name + "_a");
        const int b = run_cli(args + " --out " + name + "_b");
        if (a != 0 || b != 0) {
            o.expect(false, name + " exit codes " + std::to_string(a) + "/" + std::to_string(b));
            continue;
        }
        const auto ha = hash_tree(scratch() / (name + "_a"));
        const auto hb = hash_tree(scratch() / (name + "_b"));
        artifacts += ha.size();
        o.expect(!ha.empty() && ha == hb, name + " artifacts differ");
        // Later commands read from the unsuffixed directory.
        fs::remove_all(scratch() / name);
        fs::copy(scratch() / (name + "_a"), scratch() / name, fs::copy_options::recursive);
    }
    o.detail << commands.size() << " commands, " << artifacts << " artifacts hashed per run";
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"parameter-count anchors", criterion_1},
        {"gradient suite", criterion_2},
        {"integrator oracle", criterion_3},
        {"metric oracles", criterion_4},
        {"synchronization oracle", criterion_5},
        {"ICE TCN end-to-end", criterion_6},
        {"EV regeneration", criterion_7},
        {"uncertainty collapse and expansion", criterion_8},
        {"random forest exactness", criterion_9},
        {"pruner suite", criterion_10},
        {"determinism", criterion_11},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
