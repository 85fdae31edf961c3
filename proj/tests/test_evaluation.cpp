#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "powertrace/errors.hpp"
#include "powertrace/evaluation.hpp"
#include "powertrace/rng.hpp"

using namespace powertrace;

namespace {

std::vector<double> random_series(std::size_t n, Rng& rng, double lo = -50.0, double hi = 80.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

WindowedDataset test_windows(const std::vector<double>& y_scaled) {
    WindowedDataset ds;
    ds.window = 1;
    ds.channels = 1;
    ds.dt = 0.5;
    ds.feature_names = {"speed"};
    ds.y = y_scaled;
    ds.x = y_scaled;
    for (std::size_t i = 0; i < y_scaled.size(); ++i) ds.t_end.push_back(0.5 * static_cast<double>(i));
    return ds;
}

std::vector<std::string> split_features(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t pos; (pos = s.find('+', start)) != std::string::npos; start = pos + 1) out.push_back(s.substr(start, pos - start));
    out.push_back(s.substr(start));
    return out;
}

ScalerParams kw_scaler(double lo, double hi) { return {{"speed", "target_kw"}, {0.0, lo}, {1.0, hi}}; }

}  // namespace

TEST_CASE("mae and rmse") {
    CHECK(mae({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(mae({1, 2, 3}, {2, 2, 5}) == doctest::Approx(1.0));
    CHECK(rmse({1, 2, 3}, {2, 2, 5}) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK_THROWS_AS(mae({1, 2}, {1}), ShapeError);
    CHECK_THROWS_AS(rmse({}, {}), DataError);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_series(1 + rng.below(40), rng);
        const auto b = random_series(a.size(), rng);
        CHECK(rmse(a, b) >= mae(a, b));
    }
}

TEST_CASE("accumulate") {
    CHECK(accumulate({2, 2, 2}, 0.5) == std::vector<double>{1, 2, 3});
    CHECK(accumulate({0, 0, 0}, 0.7) == std::vector<double>{0, 0, 0});
    CHECK(accumulate({5, -5}, 1.0) == std::vector<double>{5, 0});
    CHECK(accumulate({}, 1.0).empty());
    CHECK_THROWS_AS(accumulate({1}, 0.0), ConfigError);
    Rng rng(2);
    const auto a = random_series(300, rng);
    const auto b = random_series(300, rng);
    std::vector<double> sum(300);
    for (std::size_t i = 0; i < 300; ++i) sum[i] = a[i] + b[i];
    const auto ca = accumulate(a, 0.5), cb = accumulate(b, 0.5), cs = accumulate(sum, 0.5);
    for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(cs[i] - (ca[i] + cb[i])) < 1e-9);
    CHECK(accumulate_irregular({2, 2, 2}, {0.0, 1.0, 1.5}, 1.0) == std::vector<double>{2, 4, 5});
    CHECK_THROWS_AS(accumulate_irregular({1, 1}, {0.0, 0.0}, 1.0), DataError);
}

TEST_CASE("cumulative percent errors") {
    const std::vector<double> t{1, 2, 3, 4};
    CHECK(cumulative_percent_errors(t, t).mae_pct == 0.0);
    std::vector<double> scaled(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) scaled[i] = 1.01 * t[i];
    const auto e = cumulative_percent_errors(t, scaled);
    CHECK(e.mae_pct == doctest::Approx(1.0));
    // RMSE normalizes to 1% scaled by rms(|t|) / mean(|t|) = sqrt(7.5) / 2.5.
    CHECK(e.rmse_pct == doctest::Approx(std::sqrt(7.5) / 2.5));
    const auto flat = cumulative_percent_errors({4, 4, 4}, {4.04, 4.04, 4.04});
    CHECK(flat.mae_pct == doctest::Approx(1.0));
    CHECK(flat.rmse_pct == doctest::Approx(1.0));
    const auto regen = cumulative_percent_errors({3, 1, -1, -2}, {2.5, 1.2, -0.5, -2.5});
    CHECK(std::isfinite(regen.mae_pct));
    CHECK(std::isfinite(regen.rmse_pct));
    CHECK_THROWS_AS(cumulative_percent_errors({0, 0}, {1, 1}), NumericError);
    Rng rng(3);
    const auto a = random_series(50, rng);
    const auto b = random_series(50, rng);
    std::vector<double> a2(a), b2(b);
    for (auto& v : a2) v *= 37.5;
    for (auto& v : b2) v *= 37.5;
    const auto e1 = cumulative_percent_errors(a, b);
    const auto e2 = cumulative_percent_errors(a2, b2);
    CHECK(std::abs(e1.mae_pct - e2.mae_pct) < 1e-9);
    CHECK(std::abs(e1.rmse_pct - e2.rmse_pct) < 1e-9);
}

TEST_CASE("evaluate_predictions") {
    Rng rng(4);
    std::vector<double> y(40);
    for (auto& v : y) v = rng.uniform(0.1, 0.9);
    const auto ds = test_windows(y);
    const auto scaler = kw_scaler(-20.0, 60.0);
    SUBCASE("perfect predictor") {
        const auto ev = evaluate_predictions(y, ds, scaler, 0.5);
        CHECK(ev.report.instant_kw.mae == 0.0);
        CHECK(ev.report.instant_kw.rmse == 0.0);
        CHECK(ev.report.instant_scaled.mae == 0.0);
        CHECK(ev.report.cumulative.mae_pct == 0.0);
        CHECK(ev.report.cumulative.rmse_pct == 0.0);
        CHECK(ev.report.final_value_error_pct == 0.0);
    }
    SUBCASE("constant-mean predictor gives the mean absolute deviation") {
        double mean = 0;
        for (const double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        const auto ev = evaluate_predictions(std::vector<double>(y.size(), mean), ds, scaler, 0.5);
        double mad_kw = 0;
        for (const double v : y) mad_kw += std::abs(v - mean) * 80.0;
        mad_kw /= static_cast<double>(y.size());
        CHECK(ev.report.instant_kw.mae == doctest::Approx(mad_kw).epsilon(1e-12));
        CHECK(ev.series.actual.p_cumulative.back() ==
              doctest::Approx(accumulate(invert_target(y, scaler), 0.5).back()));
    }
}

TEST_CASE("report json round-trips") {
    Report r;
    r.vehicle = "ev";
    r.feature_set = {"speed", "motor_rpm"};
    r.model = "lstm";
    r.seed = 12345678901234ULL;
    r.test_windows = 17;
    r.dt = 0.5;
    r.instant_scaled = {0.1 / 3.0, 0.2 / 7.0};
    r.instant_kw = {1.0 / 3.0, 2.0 / 3.0};
    r.cumulative = {1e-17, 123.456789012345};
    r.final_value_error_pct = 2.5;
    r.parameters = 21409;
    r.flops = 1u << 20;
    r.epochs_run = 60;
    r.best_val_mse = 1.0 / 9.0;
    r.final_val_mse = 0.2;
    CHECK(Report::from_json(nlohmann::json::parse(r.to_json().dump())) == r);
    r.runtime_s = 3.25;
    CHECK(Report::from_json(nlohmann::json::parse(r.to_json().dump())) == r);
    CHECK_THROWS_AS(Report::from_json(nlohmann::json::object()), DataError);
}

TEST_CASE("aggregate csv layout") {
    std::vector<Report> reports;
    for (const auto* fs : {"speed", "speed+rpm"}) {
        for (const auto* m : {"lstm", "tcn"}) {
            Report r;
            r.vehicle = "ice";
            r.feature_set = split_features(fs);
            r.model = m;
            reports.push_back(r);
        }
    }
    const std::string table = results_table_csv(reports);
    CHECK(table.substr(0, table.find('\n')) ==
          "feature_set,lstm_mae_kw,lstm_rmse_kw,lstm_cum_mae_pct,lstm_cum_rmse_pct,tcn_mae_kw,tcn_rmse_kw,"
          "tcn_cum_mae_pct,tcn_cum_rmse_pct");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    const std::string longcsv = results_long_csv(reports);
    CHECK(std::count(longcsv.begin(), longcsv.end(), '\n') == 5);
}

TEST_CASE("svg plot embeds its data") {
    PlotSpec spec;
    spec.title = "power <kW>";
    spec.x = {0, 1, 2};
    spec.lines = {{"actual", {1, -2, 3}, "#000"}, {"predicted", {1.5, -1, 2}, "#c00"}};
    spec.bands = {{"band", {0, -3, 2}, {2, -1, 4}, "#c00"}};
    const std::string svg = render_svg(spec);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("x,band_lower,band_upper,actual,predicted\n0,0,2,1,1.5\n") != std::string::npos);
    CHECK(svg.find("power &lt;kW&gt;") != std::string::npos);
    CHECK(svg.find("<polygon") != std::string::npos);
    CHECK(render_svg(spec) == svg);
    spec.lines[0].values.pop_back();
    CHECK_THROWS_AS(render_svg(spec), ShapeError);
}
