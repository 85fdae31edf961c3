#include "powertrace/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw ShapeError("metric inputs differ in length (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    if (a.empty()) throw DataError("metric inputs are empty");
}

}  // namespace

double mae(const std::vector<double>& actual, const std::vector<double>& predicted) {
    check_pair(actual, predicted);
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(actual[i] - predicted[i]);
    return s / static_cast<double>(actual.size());
}

double rmse(const std::vector<double>& actual, const std::vector<double>& predicted) {
    check_pair(actual, predicted);
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    return std::sqrt(s / static_cast<double>(actual.size()));
}

std::vector<double> accumulate(const std::vector<double>& p_instant, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("accumulation step dt must be positive");
    std::vector<double> out(p_instant.size());
    double running = 0.0;
    for (std::size_t i = 0; i < p_instant.size(); ++i) {
        running += p_instant[i] * dt;
        out[i] = running;
    }
    return out;
}

std::vector<double> accumulate_irregular(const std::vector<double>& p_instant, const std::vector<double>& t,
                                         double first_dt) {
    if (t.size() != p_instant.size()) throw ShapeError("timestamps and power differ in length");
    if (!(first_dt > 0.0)) throw ConfigError("accumulation step dt must be positive");
    std::vector<double> out(p_instant.size());
    double running = 0.0;
    for (std::size_t i = 0; i < p_instant.size(); ++i) {
        const double step = i == 0 ? first_dt : t[i] - t[i - 1];
        if (!(step > 0.0)) throw DataError("timestamps must be strictly increasing");
        running += p_instant[i] * step;
        out[i] = running;
    }
    return out;
}

PercentErrors cumulative_percent_errors(const std::vector<double>& cum_true, const std::vector<double>& cum_pred) {
    check_pair(cum_true, cum_pred);
    double norm = 0.0;
    for (const double v : cum_true) norm += std::abs(v);
    norm /= static_cast<double>(cum_true.size());
    if (norm < 1e-9) throw NumericError("cumulative percent error is undefined: mean |cumulative| is ~0");
    return {100.0 * mae(cum_true, cum_pred) / norm, 100.0 * rmse(cum_true, cum_pred) / norm};
}

PowerSeries make_power_series(std::vector<double> t, std::vector<double> p_instant, double dt) {
    PowerSeries s;
    s.p_cumulative = accumulate(p_instant, dt);
    s.t = std::move(t);
    s.p_instant = std::move(p_instant);
    s.dt = dt;
    return s;
}

nlohmann::json Report::to_json() const {
    nlohmann::json j = {
        {"vehicle", vehicle},
        {"feature_set", feature_set},
        {"model", model},
        {"seed", seed},
        {"test_windows", test_windows},
        {"dt_s", dt},
        {"instant_scaled", {{"mae", instant_scaled.mae}, {"rmse", instant_scaled.rmse}}},
        {"instant_kw", {{"mae", instant_kw.mae}, {"rmse", instant_kw.rmse}}},
        {"cumulative", {{"mae_pct", cumulative.mae_pct}, {"rmse_pct", cumulative.rmse_pct}}},
        {"final_value_error_pct", final_value_error_pct},
        {"parameters", parameters},
        {"flops", flops},
        {"epochs_run", epochs_run},
        {"best_val_mse", best_val_mse},
        {"final_val_mse", final_val_mse},
    };
    j["runtime_s"] = runtime_s ? nlohmann::json(*runtime_s) : nlohmann::json(nullptr);
    return j;
}

Report Report::from_json(const nlohmann::json& j) {
    try {
        Report r;
        r.vehicle = j.at("vehicle").get<std::string>();
        r.feature_set = j.at("feature_set").get<std::vector<std::string>>();
        r.model = j.at("model").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.test_windows = j.at("test_windows").get<std::size_t>();
        r.dt = j.at("dt_s").get<double>();
        r.instant_scaled = {j.at("instant_scaled").at("mae").get<double>(),
                            j.at("instant_scaled").at("rmse").get<double>()};
        r.instant_kw = {j.at("instant_kw").at("mae").get<double>(), j.at("instant_kw").at("rmse").get<double>()};
        r.cumulative = {j.at("cumulative").at("mae_pct").get<double>(),
                        j.at("cumulative").at("rmse_pct").get<double>()};
        r.final_value_error_pct = j.at("final_value_error_pct").get<double>();
        r.parameters = j.at("parameters").get<std::size_t>();
        r.flops = j.at("flops").get<std::uint64_t>();
        r.epochs_run = j.at("epochs_run").get<std::size_t>();
        r.best_val_mse = j.at("best_val_mse").get<double>();
        r.final_val_mse = j.at("final_val_mse").get<double>();
        if (j.contains("runtime_s") && !j.at("runtime_s").is_null()) r.runtime_s = j.at("runtime_s").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
}

Evaluation evaluate_predictions(const std::vector<double>& predicted_scaled, const WindowedDataset& test,
                                const ScalerParams& scaler, double dt) {
    check_pair(test.y, predicted_scaled);
    Evaluation ev;
    Report& r = ev.report;
    r.feature_set = test.feature_names;
    r.test_windows = test.size();
    r.dt = dt;
    r.instant_scaled = {mae(test.y, predicted_scaled), rmse(test.y, predicted_scaled)};
    ev.series.t_end = test.t_end;
    ev.series.actual = make_power_series(test.t_end, invert_target(test.y, scaler), dt);
    ev.series.predicted = make_power_series(test.t_end, invert_target(predicted_scaled, scaler), dt);
    const auto& a = ev.series.actual;
    const auto& p = ev.series.predicted;
    r.instant_kw = {mae(a.p_instant, p.p_instant), rmse(a.p_instant, p.p_instant)};
    r.cumulative = cumulative_percent_errors(a.p_cumulative, p.p_cumulative);
    const double final_true = a.p_cumulative.back();
    r.final_value_error_pct =
        final_true == 0.0 ? 0.0 : 100.0 * std::abs(p.p_cumulative.back() - final_true) / std::abs(final_true);
    const auto finite = [](double v) { return std::isfinite(v); };
    for (const double v : {r.instant_scaled.mae, r.instant_scaled.rmse, r.instant_kw.mae, r.instant_kw.rmse,
                           r.cumulative.mae_pct, r.cumulative.rmse_pct, r.final_value_error_pct}) {
        if (!finite(v)) throw NumericError("evaluation produced a non-finite metric");
    }
    return ev;
}

Evaluation evaluate_run(const TrainedModel& model, const WindowedDataset& test, double dt, PowertrainKind kind) {
    Evaluation ev = evaluate_predictions(predict(model, test), test, model.scaler, dt);
    Report& r = ev.report;
    r.vehicle = std::string(to_string(kind));
    r.model = std::string(to_string(model.kind()));
    r.seed = model.seed;
    r.parameters = count_parameters(model);
    r.flops = estimate_flops(model);
    r.epochs_run = model.history.epochs.size();
    if (!model.history.epochs.empty()) {
        r.best_val_mse = model.history.best_val;
        r.final_val_mse = model.history.epochs.back().val;
    }
    return ev;
}

std::string series_csv(const EvaluationSeries& s) {
    std::string out = "t_end_s,actual_kw,predicted_kw,cum_actual_kws,cum_predicted_kws\n";
    for (std::size_t i = 0; i < s.t_end.size(); ++i) {
        out += format_time(s.t_end[i]) + ',' + format_double(s.actual.p_instant[i]) + ',' +
               format_double(s.predicted.p_instant[i]) + ',' + format_double(s.actual.p_cumulative[i]) + ',' +
               format_double(s.predicted.p_cumulative[i]) + '\n';
    }
    return out;
}

namespace {

std::string feature_label(const std::vector<std::string>& features) { return join(features, "+"); }

}  // namespace

std::string results_long_csv(const std::vector<Report>& reports) {
    std::string out =
        "vehicle,feature_set,model,seed,mae_kw,rmse_kw,mae_scaled,rmse_scaled,cum_mae_pct,cum_rmse_pct,"
        "final_value_error_pct,parameters,flops\n";
    for (const auto& r : reports) {
        out += r.vehicle + ',' + feature_label(r.feature_set) + ',' + r.model + ',' + std::to_string(r.seed) + ',' +
               format_double(r.instant_kw.mae) + ',' + format_double(r.instant_kw.rmse) + ',' +
               format_double(r.instant_scaled.mae) + ',' + format_double(r.instant_scaled.rmse) + ',' +
               format_double(r.cumulative.mae_pct) + ',' + format_double(r.cumulative.rmse_pct) + ',' +
               format_double(r.final_value_error_pct) + ',' + std::to_string(r.parameters) + ',' +
               std::to_string(r.flops) + '\n';
    }
    return out;
}

std::string results_table_csv(const std::vector<Report>& reports) {
    std::vector<std::string> rows;
    std::vector<std::string> models;
    std::map<std::pair<std::string, std::string>, const Report*> cells;
    for (const auto& r : reports) {
        const std::string fs = feature_label(r.feature_set);
        if (std::find(rows.begin(), rows.end(), fs) == rows.end()) rows.push_back(fs);
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
        cells[{fs, r.model}] = &r;
    }
    static const char* metrics[] = {"mae_kw", "rmse_kw", "cum_mae_pct", "cum_rmse_pct"};
    std::string out = "feature_set";
    for (const auto& m : models) {
        for (const char* metric : metrics) out += "," + m + "_" + metric;
    }
    out += '\n';
    for (const auto& fs : rows) {
        out += fs;
        for (const auto& m : models) {
            const auto it = cells.find({fs, m});
            if (it == cells.end()) {
                out += ",,,,";
                continue;
            }
            const Report& r = *it->second;
            for (const double v : {r.instant_kw.mae, r.instant_kw.rmse, r.cumulative.mae_pct, r.cumulative.rmse_pct}) {
                out += ',' + format_double(v);
            }
        }
        out += '\n';
    }
    return out;
}

namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

std::string comment_safe(std::string s) {
    for (std::size_t pos = s.find("--"); pos != std::string::npos; pos = s.find("--", pos)) s.replace(pos, 2, "- -");
    return s;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    const std::size_t n = spec.x.size();
    for (const auto& l : spec.lines) {
        if (l.values.size() != n) throw ShapeError("plot line '" + l.name + "' length differs from x");
    }
    for (const auto& b : spec.bands) {
        if (b.lower.size() != n || b.upper.size() != n) throw ShapeError("plot band '" + b.name + "' length differs");
    }
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const double v : spec.x) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
    }
    const auto widen = [&](const std::vector<double>& vs) {
        for (const double v : vs) {
            if (!std::isfinite(v)) continue;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    };
    for (const auto& l : spec.lines) widen(l.values);
    for (const auto& b : spec.bands) {
        widen(b.lower);
        widen(b.upper);
    }
    if (n == 0 || !std::isfinite(ymin)) {
        xmin = ymin = 0.0;
        xmax = ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    const double left = 70, right = 20, top = 36, bottom = 48;
    const double pw = spec.width - left - right;
    const double ph = spec.height - top - bottom;
    const auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double v) { return top + (ymax - v) / (ymax - ymin) * ph; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
                      "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
                      std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
    svg += "<!-- data\nx";
    for (const auto& b : spec.bands) svg += "," + comment_safe(b.name) + "_lower," + comment_safe(b.name) + "_upper";
    for (const auto& l : spec.lines) svg += "," + comment_safe(l.name);
    svg += '\n';
    for (std::size_t i = 0; i < n; ++i) {
        std::string row = format_double(spec.x[i]);
        for (const auto& b : spec.bands) row += "," + format_double(b.lower[i]) + "," + format_double(b.upper[i]);
        for (const auto& l : spec.lines) row += "," + format_double(l.values[i]);
        svg += comment_safe(row) + '\n';
    }
    svg += "-->\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fixed(left) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">" +
           escape_xml(spec.title) + "</text>\n";
    svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) + "\" height=\"" +
           fixed(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        svg += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(top + ph + 16) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" + tick_label(xv) +
               "</text>\n";
        svg += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(py(yv)) + "\" x2=\"" + fixed(left + pw) +
               "\" y2=\"" + fixed(py(yv)) + "\" stroke=\"#ddd\"/>\n";
        svg += "<text x=\"" + fixed(left - 6) + "\" y=\"" + fixed(py(yv) + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + tick_label(yv) + "</text>\n";
    }
    svg += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(spec.height - 8.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" + escape_xml(spec.x_label) +
           "</text>\n";
    svg += "<text x=\"14\" y=\"" + fixed(top + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fixed(top + ph / 2) + ")\">" + escape_xml(spec.y_label) + "</text>\n";
    for (const auto& b : spec.bands) {
        std::string pts;
        for (std::size_t i = 0; i < n; ++i) pts += fixed(px(spec.x[i])) + "," + fixed(py(b.upper[i])) + " ";
        for (std::size_t i = n; i-- > 0;) pts += fixed(px(spec.x[i])) + "," + fixed(py(b.lower[i])) + " ";
        svg += "<polygon points=\"" + pts + "\" fill=\"" + b.color + "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
    }
    for (const auto& l : spec.lines) {
        std::string pts;
        for (std::size_t i = 0; i < n; ++i) pts += fixed(px(spec.x[i])) + "," + fixed(py(l.values[i])) + " ";
        svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + l.color + "\" stroke-width=\"1.2\"/>\n";
    }
    double ly = top + 14;
    for (const auto& l : spec.lines) {
        svg += "<line x1=\"" + fixed(left + pw - 150) + "\" y1=\"" + fixed(ly - 4) + "\" x2=\"" +
               fixed(left + pw - 130) + "\" y2=\"" + fixed(ly - 4) + "\" stroke=\"" + l.color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fixed(left + pw - 124) + "\" y=\"" + fixed(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + escape_xml(l.name) + "</text>\n";
        ly += 16;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace powertrace
