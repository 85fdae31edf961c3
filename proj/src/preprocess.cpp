#include "powertrace/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

double ScalerParams::apply(std::size_t col, double x) const {
    const double range = max[col] - min[col];
    if (range <= 0.0) return 0.0;
    return (x - min[col]) / range;
}

double ScalerParams::invert(std::size_t col, double scaled) const {
    const double range = max[col] - min[col];
    if (range <= 0.0) return min[col];
    return scaled * range + min[col];
}

nlohmann::json ScalerParams::to_json() const {
    return {{"columns", columns}, {"min", min}, {"max", max}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
    ScalerParams p;
    p.columns = j.at("columns").get<std::vector<std::string>>();
    p.min = j.at("min").get<std::vector<double>>();
    p.max = j.at("max").get<std::vector<double>>();
    if (p.columns.empty() || p.min.size() != p.columns.size() || p.max.size() != p.columns.size()) {
        throw DataError("scaler parameters have inconsistent lengths");
    }
    for (std::size_t i = 0; i < p.columns.size(); ++i) {
        if (p.max[i] < p.min[i]) throw DataError("scaler max < min for column " + p.columns[i]);
    }
    return p;
}

ScalerParams fit_minmax(const AlignedSeries& series, RowRange rows) {
    if (rows.begin >= rows.end || rows.end > series.rows()) {
        throw DataError("fit_minmax needs a nonempty training row range inside the series");
    }
    const std::size_t c = series.cols();
    ScalerParams p;
    p.columns = series.feature_names;
    p.columns.emplace_back(kTargetColumn);
    p.min.assign(c + 1, 0.0);
    p.max.assign(c + 1, 0.0);
    for (std::size_t k = 0; k <= c; ++k) {
        const auto value = [&](std::size_t r) { return k < c ? series.feature(r, k) : series.target[r]; };
        double lo = value(rows.begin);
        double hi = lo;
        for (std::size_t r = rows.begin + 1; r < rows.end; ++r) {
            lo = std::min(lo, value(r));
            hi = std::max(hi, value(r));
        }
        p.min[k] = lo;
        p.max[k] = hi;
    }
    return p;
}

namespace {

std::vector<std::size_t> map_columns(const std::vector<std::string>& columns, const ScalerParams& params) {
    std::vector<std::size_t> idx;
    idx.reserve(columns.size());
    for (const auto& name : columns) {
        const auto it = std::find(params.columns.begin(), params.columns.end(), name);
        if (it == params.columns.end()) {
            throw DataError("column '" + name + "' is not covered by the scaler");
        }
        idx.push_back(static_cast<std::size_t>(it - params.columns.begin()));
    }
    return idx;
}

template <typename F>
std::vector<double> map_matrix(const std::vector<double>& x, const std::vector<std::string>& columns,
                               const ScalerParams& params, F f) {
    if (columns.empty() || x.size() % columns.size() != 0) {
        throw ShapeError("matrix size " + std::to_string(x.size()) + " is not a multiple of " +
                         std::to_string(columns.size()) + " columns");
    }
    const auto idx = map_columns(columns, params);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = f(idx[i % columns.size()], x[i]);
    }
    return out;
}

}  // namespace

std::vector<double> apply_minmax(const std::vector<double>& x, const std::vector<std::string>& columns,
                                 const ScalerParams& params) {
    return map_matrix(x, columns, params, [&](std::size_t c, double v) { return params.apply(c, v); });
}

std::vector<double> invert_minmax(const std::vector<double>& x, const std::vector<std::string>& columns,
                                  const ScalerParams& params) {
    return map_matrix(x, columns, params, [&](std::size_t c, double v) { return params.invert(c, v); });
}

AlignedSeries apply_minmax(const AlignedSeries& series, const ScalerParams& params) {
    if (series.feature_names != params.feature_names()) {
        throw DataError("feature columns [" + join(series.feature_names, ",") + "] do not match scaler columns [" +
                        join(params.feature_names(), ",") + "]");
    }
    AlignedSeries out = series;
    out.features = apply_minmax(series.features, series.feature_names, params);
    const std::size_t t = params.target_index();
    for (auto& v : out.target) v = params.apply(t, v);
    return out;
}

std::vector<double> invert_target(const std::vector<double>& scaled, const ScalerParams& params) {
    std::vector<double> out(scaled.size());
    const std::size_t t = params.target_index();
    for (std::size_t i = 0; i < scaled.size(); ++i) out[i] = params.invert(t, scaled[i]);
    return out;
}

WindowedDataset WindowedDataset::subset(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size() || t_end.size() != size() || x.size() != size() * window * channels) {
        throw ShapeError("window subset [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") is invalid for a dataset of " + std::to_string(size()) + " windows");
    }
    WindowedDataset out;
    out.window = window;
    out.channels = channels;
    out.stride = stride;
    out.dt = dt;
    out.feature_names = feature_names;
    const std::size_t block = window * channels;
    out.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * block),
                 x.begin() + static_cast<std::ptrdiff_t>(end * block));
    out.y.assign(y.begin() + static_cast<std::ptrdiff_t>(begin), y.begin() + static_cast<std::ptrdiff_t>(end));
    out.t_end.assign(t_end.begin() + static_cast<std::ptrdiff_t>(begin),
                     t_end.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

WindowedDataset make_windows(const AlignedSeries& series, std::size_t window, std::size_t stride) {
    if (window == 0) throw ConfigError("window length must be at least 1");
    if (stride == 0) throw ConfigError("stride must be at least 1");
    const std::size_t t = series.rows();
    if (window > t) {
        throw DataError("window length " + std::to_string(window) + " exceeds series length " + std::to_string(t));
    }
    const std::size_t n = (t - window) / stride + 1;
    const std::size_t c = series.cols();
    WindowedDataset ds;
    ds.window = window;
    ds.channels = c;
    ds.stride = stride;
    ds.dt = series.dt;
    ds.feature_names = series.feature_names;
    ds.x.reserve(n * window * c);
    ds.y.reserve(n);
    ds.t_end.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t first = k * stride;
        const std::size_t last = first + window - 1;
        ds.x.insert(ds.x.end(), series.features.begin() + static_cast<std::ptrdiff_t>(first * c),
                    series.features.begin() + static_cast<std::ptrdiff_t>((last + 1) * c));
        ds.y.push_back(series.target[last]);
        ds.t_end.push_back(series.timestamps[last]);
    }
    return ds;
}

void SplitSpec::validate() const {
    for (const double f : {train, val, test}) {
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0, 1)");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    // Round half up; the epsilon absorbs representation error in products like 10 * 0.7.
    const auto round_half_up = [](double v) { return static_cast<std::size_t>(std::floor(v + 0.5 + 1e-9)); };
    SplitSizes s;
    s.train = std::min(n, round_half_up(static_cast<double>(n) * spec.train));
    s.val = std::min(n - s.train, round_half_up(static_cast<double>(n) * spec.val));
    s.test = n - s.train - s.val;
    return s;
}

Splits chrono_split(const WindowedDataset& ds, const SplitSpec& spec) {
    const std::size_t n = ds.size();
    if (n < 3) throw DataError("chronological split needs at least 3 windows, got " + std::to_string(n));
    const auto s = split_sizes(n, spec);
    if (s.train == 0 || s.val == 0 || s.test == 0) {
        throw DataError("split of " + std::to_string(n) + " windows leaves an empty part (" + std::to_string(s.train) +
                        "/" + std::to_string(s.val) + "/" + std::to_string(s.test) + ")");
    }
    return {ds.subset(0, s.train), ds.subset(s.train, s.train + s.val), ds.subset(s.train + s.val, n)};
}

PreparedData prepare_dataset(const AlignedSeries& series, const std::vector<std::string>& features,
                             std::size_t window, std::size_t stride, const SplitSpec& split) {
    const AlignedSeries selected = series.select_features(features);
    const WindowedDataset raw = make_windows(selected, window, stride);
    const auto sizes = split_sizes(raw.size(), split);
    if (sizes.train == 0) throw DataError("no training windows");

    PreparedData out;
    out.train_rows = {0, (sizes.train - 1) * stride + window};
    out.scaler = fit_minmax(selected, out.train_rows);
    out.scaled = apply_minmax(selected, out.scaler);
    out.splits = chrono_split(make_windows(out.scaled, window, stride), split);
    return out;
}

std::pair<std::string, std::string> write_windowed_csv(const WindowedDataset& ds) {
    std::string x = "window,step";
    for (const auto& n : ds.feature_names) {
        x += ',';
        x += n;
    }
    x += '\n';
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const double* w = ds.window_data(k);
        for (std::size_t s = 0; s < ds.window; ++s) {
            x += std::to_string(k) + ',' + std::to_string(s);
            for (std::size_t c = 0; c < ds.channels; ++c) {
                x += ',';
                x += format_double(w[s * ds.channels + c]);
            }
            x += '\n';
        }
    }
    std::string y = "window,t_end_s,target\n";
    for (std::size_t k = 0; k < ds.size(); ++k) {
        y += std::to_string(k) + ',' + format_time(ds.t_end[k]) + ',' + format_double(ds.y[k]) + '\n';
    }
    return {x, y};
}

WindowedDataset parse_windowed_csv(std::string_view x_csv, std::string_view y_csv, double dt, std::size_t stride) {
    WindowedDataset ds;
    ds.dt = dt;
    ds.stride = stride;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t max_step = 0;
    bool header = true;
    while (pos < x_csv.size()) {
        auto end = x_csv.find('\n', pos);
        if (end == std::string_view::npos) end = x_csv.size();
        const auto line = trim(x_csv.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (header) {
            if (f.size() < 3 || f[0] != "window" || f[1] != "step") throw ParseError(line_no, "bad X header");
            for (std::size_t i = 2; i < f.size(); ++i) ds.feature_names.emplace_back(trim(f[i]));
            ds.channels = ds.feature_names.size();
            header = false;
            continue;
        }
        if (f.size() != ds.channels + 2) throw ParseError(line_no, "wrong field count");
        max_step = std::max(max_step, static_cast<std::size_t>(parse_double(f[1], line_no)));
        for (std::size_t i = 2; i < f.size(); ++i) ds.x.push_back(parse_double(f[i], line_no));
    }
    ds.window = max_step + 1;
    line_no = 0;
    pos = 0;
    header = true;
    while (pos < y_csv.size()) {
        auto end = y_csv.find('\n', pos);
        if (end == std::string_view::npos) end = y_csv.size();
        const auto line = trim(y_csv.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 3) throw ParseError(line_no, "wrong field count");
        ds.t_end.push_back(parse_double(f[1], line_no));
        ds.y.push_back(parse_double(f[2], line_no));
    }
    if (ds.x.size() != ds.size() * ds.window * ds.channels) {
        throw DataError("X and y files disagree on the number of windows");
    }
    return ds;
}

}  // namespace powertrace
