#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "powertrace/signal.hpp"

namespace powertrace {

inline constexpr std::string_view kTargetColumn = "target_kw";

// Column-wise min-max scaling. The last column is always the target.
struct ScalerParams {
    std::vector<std::string> columns;
    std::vector<double> min;
    std::vector<double> max;

    std::size_t target_index() const { return columns.size() - 1; }
    std::vector<std::string> feature_names() const { return {columns.begin(), columns.end() - 1}; }

    // Constant columns map to 0 and cannot be inverted beyond returning min.
    double apply(std::size_t col, double x) const;
    double invert(std::size_t col, double scaled) const;

    nlohmann::json to_json() const;
    static ScalerParams from_json(const nlohmann::json& j);

    bool operator==(const ScalerParams&) const = default;
};

struct RowRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

ScalerParams fit_minmax(const AlignedSeries& series, RowRange train_rows);

// Scales a row-major matrix whose columns are named by `columns`.
std::vector<double> apply_minmax(const std::vector<double>& x, const std::vector<std::string>& columns,
                                 const ScalerParams& params);
std::vector<double> invert_minmax(const std::vector<double>& x, const std::vector<std::string>& columns,
                                  const ScalerParams& params);
// Scales features and target; feature names must match the scaler's.
AlignedSeries apply_minmax(const AlignedSeries& series, const ScalerParams& params);

std::vector<double> invert_target(const std::vector<double>& scaled, const ScalerParams& params);

struct WindowedDataset {
    std::size_t window = 0;
    std::size_t channels = 0;
    std::size_t stride = 1;
    double dt = 0.0;
    std::vector<std::string> feature_names;
    // N x W x C, row-major.
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> t_end;

    std::size_t size() const { return y.size(); }
    const double* window_data(std::size_t k) const { return x.data() + k * window * channels; }

    WindowedDataset subset(std::size_t begin, std::size_t end) const;
};

WindowedDataset make_windows(const AlignedSeries& series, std::size_t window, std::size_t stride);

struct SplitSpec {
    double train = 0.70;
    double val = 0.10;
    double test = 0.20;

    void validate() const;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct Splits {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
};

Splits chrono_split(const WindowedDataset& ds, const SplitSpec& spec);

// Windows the raw series, fits the scaler on the rows the training windows cover,
// then rescales and splits. Feature columns are taken in the order given.
struct PreparedData {
    ScalerParams scaler;
    AlignedSeries scaled;
    Splits splits;
    RowRange train_rows;
};

PreparedData prepare_dataset(const AlignedSeries& series, const std::vector<std::string>& features,
                             std::size_t window, std::size_t stride, const SplitSpec& split);

// X: `window,step,<feature...>`; y: `window,t_end_s,target`.
std::pair<std::string, std::string> write_windowed_csv(const WindowedDataset& ds);
WindowedDataset parse_windowed_csv(std::string_view x_csv, std::string_view y_csv, double dt, std::size_t stride);

}  // namespace powertrace
