#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "powertrace/signal.hpp"

namespace powertrace {

// Long-format raw log: header `timestamp_s,channel,value,unit`.
inline constexpr std::string_view kRawLogHeader = "timestamp_s,channel,value,unit";

DriveLog parse_log(std::string_view csv, PowertrainKind kind, std::vector<std::string>* warnings = nullptr);
// Rows ordered by timestamp, then channel name; extras included.
std::string write_log_csv(const DriveLog& log);

// Normalized first-difference energy mean((x[i+1]-x[i])^2) / var(x); 0 for constant channels.
double roughness_score(const std::vector<double>& values);

// The least noisy input channel; ties go to the lexicographically smaller name.
std::string select_reference(const DriveLog& log);

struct SyncConfig {
    // Empty means AUTO.
    std::optional<std::string> reference;
    // Defaults to twice the reference median period.
    std::optional<double> max_gap;
};

// Index of the sample nearest to t; equidistant ties resolve to the earlier sample.
std::size_t nearest_index(const std::vector<double>& timestamps, double t);

AlignedSeries synchronize(const DriveLog& log, const SyncConfig& cfg = {});

// Wide format: `timestamp_s,<feature...>,target_kw`.
std::string write_aligned_csv(const AlignedSeries& series);
AlignedSeries parse_aligned_csv(std::string_view csv);

}  // namespace powertrace
