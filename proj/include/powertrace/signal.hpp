#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace powertrace {

enum class PowertrainKind { ice, ev, hev };

std::string_view to_string(PowertrainKind kind);
// Accepts "ice", "ev", "hev" in any case.
PowertrainKind parse_powertrain(std::string_view text);

// Canonical channel names.
namespace channels {
inline constexpr std::string_view speed = "speed";
inline constexpr std::string_view acceleration = "acceleration";
inline constexpr std::string_view engine_torque = "engine_torque";
inline constexpr std::string_view engine_rpm = "engine_rpm";
inline constexpr std::string_view motor_torque = "motor_torque";
inline constexpr std::string_view motor_rpm = "motor_rpm";
inline constexpr std::string_view soc = "soc";
inline constexpr std::string_view battery_voltage = "battery_voltage";
inline constexpr std::string_view battery_current = "battery_current";
inline constexpr std::string_view fuel_power = "fuel_power";
inline constexpr std::string_view electric_power = "electric_power";
}  // namespace channels

enum class ChannelRole { input, battery, target };

struct ChannelSpec {
    std::string_view name;
    std::string_view unit;
    ChannelRole role;
    // Must be present in a log of this powertrain.
    bool required;
};

// Admissible channels per powertrain, in canonical feature order.
const std::vector<ChannelSpec>& channel_table(PowertrainKind kind);
std::optional<ChannelSpec> find_channel_spec(PowertrainKind kind, std::string_view name);
std::vector<std::string> input_channels(PowertrainKind kind);
std::vector<std::string> target_channels(PowertrainKind kind);
bool is_admissible_feature(PowertrainKind kind, std::string_view name);

// Rounds a time in seconds to the 1e-7 s grid the telemetry clock uses.
double quantize_time(double seconds);
inline constexpr double kTimeResolution = 1e-7;
inline constexpr double kTicksPerSecond = 1e7;

struct Channel {
    std::string name;
    std::string unit;
    std::vector<double> timestamps;
    std::vector<double> values;

    std::size_t size() const { return timestamps.size(); }
    bool empty() const { return timestamps.empty(); }
};

struct DriveLog {
    PowertrainKind kind = PowertrainKind::ice;
    std::map<std::string, Channel> channels;
    // Channels not admissible for the powertrain; carried along, never validated or aligned.
    std::map<std::string, Channel> extra;
    std::map<std::string, std::string> meta;

    const Channel& channel(const std::string& name) const;
    bool has(const std::string& name) const { return channels.count(name) != 0; }
};

struct Violation {
    std::string channel;
    std::string rule;

    bool operator==(const Violation&) const = default;
};

// Empty iff the log satisfies every invariant.
std::vector<Violation> validate_log(const DriveLog& log);

struct AlignedSeries {
    std::vector<double> timestamps;
    double dt = 0.0;
    std::vector<std::string> feature_names;
    // Row-major T x C.
    std::vector<double> features;
    std::vector<double> target;

    std::size_t rows() const { return timestamps.size(); }
    std::size_t cols() const { return feature_names.size(); }
    double feature(std::size_t row, std::size_t col) const { return features[row * cols() + col]; }
    std::size_t column_index(std::string_view name) const;

    // Keeps only the named columns, in the given order.
    AlignedSeries select_features(const std::vector<std::string>& names) const;
};

std::vector<Violation> validate_series(const AlignedSeries& series);

// Median gap between consecutive timestamps; 0 for fewer than two samples.
double median_period(const std::vector<double>& timestamps);

// Rows with t0 <= t < t1. Throws DataError when nothing survives.
AlignedSeries slice_time_range(const AlignedSeries& series, double t0, double t1);

}  // namespace powertrace
