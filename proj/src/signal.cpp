#include "powertrace/signal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "powertrace/errors.hpp"

namespace powertrace {

namespace {

using channels::acceleration;
using channels::battery_current;
using channels::battery_voltage;
using channels::electric_power;
using channels::engine_rpm;
using channels::engine_torque;
using channels::fuel_power;
using channels::motor_rpm;
using channels::motor_torque;
using channels::soc;
using channels::speed;

// The unit column for SoC follows the source table, which lists volts.
const std::vector<ChannelSpec> kIceTable = {
    {speed, "km/h", ChannelRole::input, false},
    {acceleration, "m/s^2", ChannelRole::input, false},
    {engine_torque, "N.m", ChannelRole::input, false},
    {engine_rpm, "RPM", ChannelRole::input, true},
    {fuel_power, "kW", ChannelRole::target, true},
};

const std::vector<ChannelSpec> kEvTable = {
    {speed, "km/h", ChannelRole::input, false},
    {acceleration, "m/s^2", ChannelRole::input, false},
    {motor_torque, "N.m", ChannelRole::input, false},
    {motor_rpm, "RPM", ChannelRole::input, true},
    {soc, "V", ChannelRole::battery, false},
    {battery_voltage, "V", ChannelRole::battery, false},
    {battery_current, "A", ChannelRole::battery, false},
    {electric_power, "kW", ChannelRole::target, true},
};

const std::vector<ChannelSpec> kHevTable = {
    {speed, "km/h", ChannelRole::input, false},
    {acceleration, "m/s^2", ChannelRole::input, false},
    {engine_torque, "N.m", ChannelRole::input, false},
    {engine_rpm, "RPM", ChannelRole::input, true},
    {motor_rpm, "RPM", ChannelRole::input, true},
    {soc, "V", ChannelRole::battery, false},
    {battery_voltage, "V", ChannelRole::battery, false},
    {battery_current, "A", ChannelRole::battery, false},
    {fuel_power, "kW", ChannelRole::target, true},
    {electric_power, "kW", ChannelRole::target, true},
};

std::vector<std::string> names_with_role(PowertrainKind kind, ChannelRole role) {
    std::vector<std::string> out;
    for (const auto& spec : channel_table(kind)) {
        if (spec.role == role) {
            out.emplace_back(spec.name);
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(PowertrainKind kind) {
    switch (kind) {
    case PowertrainKind::ice:
        return "ice";
    case PowertrainKind::ev:
        return "ev";
    case PowertrainKind::hev:
        return "hev";
    }
    return "ice";
}

PowertrainKind parse_powertrain(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "ice") return PowertrainKind::ice;
    if (lower == "ev") return PowertrainKind::ev;
    if (lower == "hev") return PowertrainKind::hev;
    throw ConfigError("unknown powertrain kind '" + std::string(text) + "' (expected ice, ev or hev)");
}

const std::vector<ChannelSpec>& channel_table(PowertrainKind kind) {
    switch (kind) {
    case PowertrainKind::ice:
        return kIceTable;
    case PowertrainKind::ev:
        return kEvTable;
    case PowertrainKind::hev:
        return kHevTable;
    }
    return kIceTable;
}

std::optional<ChannelSpec> find_channel_spec(PowertrainKind kind, std::string_view name) {
    for (const auto& spec : channel_table(kind)) {
        if (spec.name == name) {
            return spec;
        }
    }
    return std::nullopt;
}

std::vector<std::string> input_channels(PowertrainKind kind) {
    return names_with_role(kind, ChannelRole::input);
}

std::vector<std::string> target_channels(PowertrainKind kind) {
    return names_with_role(kind, ChannelRole::target);
}

bool is_admissible_feature(PowertrainKind kind, std::string_view name) {
    const auto spec = find_channel_spec(kind, name);
    return spec && spec->role == ChannelRole::input;
}

double quantize_time(double seconds) {
    return std::round(seconds * kTicksPerSecond) / kTicksPerSecond;
}

const Channel& DriveLog::channel(const std::string& name) const {
    const auto it = channels.find(name);
    if (it == channels.end()) {
        throw DataError("log has no channel '" + name + "'");
    }
    return it->second;
}

std::vector<Violation> validate_log(const DriveLog& log) {
    std::vector<Violation> out;
    for (const auto& [name, ch] : log.channels) {
        if (ch.name != name) {
            out.push_back({name, "channel name does not match its key"});
        }
        if (ch.timestamps.size() != ch.values.size()) {
            out.push_back({name, "timestamp/value length mismatch"});
        }
        if (ch.empty()) {
            out.push_back({name, "empty channel"});
        }
        for (std::size_t i = 1; i < ch.timestamps.size(); ++i) {
            if (!(ch.timestamps[i] > ch.timestamps[i - 1])) {
                out.push_back({name, "non-increasing timestamp"});
                break;
            }
        }
        const bool finite_ts = std::all_of(ch.timestamps.begin(), ch.timestamps.end(),
                                           [](double t) { return std::isfinite(t); });
        const bool finite_vals = std::all_of(ch.values.begin(), ch.values.end(),
                                             [](double v) { return std::isfinite(v); });
        if (!finite_ts || !finite_vals) {
            out.push_back({name, "non-finite value"});
        }
        if (const auto spec = find_channel_spec(log.kind, name); spec && !ch.unit.empty() && ch.unit != spec->unit) {
            out.push_back({name, "unit mismatch (expected " + std::string(spec->unit) + ")"});
        }
    }
    for (const auto& spec : channel_table(log.kind)) {
        if (!spec.required || log.has(std::string(spec.name))) {
            continue;
        }
        const char* rule = spec.role == ChannelRole::target ? "missing target channel" : "missing admissible channel";
        out.push_back({std::string(spec.name), rule});
    }
    return out;
}

std::size_t AlignedSeries::column_index(std::string_view name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) {
        throw DataError("series has no feature '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - feature_names.begin());
}

AlignedSeries AlignedSeries::select_features(const std::vector<std::string>& names) const {
    std::vector<std::size_t> cols_idx;
    cols_idx.reserve(names.size());
    for (const auto& n : names) {
        cols_idx.push_back(column_index(n));
    }
    AlignedSeries out;
    out.timestamps = timestamps;
    out.dt = dt;
    out.feature_names = names;
    out.target = target;
    out.features.reserve(rows() * names.size());
    for (std::size_t r = 0; r < rows(); ++r) {
        for (const auto c : cols_idx) {
            out.features.push_back(feature(r, c));
        }
    }
    return out;
}

std::vector<Violation> validate_series(const AlignedSeries& s) {
    std::vector<Violation> out;
    if (s.rows() == 0) {
        out.push_back({"", "empty series"});
    }
    if (s.target.size() != s.rows()) {
        out.push_back({"target", "target length differs from timestamp count"});
    }
    if (s.features.size() != s.rows() * s.cols()) {
        out.push_back({"", "feature matrix shape mismatch"});
    }
    if (!(s.dt > 0.0)) {
        out.push_back({"", "non-positive dt"});
    }
    std::set<std::string> seen;
    for (const auto& n : s.feature_names) {
        if (!seen.insert(n).second) {
            out.push_back({n, "duplicate feature name"});
        }
    }
    for (std::size_t i = 1; i < s.rows(); ++i) {
        if (!(s.timestamps[i] > s.timestamps[i - 1])) {
            out.push_back({"", "non-increasing timestamp"});
            break;
        }
    }
    const auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(s.features) || !finite(s.target) || !finite(s.timestamps)) {
        out.push_back({"", "non-finite value"});
    }
    return out;
}

double median_period(const std::vector<double>& timestamps) {
    if (timestamps.size() < 2) {
        return 0.0;
    }
    std::vector<double> gaps(timestamps.size() - 1);
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        gaps[i - 1] = timestamps[i] - timestamps[i - 1];
    }
    const std::size_t mid = gaps.size() / 2;
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
    double m = gaps[mid];
    if (gaps.size() % 2 == 0) {
        const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

AlignedSeries slice_time_range(const AlignedSeries& series, double t0, double t1) {
    if (!(t0 < t1)) {
        throw DataError("slice_time_range requires t0 < t1");
    }
    const auto first = std::lower_bound(series.timestamps.begin(), series.timestamps.end(), t0);
    const auto last = std::lower_bound(series.timestamps.begin(), series.timestamps.end(), t1);
    if (first >= last) {
        throw DataError("empty slice: no rows in [" + std::to_string(t0) + ", " + std::to_string(t1) + ")");
    }
    const auto b = static_cast<std::size_t>(first - series.timestamps.begin());
    const auto e = static_cast<std::size_t>(last - series.timestamps.begin());
    const std::size_t c = series.cols();

    AlignedSeries out;
    out.feature_names = series.feature_names;
    out.timestamps.assign(first, last);
    out.target.assign(series.target.begin() + static_cast<std::ptrdiff_t>(b),
                      series.target.begin() + static_cast<std::ptrdiff_t>(e));
    out.features.assign(series.features.begin() + static_cast<std::ptrdiff_t>(b * c),
                        series.features.begin() + static_cast<std::ptrdiff_t>(e * c));
    // A single surviving row keeps the parent's period.
    out.dt = out.rows() >= 2 ? median_period(out.timestamps) : series.dt;
    return out;
}

}  // namespace powertrace
