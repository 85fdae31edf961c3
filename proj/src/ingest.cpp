#include "powertrace/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <tuple>

#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

namespace {

std::int64_t to_ticks(double seconds) {
    return std::llround(seconds * kTicksPerSecond);
}

double parse_timestamp(std::string_view field, std::size_t line) {
    field = trim(field);
    const auto dot = field.find('.');
    if (dot != std::string_view::npos) {
        const auto frac = field.substr(dot + 1);
        if (frac.size() > 7) {
            throw ParseError(line, "timestamp has more than 7 fractional digits");
        }
    }
    const double t = parse_double(field, line);
    return quantize_time(t);
}

struct RawRow {
    double t;
    double v;
    std::size_t line;
};

}  // namespace

DriveLog parse_log(std::string_view csv, PowertrainKind kind, std::vector<std::string>* warnings) {
    DriveLog log;
    log.kind = kind;
    std::map<std::string, std::vector<RawRow>> rows;
    std::map<std::string, std::string> units;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < csv.size()) {
        auto end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        const auto line = trim(csv.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kRawLogHeader) {
                throw ParseError(line_no, "expected header '" + std::string(kRawLogHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != 4) {
            throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        }
        const std::string name(trim(fields[1]));
        if (name.empty()) {
            throw ParseError(line_no, "empty channel name");
        }
        const double t = parse_timestamp(fields[0], line_no);
        const double v = parse_double(fields[2], line_no);
        const std::string unit(trim(fields[3]));
        const auto [it, inserted] = units.emplace(name, unit);
        if (!inserted && it->second != unit) {
            throw ParseError(line_no, "unit '" + unit + "' differs from earlier '" + it->second + "' for channel " + name);
        }
        rows[name].push_back({t, v, line_no});
    }
    if (!header_seen) {
        throw ParseError(1, "missing header");
    }

    for (auto& [name, rs] : rows) {
        std::stable_sort(rs.begin(), rs.end(), [](const RawRow& a, const RawRow& b) { return a.t < b.t; });
        Channel ch;
        ch.name = name;
        ch.unit = units[name];
        ch.timestamps.reserve(rs.size());
        ch.values.reserve(rs.size());
        for (const auto& r : rs) {
            ch.timestamps.push_back(r.t);
            ch.values.push_back(r.v);
        }
        if (find_channel_spec(kind, name)) {
            log.channels.emplace(name, std::move(ch));
        } else {
            if (warnings) {
                warnings->push_back("channel '" + name + "' is not admissible for " + std::string(to_string(kind)) +
                                    "; kept under extra");
            }
            log.extra.emplace(name, std::move(ch));
        }
    }
    return log;
}

std::string write_log_csv(const DriveLog& log) {
    struct Row {
        double t;
        const std::string* name;
        double v;
        const std::string* unit;
    };
    std::vector<Row> all;
    for (const auto* group : {&log.channels, &log.extra}) {
        for (const auto& [name, ch] : *group) {
            for (std::size_t i = 0; i < ch.size(); ++i) {
                all.push_back({ch.timestamps[i], &ch.name, ch.values[i], &ch.unit});
            }
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Row& a, const Row& b) {
        return std::tie(a.t, *a.name) < std::tie(b.t, *b.name);
    });
    std::string out(kRawLogHeader);
    out += '\n';
    for (const auto& r : all) {
        out += format_time(r.t);
        out += ',';
        out += *r.name;
        out += ',';
        out += format_double(r.v);
        out += ',';
        out += *r.unit;
        out += '\n';
    }
    return out;
}

double roughness_score(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) return 0.0;
    double energy = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = values[i] - values[i - 1];
        energy += d * d;
    }
    energy /= static_cast<double>(n - 1);
    return energy / var;
}

std::string select_reference(const DriveLog& log) {
    std::string best;
    double best_score = 0.0;
    for (const auto& [name, ch] : log.channels) {
        const auto spec = find_channel_spec(log.kind, name);
        if (!spec || spec->role != ChannelRole::input || ch.empty()) continue;
        const double score = roughness_score(ch.values);
        // std::map iterates names in order, so strict < keeps the smaller name on ties.
        if (best.empty() || score < best_score) {
            best = name;
            best_score = score;
        }
    }
    if (best.empty()) {
        throw DataError("no input channel available to serve as the synchronization reference");
    }
    return best;
}

std::size_t nearest_index(const std::vector<double>& timestamps, double t) {
    const auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
    if (it == timestamps.begin()) return 0;
    const auto hi = static_cast<std::size_t>(it - timestamps.begin());
    if (it == timestamps.end()) return hi - 1;
    const std::int64_t tt = to_ticks(t);
    const std::int64_t d_lo = tt - to_ticks(timestamps[hi - 1]);
    const std::int64_t d_hi = to_ticks(timestamps[hi]) - tt;
    return d_hi < d_lo ? hi : hi - 1;
}

AlignedSeries synchronize(const DriveLog& log, const SyncConfig& cfg) {
    const std::string ref_name = cfg.reference ? *cfg.reference : select_reference(log);
    const Channel& ref = log.channel(ref_name);
    if (ref.empty()) {
        throw DataError("reference channel '" + ref_name + "' is empty");
    }
    double max_gap = 0.0;
    if (cfg.max_gap) {
        if (!(*cfg.max_gap > 0.0)) throw ConfigError("max_gap must be positive");
        max_gap = *cfg.max_gap;
    } else {
        const double period = median_period(ref.timestamps);
        max_gap = period > 0.0 ? 2.0 * period : 1.0;
    }
    const std::int64_t gap_ticks = to_ticks(max_gap);

    std::vector<const Channel*> features;
    std::vector<std::string> feature_names;
    std::vector<const Channel*> targets;
    for (const auto& spec : channel_table(log.kind)) {
        const std::string name(spec.name);
        if (!log.has(name)) continue;
        const Channel& ch = log.channel(name);
        if (ch.empty()) throw DataError("channel '" + name + "' is empty");
        if (spec.role == ChannelRole::input) {
            features.push_back(&ch);
            feature_names.push_back(name);
        } else if (spec.role == ChannelRole::target) {
            targets.push_back(&ch);
        }
    }
    if (targets.empty()) {
        throw DataError("log has no target channel");
    }

    const std::size_t c = features.size();
    AlignedSeries out;
    out.feature_names = feature_names;
    std::vector<double> row(c);
    for (const double t : ref.timestamps) {
        const std::int64_t tt = to_ticks(t);
        bool keep = true;
        const auto pick = [&](const Channel& ch) {
            const std::size_t j = nearest_index(ch.timestamps, t);
            if (std::llabs(to_ticks(ch.timestamps[j]) - tt) > gap_ticks) keep = false;
            return ch.values[j];
        };
        for (std::size_t k = 0; k < c; ++k) {
            row[k] = pick(*features[k]);
        }
        double target = 0.0;
        for (const Channel* ch : targets) {
            target += pick(*ch);
        }
        if (!keep) continue;
        out.timestamps.push_back(t);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.target.push_back(target);
    }
    if (out.timestamps.empty()) {
        throw DataError("synchronization dropped every row (max_gap " + format_double(max_gap) + " s)");
    }
    out.dt = out.rows() >= 2 ? median_period(out.timestamps) : median_period(ref.timestamps);
    if (!(out.dt > 0.0)) out.dt = 1.0;
    return out;
}

std::string write_aligned_csv(const AlignedSeries& s) {
    std::string out = "timestamp_s";
    for (const auto& n : s.feature_names) {
        out += ',';
        out += n;
    }
    out += ",target_kw\n";
    for (std::size_t r = 0; r < s.rows(); ++r) {
        out += format_time(s.timestamps[r]);
        for (std::size_t k = 0; k < s.cols(); ++k) {
            out += ',';
            out += format_double(s.feature(r, k));
        }
        out += ',';
        out += format_double(s.target[r]);
        out += '\n';
    }
    return out;
}

AlignedSeries parse_aligned_csv(std::string_view csv) {
    AlignedSeries s;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t width = 0;
    while (pos < csv.size()) {
        auto end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        const auto line = trim(csv.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (width == 0) {
            if (fields.size() < 2 || trim(fields.front()) != "timestamp_s" || trim(fields.back()) != "target_kw") {
                throw ParseError(line_no, "expected header 'timestamp_s,<feature...>,target_kw'");
            }
            width = fields.size();
            for (std::size_t k = 1; k + 1 < fields.size(); ++k) {
                s.feature_names.emplace_back(trim(fields[k]));
            }
            continue;
        }
        if (fields.size() != width) {
            throw ParseError(line_no, "expected " + std::to_string(width) + " fields");
        }
        s.timestamps.push_back(parse_timestamp(fields[0], line_no));
        for (std::size_t k = 1; k + 1 < fields.size(); ++k) {
            s.features.push_back(parse_double(fields[k], line_no));
        }
        s.target.push_back(parse_double(fields.back(), line_no));
    }
    if (width == 0) throw ParseError(1, "missing header");
    if (s.rows() == 0) throw DataError("aligned series has no rows");
    s.dt = s.rows() >= 2 ? median_period(s.timestamps) : 1.0;
    if (const auto v = validate_series(s); !v.empty()) {
        throw DataError("aligned series invalid: " + v.front().rule);
    }
    return s;
}

}  // namespace powertrace
