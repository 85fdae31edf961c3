#include "powertrace/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "powertrace/errors.hpp"
#include "powertrace/ingest.hpp"
#include "powertrace/rng.hpp"
#include "powertrace/text.hpp"

namespace powertrace::synth {

namespace {

constexpr double kGravity = 9.81;
constexpr double kKmh = 1.0 / 3.6;
constexpr double kRpmPerRadS = 60.0 / (2.0 * std::numbers::pi);
// HEV battery proxy, as a state of charge in [0, 1] over 1 kWh.
constexpr double kProxyCapacityKws = 3600.0;
constexpr double kProxyStart = 0.6;
constexpr double kProxyLow = 0.3;
constexpr double kProxyRecovered = 0.5;
constexpr double kChargeKw = 3.0;

struct Segment {
    double t0;
    double t1;
    double v0;  // m/s
    double v1;
};

double gear_ratio(double speed_kmh) {
    std::size_t band = 0;
    while (band < std::size(kGearEdgesKmh) && speed_kmh >= kGearEdgesKmh[band]) ++band;
    return kGearRatios[band];
}

std::vector<Segment> build_profile(const DriveCycleSpec& spec, double duration) {
    std::vector<Segment> out;
    double t = 0.0;
    double v = 0.0;
    std::size_t i = 0;
    while (t < duration) {
        const Phase& ph = spec.phases[i % spec.phases.size()];
        const double target = ph.target_kmh * kKmh;
        const double dv = target - v;
        const double cap = spec.vehicle.accel_cap_mps2;
        const std::string where = "phase " + std::to_string(i % spec.phases.size()) + " (" +
                                  std::string(to_string(ph.kind)) + ")";
        switch (ph.kind) {
            case PhaseKind::stop:
                if (v > 1e-12) throw ConfigError(where + " starts while moving; brake to 0 first");
                out.push_back({t, t + ph.duration_s, 0.0, 0.0});
                break;
            case PhaseKind::accel:
            case PhaseKind::brake:
                if (ph.kind == PhaseKind::accel ? dv < 0.0 : dv > 0.0) {
                    throw ConfigError(where + " moves speed the wrong way");
                }
                if (1.5 * std::abs(dv) / ph.duration_s > cap) {
                    throw ConfigError(where + " is infeasible: " + format_double(ph.target_kmh) +
                                      " km/h cannot be reached in " + format_double(ph.duration_s) +
                                      " s under the acceleration cap");
                }
                out.push_back({t, t + ph.duration_s, v, target});
                break;
            case PhaseKind::cruise: {
                const double spin = 1.5 * std::abs(dv) / cap;
                if (spin > ph.duration_s) {
                    throw ConfigError(where + " is infeasible: spin-up to " + format_double(ph.target_kmh) +
                                      " km/h needs " + format_double(spin) + " s");
                }
                if (spin > 0.0) out.push_back({t, t + spin, v, target});
                out.push_back({t + spin, t + ph.duration_s, target, target});
                break;
            }
        }
        v = target;
        if (ph.kind == PhaseKind::stop) v = 0.0;
        t += ph.duration_s;
        ++i;
    }
    return out;
}

struct Kinematics {
    double v;  // m/s
    double a;
};

Kinematics evaluate(const Segment& s, double t) {
    const double len = s.t1 - s.t0;
    const double u = std::clamp((t - s.t0) / len, 0.0, 1.0);
    const double dv = s.v1 - s.v0;
    return {s.v0 + dv * u * u * (3.0 - 2.0 * u), dv * 6.0 * u * (1.0 - u) / len};
}

}  // namespace

std::string_view to_string(PhaseKind kind) {
    switch (kind) {
        case PhaseKind::cruise:
            return "cruise";
        case PhaseKind::accel:
            return "accel";
        case PhaseKind::brake:
            return "brake";
        case PhaseKind::stop:
            return "stop";
    }
    return "cruise";
}

PhaseKind parse_phase_kind(std::string_view text) {
    for (const PhaseKind k : {PhaseKind::cruise, PhaseKind::accel, PhaseKind::brake, PhaseKind::stop}) {
        if (text == to_string(k)) return k;
    }
    throw ConfigError("unknown phase kind '" + std::string(text) + "'");
}

void DriveCycleSpec::validate() const {
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ConfigError("rate_hz must be positive");
    if (phases.empty()) throw ConfigError("drive cycle has no phases");
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw ConfigError("duration_s must be non-negative");
    for (const auto& ph : phases) {
        if (!(ph.duration_s > 0.0) || !std::isfinite(ph.duration_s)) {
            throw ConfigError("phase durations must be positive");
        }
        if (!(ph.target_kmh >= 0.0) || !std::isfinite(ph.target_kmh)) {
            throw ConfigError("phase target speeds must be non-negative");
        }
    }
    for (const auto& [name, sigma] : noise) {
        if (!(sigma >= 0.0)) throw ConfigError("noise for " + name + " must be non-negative");
    }
    const auto& v = vehicle;
    if (!(v.mass_kg > 0.0) || !(v.wheel_radius_m > 0.0) || !(v.accel_cap_mps2 > 0.0) || v.rolling_coeff < 0.0 ||
        v.cda_m2 < 0.0 || v.air_density < 0.0) {
        throw ConfigError("invalid vehicle parameters");
    }
}

std::map<std::string, double> default_noise() {
    return {{"speed", 0.2},        {"acceleration", 0.02}, {"engine_torque", 1.0},  {"engine_rpm", 10.0},
            {"motor_torque", 1.0}, {"motor_rpm", 10.0},    {"fuel_power", 0.1},     {"electric_power", 0.1}};
}

GeneratedCycle generate_cycle(const DriveCycleSpec& spec) {
    spec.validate();
    double total = 0.0;
    for (const auto& ph : spec.phases) total += ph.duration_s;
    const double duration = spec.duration_s > 0.0 ? spec.duration_s : total;
    const auto n = static_cast<std::size_t>(std::llround(duration * spec.rate_hz));
    if (n == 0) throw ConfigError("drive cycle is shorter than one sample period");
    const auto profile = build_profile(spec, duration);

    const VehicleParams& veh = spec.vehicle;
    const PowertrainKind kind = spec.kind;
    std::map<std::string, std::vector<double>> cols;
    GeneratedCycle out;
    OracleTruth& truth = out.truth;
    const double dt = 1.0 / spec.rate_hz;
    bool engine_mode = false;
    double proxy = kProxyStart;
    std::size_t seg = 0;

    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        while (seg + 1 < profile.size() && t >= profile[seg].t1) ++seg;
        const auto [v, a] = evaluate(profile[seg], t);
        const double v_kmh = v / kKmh;
        const double resist = (v > 1e-9 ? veh.mass_kg * kGravity * veh.rolling_coeff : 0.0) +
                              0.5 * veh.air_density * veh.cda_m2 * v * v;
        const double wheel_torque = (veh.mass_kg * a + resist) * veh.wheel_radius_m;
        const double wheel_omega = v / veh.wheel_radius_m;
        const double motor_omega = wheel_omega * kMotorRatio;
        double power = 0.0;

        const auto engine = [&](double extra_kw) {
            const double ratio = gear_ratio(v_kmh);
            const double rpm = std::max(kIdleRpm, wheel_omega * ratio * kRpmPerRadS);
            const double omega = rpm / kRpmPerRadS;
            const double tau = std::clamp(wheel_torque / ratio + extra_kw * 1000.0 / omega, 0.0, kTorqueCapNm);
            cols["engine_rpm"].push_back(rpm);
            cols["engine_torque"].push_back(tau);
            return tau * omega / 1000.0 + kIdleKw;
        };
        const auto motor = [&]() {
            const double tau = std::clamp(wheel_torque / kMotorRatio, -kTorqueCapNm, kTorqueCapNm);
            const double mech = tau * motor_omega / 1000.0;
            return std::pair{tau, mech >= 0.0 ? mech / kEtaDrive : mech * kEtaRegen};
        };

        switch (kind) {
            case PowertrainKind::ice: {
                power = engine(0.0);
                cols["fuel_power"].push_back(power);
                break;
            }
            case PowertrainKind::ev: {
                const auto [tau, p] = motor();
                power = p;
                cols["motor_torque"].push_back(tau);
                cols["motor_rpm"].push_back(motor_omega * kRpmPerRadS);
                cols["electric_power"].push_back(p);
                break;
            }
            case PowertrainKind::hev: {
                if (!engine_mode && (v_kmh > kHevSwitchKmh + kHevHysteresisKmh || proxy < kProxyLow)) {
                    engine_mode = true;
                } else if (engine_mode && v_kmh < kHevSwitchKmh - kHevHysteresisKmh && proxy >= kProxyRecovered) {
                    engine_mode = false;
                }
                double fuel = 0.0;
                double electric = 0.0;
                if (engine_mode) {
                    const double charge = proxy < kProxyRecovered ? kChargeKw : 0.0;
                    if (wheel_torque < 0.0) {
                        fuel = engine(0.0);
                        electric = motor().second;
                    } else {
                        fuel = engine(charge);
                        electric = -charge * kEtaDrive;
                    }
                } else {
                    cols["engine_rpm"].push_back(0.0);
                    cols["engine_torque"].push_back(0.0);
                    electric = motor().second;
                }
                proxy = std::clamp(proxy - electric * dt / kProxyCapacityKws, 0.0, 1.0);
                power = fuel + electric;
                cols["motor_rpm"].push_back(motor_omega * kRpmPerRadS);
                cols["fuel_power"].push_back(fuel);
                cols["electric_power"].push_back(electric);
                truth.engine_on.push_back(engine_mode ? 1 : 0);
                break;
            }
        }
        cols["speed"].push_back(v_kmh);
        cols["acceleration"].push_back(a);
        truth.timestamps.push_back(quantize_time(t));
        truth.power_kw.push_back(power);
        truth.speed_kmh.push_back(v_kmh);
        truth.accel_mps2.push_back(a);
    }

    DriveLog& log = out.log;
    log.kind = kind;
    log.meta["rate_hz"] = format_double(spec.rate_hz);
    log.meta["seed"] = std::to_string(spec.seed);
    std::uint64_t stream = 0;
    for (auto& [name, values] : cols) {
        const auto cs = find_channel_spec(kind, name);
        Channel ch;
        ch.name = name;
        ch.unit = cs ? std::string(cs->unit) : "";
        ch.timestamps = truth.timestamps;
        Rng rng(derive_seed(spec.seed, 0x100 + stream++));
        const auto it = spec.noise.find(name);
        const double sigma = it == spec.noise.end() ? 0.0 : it->second;
        const bool non_negative = name == "speed" || name.ends_with("_rpm");
        for (double& x : values) {
            if (sigma > 0.0) x += sigma * rng.normal();
            if (non_negative) x = std::max(0.0, x);
        }
        ch.values = std::move(values);
        log.channels[name] = std::move(ch);
    }
    return out;
}

std::string truth_csv(const OracleTruth& truth) {
    std::string out = "timestamp_s,power_kw_true\n";
    for (std::size_t i = 0; i < truth.timestamps.size(); ++i) {
        out += format_double(truth.timestamps[i]);
        out += ',';
        out += format_double(truth.power_kw[i]);
        out += '\n';
    }
    return out;
}

namespace {

struct Style {
    double v_min;
    double v_max;
    double p_stop;
    double cruise_min;
    double cruise_max;
    double stop_min;
    double stop_max;
};

Style style_for(std::string_view preset) {
    if (preset == "urban") return {15, 60, 0.45, 10, 40, 5, 25};
    if (preset == "highway") return {70, 120, 0.05, 30, 120, 5, 15};
    if (preset == "mixed-route") return {20, 110, 0.2, 15, 60, 5, 20};
    throw ConfigError("unknown drive-cycle preset '" + std::string(preset) +
                      "' (expected mixed-route, urban or highway)");
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"mixed-route", "urban", "highway"};
    return names;
}

DriveCycleSpec preset_cycle(std::string_view preset, PowertrainKind kind, double duration_s, std::uint64_t seed) {
    const Style st = style_for(preset);
    if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
    DriveCycleSpec spec;
    spec.kind = kind;
    spec.duration_s = duration_s;
    spec.seed = seed;
    spec.noise = default_noise();
    Rng rng(derive_seed(seed, 0x5359));
    double v = 0.0;
    double total = 0.0;
    const auto transition = [&](double target) {
        const double dv = std::abs(target - v) * kKmh;
        const double d = std::max(2.0, dv * rng.uniform(1.2, 2.5));
        spec.phases.push_back({target > v ? PhaseKind::accel : PhaseKind::brake, d, target});
        total += d;
        v = target;
    };
    while (total < duration_s) {
        if (v == 0.0) {
            const double d = rng.uniform(st.stop_min, st.stop_max);
            spec.phases.push_back({PhaseKind::stop, d, 0.0});
            total += d;
            transition(std::round(rng.uniform(st.v_min, st.v_max)));
            continue;
        }
        const double d = rng.uniform(st.cruise_min, st.cruise_max);
        spec.phases.push_back({PhaseKind::cruise, d, v});
        total += d;
        if (rng.bernoulli(st.p_stop)) {
            transition(0.0);
        } else {
            const double target = std::round(rng.uniform(st.v_min, st.v_max));
            if (std::abs(target - v) >= 3.0) transition(target);
        }
    }
    return spec;
}

DriveLog add_multirate_jitter(const DriveLog& log, const JitterSpec& spec) {
    if (!(spec.jitter_fraction >= 0.0 && spec.jitter_fraction < 1.0)) {
        throw ConfigError("jitter_fraction must lie in [0, 1)");
    }
    const auto check_p = [](double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("drop probability must lie in [0, 1]");
    };
    check_p(spec.drop_probability);
    for (const auto& [name, p] : spec.drop_overrides) check_p(p);
    for (const auto& [name, r] : spec.rates_hz) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("rate for " + name + " must be positive");
    }

    DriveLog out = log;
    std::uint64_t stream = 0;
    for (auto& [name, ch] : out.channels) {
        Rng rng(derive_seed(spec.seed, stream++));
        const auto rate = spec.rates_hz.find(name);
        if (rate == spec.rates_hz.end() || log.channels.at(name).empty()) continue;
        const Channel& src = log.channels.at(name);
        const auto drop_it = spec.drop_overrides.find(name);
        const double p_drop = drop_it == spec.drop_overrides.end() ? spec.drop_probability : drop_it->second;
        const double period = 1.0 / rate->second;
        ch.timestamps.clear();
        ch.values.clear();
        const double first = src.timestamps.front();
        const double last = src.timestamps.back();
        for (std::size_t k = 0;; ++k) {
            const double nominal = first + static_cast<double>(k) * period;
            if (nominal > last + 1e-9) break;
            const double t = quantize_time(nominal + spec.jitter_fraction * (rng.uniform() - 0.5) * period);
            const bool drop = rng.bernoulli(p_drop);
            if (drop) continue;
            ch.timestamps.push_back(t);
            ch.values.push_back(src.values[nearest_index(src.timestamps, t)]);
        }
    }
    return out;
}

}  // namespace powertrace::synth
