#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "powertrace/errors.hpp"
#include "powertrace/ingest.hpp"
#include "powertrace/synthgen.hpp"

using namespace powertrace;
using namespace powertrace::synth;

namespace {

DriveCycleSpec clean(PowertrainKind kind, std::vector<Phase> phases, double rate = 2.0) {
    DriveCycleSpec s;
    s.kind = kind;
    s.rate_hz = rate;
    s.phases = std::move(phases);
    return s;
}

}  // namespace

TEST_CASE("all-stop cycle rests at idle") {
    const auto ice = generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::stop, 30, 0}}));
    REQUIRE(ice.truth.power_kw.size() == 60);
    for (std::size_t i = 0; i < 60; ++i) {
        CHECK(ice.log.channel("speed").values[i] == 0.0);
        CHECK(ice.truth.power_kw[i] == kIdleKw);
        CHECK(ice.log.channel("engine_rpm").values[i] == kIdleRpm);
    }
    const auto ev = generate_cycle(clean(PowertrainKind::ev, {{PhaseKind::stop, 30, 0}}));
    for (const double p : ev.truth.power_kw) CHECK(p == 0.0);
}

TEST_CASE("cruise power matches the road-load closed form") {
    const auto g = generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::cruise, 120, 50}}));
    const VehicleParams veh;
    const double v = 50.0 / 3.6;
    const double force = veh.mass_kg * 9.81 * veh.rolling_coeff + 0.5 * veh.air_density * veh.cda_m2 * v * v;
    const double expected = force * v / 1000.0 + kIdleKw;
    const double spin = 1.5 * v / veh.accel_cap_mps2;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < g.truth.timestamps.size(); ++i) {
        if (g.truth.timestamps[i] < spin) continue;
        CHECK(g.truth.accel_mps2[i] == 0.0);
        CHECK(g.truth.power_kw[i] == doctest::Approx(expected).epsilon(1e-12));
        ++checked;
    }
    CHECK(checked > 200);
}

TEST_CASE("EV braking regenerates") {
    const auto g = generate_cycle(clean(PowertrainKind::ev, {{PhaseKind::accel, 20, 60}, {PhaseKind::brake, 20, 0}}, 10));
    const auto& torque = g.log.channel("motor_torque").values;
    for (std::size_t i = 0; i < g.truth.power_kw.size(); ++i) {
        const double t = g.truth.timestamps[i];
        const double p = g.truth.power_kw[i];
        CHECK((p > 0) == (torque[i] > 0));
        CHECK((p < 0) == (torque[i] < 0));
        if (t >= 22.0 && t <= 38.0) CHECK(p < 0.0);
    }
}

TEST_CASE("EV energy over a symmetric cycle is net positive in closed form") {
    DriveCycleSpec s = clean(PowertrainKind::ev, {{PhaseKind::accel, 20, 50}, {PhaseKind::brake, 20, 0}}, 100);
    s.vehicle.rolling_coeff = 0.0;
    s.vehicle.cda_m2 = 0.0;
    const auto g = generate_cycle(s);
    double energy = 0.0;
    for (const double p : g.truth.power_kw) energy += p * 0.01;
    const double v = 50.0 / 3.6;
    const double kinetic_kj = 0.5 * s.vehicle.mass_kg * v * v / 1000.0;
    CHECK(energy > 0.0);
    CHECK(energy == doctest::Approx(kinetic_kj * (1.0 / kEtaDrive - kEtaRegen)).epsilon(1e-3));
}

TEST_CASE("speed integrates acceleration") {
    for (const auto& preset : preset_names()) {
        CAPTURE(preset);
        DriveCycleSpec s = preset_cycle(preset, PowertrainKind::ice, 900, 4);
        s.noise.clear();
        const auto g = generate_cycle(s);
        const auto& v = g.truth.speed_kmh;
        const auto& a = g.truth.accel_mps2;
        const double h = 1.0 / s.rate_hz;
        double max_jerk = 0.0;
        for (std::size_t i = 1; i < a.size(); ++i) max_jerk = std::max(max_jerk, std::abs(a[i] - a[i - 1]) / h);
        const double tol = 2.0 / s.rate_hz * max_jerk;
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            const double diff = (v[i + 1] - v[i]) / 3.6 / h;
            CHECK(std::abs(diff - a[i]) <= tol);
            CHECK(v[i] >= 0.0);
        }
    }
}

TEST_CASE("oracle invariants per powertrain") {
    for (const auto kind : {PowertrainKind::ice, PowertrainKind::ev, PowertrainKind::hev}) {
        CAPTURE(to_string(kind));
        const auto g = generate_cycle(preset_cycle("mixed-route", kind, 1800, 11));
        CHECK(validate_log(g.log).empty());
        CHECK(g.truth.power_kw.size() == 3600);
        if (kind == PowertrainKind::ice) {
            for (const double p : g.truth.power_kw) CHECK(p >= kIdleKw);
        }
        if (kind == PowertrainKind::hev) {
            std::size_t switches = 0;
            for (std::size_t i = 1; i < g.truth.engine_on.size(); ++i) {
                if (g.truth.engine_on[i] == g.truth.engine_on[i - 1]) continue;
                ++switches;
                const double v = g.truth.speed_kmh[i];
                if (g.truth.engine_on[i]) {
                    CHECK(v > kHevSwitchKmh + kHevHysteresisKmh - 1e-9);
                } else {
                    CHECK(v < kHevSwitchKmh - kHevHysteresisKmh);
                }
            }
            CHECK(switches > 0);
        }
    }
}

TEST_CASE("HEV target is the fuel plus electric sum") {
    DriveCycleSpec s = preset_cycle("urban", PowertrainKind::hev, 600, 2);
    s.noise.clear();
    const auto g = generate_cycle(s);
    const auto series = synchronize(g.log);
    REQUIRE(series.rows() == g.truth.power_kw.size());
    for (std::size_t i = 0; i < series.rows(); ++i) {
        CHECK(series.target[i] == doctest::Approx(g.truth.power_kw[i]).epsilon(1e-12));
    }
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = generate_cycle(preset_cycle("urban", PowertrainKind::ev, 300, 7));
    const auto b = generate_cycle(preset_cycle("urban", PowertrainKind::ev, 300, 7));
    const auto c = generate_cycle(preset_cycle("urban", PowertrainKind::ev, 300, 8));
    CHECK(write_log_csv(a.log) == write_log_csv(b.log));
    CHECK(truth_csv(a.truth) == truth_csv(b.truth));
    CHECK(write_log_csv(a.log) != write_log_csv(c.log));
    CHECK(truth_csv(a.truth).rfind("timestamp_s,power_kw_true\n0,", 0) == 0);
}

TEST_CASE("invalid and infeasible cycles") {
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::accel, 5, 100}})), ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::cruise, 5, 100}})), ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::accel, 20, 30}, {PhaseKind::stop, 5, 0}})),
                    ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::brake, 20, 30}})), ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::stop, 0, 0}})), ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {{PhaseKind::cruise, 5, -1}})), ConfigError);
    CHECK_THROWS_AS(generate_cycle(clean(PowertrainKind::ice, {})), ConfigError);
    CHECK_THROWS_AS(preset_cycle("rally", PowertrainKind::ice, 60, 0), ConfigError);
    CHECK_THROWS_AS(parse_phase_kind("coast"), ConfigError);
}

TEST_CASE("multirate jitter") {
    const auto g = generate_cycle(preset_cycle("mixed-route", PowertrainKind::ev, 600, 3));

    JitterSpec decimate;
    for (const auto& [name, ch] : g.log.channels) decimate.rates_hz[name] = 1.0;
    const auto d = add_multirate_jitter(g.log, decimate);
    for (const auto& [name, ch] : d.channels) {
        const auto& src = g.log.channel(name);
        REQUIRE(ch.size() == src.size() / 2);
        for (std::size_t i = 0; i < ch.size(); ++i) {
            CHECK(ch.timestamps[i] == src.timestamps[2 * i]);
            CHECK(ch.values[i] == src.values[2 * i]);
        }
    }

    JitterSpec multi;
    multi.rates_hz = {{"speed", 2.0}, {"motor_torque", 0.2}, {"motor_rpm", 0.5}};
    multi.jitter_fraction = 0.4;
    multi.drop_probability = 0.0;
    multi.seed = 5;
    const auto m = add_multirate_jitter(g.log, multi);
    CHECK(m.channel("speed").size() == 10 * m.channel("motor_torque").size());
    CHECK(m.channel("electric_power").timestamps == g.log.channel("electric_power").timestamps);
    for (const std::string name : {"speed", "motor_torque", "motor_rpm"}) {
        const auto& ch = m.channel(name);
        const double period = 1.0 / multi.rates_hz.at(name);
        for (std::size_t i = 0; i < ch.size(); ++i) {
            CHECK(std::abs(ch.timestamps[i] - static_cast<double>(i) * period) <= 0.2 * period + 1e-7);
            const auto& src = g.log.channel(name);
            CHECK(ch.values[i] == src.values[nearest_index(src.timestamps, ch.timestamps[i])]);
            if (i > 0) CHECK(ch.timestamps[i] > ch.timestamps[i - 1]);
        }
    }
    CHECK(validate_log(m).empty());

    JitterSpec drop;
    drop.rates_hz = {{"electric_power", 2.0}, {"speed", 2.0}};
    drop.drop_overrides = {{"electric_power", 1.0}};
    drop.drop_probability = 0.5;
    const auto dropped = add_multirate_jitter(g.log, drop);
    CHECK(dropped.channel("electric_power").empty());
    const auto n = dropped.channel("speed").size();
    CHECK(n > 400);
    CHECK(n < 800);
    const auto violations = validate_log(dropped);
    CHECK(std::find(violations.begin(), violations.end(), Violation{"electric_power", "empty channel"}) !=
          violations.end());

    JitterSpec bad;
    bad.rates_hz = {{"speed", 0.0}};
    CHECK_THROWS_AS(add_multirate_jitter(g.log, bad), ConfigError);
    bad.rates_hz = {{"speed", 1.0}};
    bad.jitter_fraction = 1.0;
    CHECK_THROWS_AS(add_multirate_jitter(g.log, bad), ConfigError);
}
