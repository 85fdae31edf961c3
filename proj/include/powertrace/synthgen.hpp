#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "powertrace/signal.hpp"

namespace powertrace::synth {

enum class PhaseKind { cruise, accel, brake, stop };

std::string_view to_string(PhaseKind kind);
PhaseKind parse_phase_kind(std::string_view text);

// Speed moves from the current value to `target_kmh` along a smoothstep
// v0 + dv * (3u^2 - 2u^3). Accel and brake use the whole phase; cruise spins up
// as fast as the acceleration cap allows and then holds; stop requires standstill.
struct Phase {
    PhaseKind kind = PhaseKind::cruise;
    double duration_s = 0.0;
    double target_kmh = 0.0;
};

struct VehicleParams {
    double mass_kg = 1500.0;
    double rolling_coeff = 0.012;
    double cda_m2 = 0.7;
    double air_density = 1.2;
    double wheel_radius_m = 0.3;
    double accel_cap_mps2 = 3.0;
};

// Frozen oracle constants.
inline constexpr double kIdleKw = 1.5;
inline constexpr double kIdleRpm = 800.0;
inline constexpr double kTorqueCapNm = 250.0;
inline constexpr double kEtaDrive = 0.9;
inline constexpr double kEtaRegen = 0.6;
inline constexpr double kMotorRatio = 9.0;
// Upper band edges in km/h and the matching overall ratios; the last band is open.
inline constexpr double kGearEdgesKmh[] = {20.0, 40.0, 60.0, 90.0};
inline constexpr double kGearRatios[] = {13.0, 8.0, 5.5, 4.2, 3.3};
inline constexpr double kHevSwitchKmh = 40.0;
inline constexpr double kHevHysteresisKmh = 5.0;

struct DriveCycleSpec {
    PowertrainKind kind = PowertrainKind::ice;
    // 0 means the sum of the phase durations; a longer value repeats the phases.
    double duration_s = 0.0;
    double rate_hz = 2.0;
    std::vector<Phase> phases;
    // Sensor noise standard deviation per channel name; absent channels are noise-free.
    std::map<std::string, double> noise;
    VehicleParams vehicle;
    std::uint64_t seed = 0;

    void validate() const;
};

// Typical sensor noise for every generated channel.
std::map<std::string, double> default_noise();

struct OracleTruth {
    std::vector<double> timestamps;
    std::vector<double> power_kw;
    std::vector<double> speed_kmh;
    std::vector<double> accel_mps2;
    // HEV only: 1 while the engine is running.
    std::vector<std::uint8_t> engine_on;
};

struct GeneratedCycle {
    DriveLog log;
    OracleTruth truth;
};

// ConfigError for invalid or infeasible phases.
GeneratedCycle generate_cycle(const DriveCycleSpec& spec);

// `timestamp_s,power_kw_true`
std::string truth_csv(const OracleTruth& truth);

// Random phase sequences with the character of mixed-route, urban or highway driving.
DriveCycleSpec preset_cycle(std::string_view preset, PowertrainKind kind, double duration_s, std::uint64_t seed);
const std::vector<std::string>& preset_names();

struct JitterSpec {
    // Channels without a rate are copied unchanged.
    std::map<std::string, double> rates_hz;
    // Each timestamp moves by up to +-fraction/2 of its channel's period; must be in [0, 1).
    double jitter_fraction = 0.0;
    double drop_probability = 0.0;
    std::map<std::string, double> drop_overrides;
    std::uint64_t seed = 0;
};

// Resamples each channel on its own jittered clock, taking the nearest source sample.
DriveLog add_multirate_jitter(const DriveLog& log, const JitterSpec& spec);

}  // namespace powertrace::synth
