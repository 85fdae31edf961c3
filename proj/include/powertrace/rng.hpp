#pragma once

#include <cstdint>
#include <random>

namespace powertrace {

// splitmix64 finalizer; derives independent stream seeds from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

// Seeded generator with distribution code written out by hand so that draws
// are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace powertrace
