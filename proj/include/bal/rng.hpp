#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bal {

// Deterministic random source. The mt19937_64 engine is fully specified by the
// standard; the distributions are hand-rolled because std:: distribution output
// is implementation-defined and training runs must be reproducible bit-exact.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform in [0, n), unbiased.
    int uniform_int(int n) {
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return static_cast<int>(x % un);
    }

    // Standard normal via Box-Muller. One value per call; the sine half is
    // discarded so the stream stays position-independent.
    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 eng_;
};

} // namespace bal
