#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vqla {

// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
// standard; the std::*_distribution adapters are not, so the mappings to
// reals/ranges live here and every sampling decision in the project goes
// through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) { return engine_() % bound; }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Uniform real in [0, 1) with 53 bits of precision.
    double next_real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double next_real(double lo, double hi) { return lo + (hi - lo) * next_real01(); }

    // Standard normal via Box-Muller (one spare cached).
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_real01();
        double u2 = next_real01();
        while (u1 <= 0.0) u1 = next_real01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double next_normal(double mean, double stddev) { return mean + stddev * next_normal(); }

    // In-place Fisher-Yates.
    template <typename Seq>
    void shuffle(Seq& seq) {
        if (seq.size() < 2) return;
        for (std::size_t i = seq.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(seq[i], seq[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vqla
