#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace entsearch {

// Every source of randomness in the project is seeded through
// derive_seed(base, component, index), so any sub-run (one trial, one
// evaluation run, one split) can be reproduced in isolation from the
// top-level seed alone.
std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                          std::uint64_t index = 0);

// mt19937_64 with pinned draw algorithms. std::uniform_int_distribution and
// std::normal_distribution are implementation-defined, which would make
// serialized histories depend on the standard library; the draws below are
// fixed here instead.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t next_below(std::uint64_t bound);

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller.
    double next_gaussian();

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace entsearch
