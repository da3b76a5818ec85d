#pragma once

#include <cstdint>
#include <string_view>

namespace dpls {

// Deterministic seed derivation: every random task gets its own stream,
// derived from the master seed and a label (and optionally an index).
// Uses splitmix64 over an FNV-1a hash of the label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index);

// Self-contained generator with fully specified output. Avoids
// std::normal_distribution, whose stream is implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller (one cached value).
    double gaussian();
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

  private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

} // namespace dpls
