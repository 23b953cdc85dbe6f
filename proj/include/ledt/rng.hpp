#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "ledt/mat.hpp"

namespace ledt {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64_str(const char* s);

// Deterministic random stream. The mt19937_64 core is fixed by the standard
// and uniform/normal draws are constructed explicitly (53-bit mantissa,
// Box-Muller), so a seed reproduces the same stream everywhere. No
// std::*_distribution is used anywhere: those are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via masked rejection.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller with a cached spare.
    double normal();
    double normal(double mu, double sigma) {
        if (sigma < 0.0) throw std::invalid_argument("normal: sigma must be non-negative");
        return mu + sigma * normal();
    }

    // Independent child stream; depends only on (seed, tag).
    Rng derive(std::uint64_t tag) const {
        return Rng(splitmix64(seed_ + 0x9e3779b97f4a7c15ull * (tag + 1)));
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Mat randn(Rng& rng, int rows, int cols, double sigma = 1.0);
Mat rand_uniform(Rng& rng, int rows, int cols, double lo, double hi);

}  // namespace ledt
