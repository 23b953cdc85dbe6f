#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ledt {

struct GradCheckCase {
    std::string name;
    double worst = 0.0;  // max relative error across the checked points
    int points = 0;
};

// Central-difference verification of every analytic gradient the training
// losses rely on: reconstruction through the generator, both codebook terms,
// cross-entropy, code-dictionary distance, subject and word losses, and the
// two attention paths. Each case is evaluated at `points` seeded random
// points with finite-difference step `eps`; the straight-through estimator
// is deliberately absent (its backward is not the forward's derivative).
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, int points, double eps);

}  // namespace ledt
