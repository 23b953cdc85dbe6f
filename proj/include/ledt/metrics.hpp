#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ledt/codebook.hpp"
#include "ledt/mat.hpp"
#include "ledt/rng.hpp"
#include "ledt/synthetic_world.hpp"

namespace ledt {

struct FeatureSet {
    Mat rows;  // n x dim, one feature vector per row
    std::string label;
};

// Frechet distance between Gaussian fits of two feature sets:
//   |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
// The cross term eigendecomposes the symmetric product
// S_a^(1/2) S_b S_a^(1/2); tiny negative eigenvalues are clipped, larger
// ones raise. Result clipped to >= 0. Needs at least 2 rows per set.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

// Mean pairwise Euclidean distance over unordered row pairs.
double diversity_score(const FeatureSet& fakes);

struct CategoryReport {
    int category = -1;
    double frechet = 0.0;
    double diversity = 0.0;
    int distinct_codes = 0;
};

struct EditOutcome {
    Mat image;           // 1 x image_dim
    CodeSequence codes;  // provenance for the diversity mechanism check
};

using EditFn = std::function<EditOutcome(const Sample& input, Rng& rng)>;

// One-shot evaluation protocol: per unseen category pick one real input,
// generate fake_count outputs through `edit`, embed them, and compare with
// an equal-count real feature set. Deterministic given rng's seed.
std::vector<CategoryReport> evaluate(const WorldSpec& world, const std::vector<Sample>& dataset,
                                     int fake_count, const Rng& rng, const EditFn& edit);

}  // namespace ledt
