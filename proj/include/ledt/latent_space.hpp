#pragma once

#include <filesystem>
#include <vector>

#include "ledt/mat.hpp"

namespace ledt {

// A latent code is an L x D matrix: L layers, D dims per layer.
using LatentCode = Mat;

struct CategoryStats {
    int category_id = -1;
    Mat mean;  // L x D
    long sample_count = 0;
};

// Mean latent of a category. Summation is pairwise (divide and conquer) to
// bound rounding error; permutation of the sample list changes the result by
// at most ~1e-12 at this scale.
CategoryStats class_mean(const std::vector<LatentCode>& samples, int category_id);

// delta = w - mean and its inverse. Round-trips hold to 1e-12 absolute;
// (a - b) + b may round, so exact equality is not promised.
LatentCode factorize(const LatentCode& w, const CategoryStats& stats);
LatentCode recompose(const LatentCode& delta, const CategoryStats& stats);

// Stats checkpoint: binary tensor for the mean plus a JSON sidecar carrying
// category_id and sample_count. `base` is the path without extension.
void save_stats(const std::filesystem::path& base, const CategoryStats& stats);
CategoryStats load_stats(const std::filesystem::path& base);

}  // namespace ledt
