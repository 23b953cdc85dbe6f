#pragma once

#include <vector>

#include "ledt/mat.hpp"

namespace ledt {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment estimates, allocated lazily on the first step.
struct AdamState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    long t = 0;
};

// One Adam update over a fixed parameter list. Parameter order must be
// stable across steps; the state is keyed positionally.
void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace ledt
