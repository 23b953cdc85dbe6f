#pragma once

#include <vector>

#include "ledt/autodiff.hpp"
#include "ledt/latent_space.hpp"
#include "ledt/mat.hpp"
#include "ledt/rng.hpp"

namespace ledt {

// Learned codebook: N entries of dimension D plus usage counts. Usage counts
// track nearest-neighbour wins since the last reset; they are bookkeeping,
// not parameters, and are excluded from parameter checksums.
struct Codebook {
    Mat entries;              // N x D
    std::vector<long> usage;  // N
};

using CodeSequence = std::vector<int>;  // length L, values in [0, N)

Codebook make_codebook(Mat entries);

struct QuantizeResult {
    Mat quantized;                  // L x D, selected entries
    CodeSequence codes;             // winning indices, ties -> lowest index
    std::vector<double> distances;  // Euclidean distance per row
};

// Independent nearest-neighbour match per latent row (squared Euclidean
// comparison, strict improvement keeps the lowest index on ties).
// Increments usage counts of the winners.
QuantizeResult quantize(const LatentCode& delta, Codebook& cb);

// Classic vector-quantization loss with split gradient routing:
//   codebook_term  = |sg(delta) - quantized|^2   -> codebook entries only
//   commitment     = |delta - sg(quantized)|^2   -> encoder side only
// Squared Euclidean on both terms for smooth gradients.
struct CodebookLoss {
    ad::Var total;
    ad::Var codebook_term;
    ad::Var commitment_term;
};
CodebookLoss codebook_loss(const ad::Var& delta, const ad::Var& quantized, double beta);

// Entries with usage below min_usage are replaced by rows drawn from the
// pool; all usage counts reset afterwards.
void reinit_dead(Codebook& cb, const Mat& pool_rows, Rng& rng, long min_usage);

}  // namespace ledt
