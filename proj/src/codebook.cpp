#include "ledt/codebook.hpp"

#include <cmath>
#include <stdexcept>

namespace ledt {

Codebook make_codebook(Mat entries) {
    if (entries.rows < 2) throw std::invalid_argument("make_codebook: need at least 2 entries");
    require_finite(entries, "make_codebook");
    Codebook cb;
    cb.usage.assign(entries.rows, 0);
    cb.entries = std::move(entries);
    return cb;
}

QuantizeResult quantize(const LatentCode& delta, Codebook& cb) {
    if (cb.entries.rows == 0) throw std::invalid_argument("quantize: empty codebook");
    if (delta.cols != cb.entries.cols) throw std::invalid_argument("quantize: dimension mismatch");
    if (cb.usage.size() != static_cast<std::size_t>(cb.entries.rows))
        throw std::invalid_argument("quantize: usage count mismatch");

    QuantizeResult r;
    r.quantized = Mat(delta.rows, delta.cols);
    r.codes.resize(delta.rows);
    r.distances.resize(delta.rows);
    for (int i = 0; i < delta.rows; ++i) {
        int best = 0;
        double best_d = 0.0;
        for (int k = 0; k < cb.entries.rows; ++k) {
            double d = 0.0;
            for (int j = 0; j < delta.cols; ++j) {
                const double t = delta(i, j) - cb.entries(k, j);
                d += t * t;
            }
            if (k == 0 || d < best_d) {
                best = k;
                best_d = d;
            }
        }
        r.codes[i] = best;
        r.distances[i] = std::sqrt(best_d);
        for (int j = 0; j < delta.cols; ++j) r.quantized(i, j) = cb.entries(best, j);
        cb.usage[best] += 1;
    }
    return r;
}

CodebookLoss codebook_loss(const ad::Var& delta, const ad::Var& quantized, double beta) {
    if (beta < 0.0) throw std::invalid_argument("codebook_loss: beta must be non-negative");
    require_same_shape(delta->value, quantized->value, "codebook_loss");
    CodebookLoss out;
    out.codebook_term = ad::sum_sq(ad::sub(ad::stopgrad(delta), quantized));
    out.commitment_term = ad::sum_sq(ad::sub(delta, ad::stopgrad(quantized)));
    out.total = ad::add(out.codebook_term, ad::scale(out.commitment_term, beta));
    return out;
}

void reinit_dead(Codebook& cb, const Mat& pool_rows, Rng& rng, long min_usage) {
    if (pool_rows.rows == 0) throw std::invalid_argument("reinit_dead: empty pool");
    if (pool_rows.cols != cb.entries.cols) throw std::invalid_argument("reinit_dead: dimension mismatch");
    for (int k = 0; k < cb.entries.rows; ++k) {
        if (cb.usage[k] < min_usage) {
            const int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool_rows.rows)));
            for (int j = 0; j < cb.entries.cols; ++j) cb.entries(k, j) = pool_rows(pick, j);
        }
    }
    for (long& u : cb.usage) u = 0;
}

}  // namespace ledt
