#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>

#include "ledt/codebook.hpp"
#include "ledt/rng.hpp"

using namespace ledt;

namespace {

// Independent brute-force nearest neighbour, written without reference to
// the implementation under test.
int brute_force_nn(const Mat& row, const Mat& entries) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < entries.rows; ++k) {
        double d = 0;
        for (int c = 0; c < entries.cols; ++c) {
            const double diff = row(0, c) - entries(k, c);
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("codebook") {

TEST_CASE("quantize picks the closest entry with its Euclidean distance") {
    Codebook cb = make_codebook(mat_from(2, 2, {0, 0, 1, 1}));
    const Mat delta = mat_from(1, 2, {0.6, 0.6});
    const QuantizeResult q = quantize(delta, cb);
    CHECK(q.codes == CodeSequence{1});
    CHECK(q.quantized(0, 0) == 1.0);
    CHECK(q.distances[0] == doctest::Approx(std::sqrt(0.32)).epsilon(1e-14));
    CHECK(cb.usage[1] == 1);
    CHECK(cb.usage[0] == 0);
}

TEST_CASE("exact ties go to the lowest index") {
    Codebook cb = make_codebook(mat_from(3, 2, {1, 0, -1, 0, 1, 0}));
    const Mat delta = mat_from(2, 2, {0, 0, 0, 5});  // both rows equidistant to 0 and 1 (and 2)
    const QuantizeResult q = quantize(delta, cb);
    CHECK(q.codes[0] == 0);
    CHECK(q.codes[1] == 0);
}

TEST_CASE("quantize agrees with brute force over 1000 random rows") {
    Rng rng(601);
    Codebook cb = make_codebook(randn(rng, 32, 8));
    const Mat rows = randn(rng, 1000, 8);
    for (int r = 0; r < rows.rows; ++r) {
        const Mat row = get_row(rows, r);
        Codebook scratch = cb;  // keep usage counting out of the comparison
        const QuantizeResult q = quantize(row, scratch);
        CHECK(q.codes[0] == brute_force_nn(row, cb.entries));
    }
}

TEST_CASE("quantize validates shapes and state") {
    Codebook cb = make_codebook(mat_from(2, 2, {0, 0, 1, 1}));
    CHECK_THROWS_AS(quantize(Mat(1, 3), cb), std::invalid_argument);
    CHECK_THROWS_AS(make_codebook(Mat(1, 2)), std::invalid_argument);  // fewer than 2 entries
}

TEST_CASE("codebook loss value matches the two-term definition") {
    const Mat delta_m = mat_from(1, 2, {1.0, 2.0});
    const Mat quant_m = mat_from(1, 2, {0.0, 0.0});
    const ad::Var delta = ad::param(delta_m);
    const ad::Var quant = ad::param(quant_m);
    const CodebookLoss l = codebook_loss(delta, quant, 0.25);
    // Terms are reported unscaled; beta weights the commitment inside total.
    CHECK(l.codebook_term->value(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(l.commitment_term->value(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(l.total->value(0, 0) == doctest::Approx(6.25).epsilon(1e-15));
}

TEST_CASE("codebook loss routes gradients to exactly one side per term") {
    Rng rng(602);
    const Mat dm = randn(rng, 3, 4);
    const Mat qm = randn(rng, 3, 4);

    {
        // codebook term alone: gradient reaches the entries, not the encoder
        const ad::Var delta = ad::param(dm);
        const ad::Var quant = ad::param(qm);
        ad::backward(codebook_loss(delta, quant, 0.25).codebook_term);
        CHECK(max_abs(delta->grad) == 0.0);
        CHECK(max_abs_diff(quant->grad, scale(sub(qm, dm), 2.0)) < 1e-12);
    }
    {
        // commitment term alone: gradient reaches the encoder side only
        const ad::Var delta = ad::param(dm);
        const ad::Var quant = ad::param(qm);
        ad::backward(codebook_loss(delta, quant, 0.25).commitment_term);
        CHECK(max_abs(quant->grad) == 0.0);
        CHECK(max_abs_diff(delta->grad, scale(sub(dm, qm), 2.0)) < 1e-12);
    }
}

TEST_CASE("dead entries are replaced from the pool and usage resets") {
    Codebook cb = make_codebook(mat_from(3, 2, {0, 0, 10, 10, 20, 20}));
    cb.usage = {5, 0, 7};
    const Mat pool = mat_from(2, 2, {1, 2, 3, 4});
    Rng rng(603);
    reinit_dead(cb, pool, rng, 1);
    // live entries unchanged
    CHECK(cb.entries(0, 0) == 0.0);
    CHECK(cb.entries(2, 0) == 20.0);
    // dead entry now equals one of the pool rows
    const bool is_pool_row =
        (cb.entries(1, 0) == 1.0 && cb.entries(1, 1) == 2.0) ||
        (cb.entries(1, 0) == 3.0 && cb.entries(1, 1) == 4.0);
    CHECK(is_pool_row);
    for (const long u : cb.usage) CHECK(u == 0);
}

TEST_CASE("reinit_dead rejects an empty pool and bad shapes") {
    Codebook cb = make_codebook(mat_from(2, 2, {0, 0, 1, 1}));
    Rng rng(604);
    CHECK_THROWS_AS(reinit_dead(cb, Mat(0, 2), rng, 1), std::invalid_argument);
    CHECK_THROWS_AS(reinit_dead(cb, Mat(2, 3), rng, 1), std::invalid_argument);
}

}  // TEST_SUITE
