#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "ledt/autodiff.hpp"
#include "ledt/gradcheck.hpp"
#include "ledt/loss_suite.hpp"
#include "ledt/rng.hpp"

using namespace ledt;

namespace {

// Keep finite-difference points away from the kinks of the piecewise ops.
Mat away_from(Rng& rng, int rows, int cols, double gap) {
    Mat m = randn(rng, rows, cols);
    for (double& v : m.data) {
        if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
    }
    return m;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("elementwise and scalar ops pass finite-difference checks") {
    Rng rng(301);
    const Mat fixed = randn(rng, 3, 4);

    auto check = [&](const char* name, const std::function<ad::Var(const ad::Var&)>& f,
                     const Mat& point) {
        INFO(name);
        CHECK(grad_check(f, point, 1e-5) < 1e-7);
    };

    check("add", [&](const ad::Var& x) { return ad::sum_sq(ad::add(x, ad::constant(fixed))); },
          randn(rng, 3, 4));
    check("sub", [&](const ad::Var& x) { return ad::sum_sq(ad::sub(ad::constant(fixed), x)); },
          randn(rng, 3, 4));
    check("scale", [&](const ad::Var& x) { return ad::sum_sq(ad::scale(x, -1.7)); },
          randn(rng, 3, 4));
    check("affine", [&](const ad::Var& x) { return ad::sum_sq(ad::affine(x, 2.0, -0.3)); },
          randn(rng, 3, 4));
    check("transpose", [&](const ad::Var& x) { return ad::sum_sq(ad::transpose(x)); },
          randn(rng, 3, 4));
    check("reshape", [&](const ad::Var& x) { return ad::sum_sq(ad::reshape(x, 4, 3)); },
          randn(rng, 3, 4));
}

TEST_CASE("matmul gradients flow to both operands") {
    Rng rng(302);
    const Mat a = randn(rng, 3, 4);
    const Mat b = randn(rng, 4, 5);
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::matmul(x, ad::constant(b))); },
                     a, 1e-5) < 1e-7);
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::matmul(ad::constant(a), x)); },
                     b, 1e-5) < 1e-7);
}

TEST_CASE("row and selection ops pass finite-difference checks") {
    Rng rng(303);
    const std::vector<int> idx = {2, 0, 2, 1};  // duplicate: scatter-add must accumulate
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::gather_rows(x, idx)); },
                     randn(rng, 3, 4), 1e-5) < 1e-7);
    const Mat bias = randn(rng, 1, 4);
    CHECK(grad_check(
              [&](const ad::Var& x) { return ad::sum_sq(ad::add_row(x, ad::constant(bias))); },
              randn(rng, 3, 4), 1e-5) < 1e-7);
    const Mat base = randn(rng, 3, 4);  // fixed: the function must be pure in b
    CHECK(grad_check(
              [&](const ad::Var& b) { return ad::sum_sq(ad::add_row(ad::constant(base), b)); },
              bias, 1e-5) < 1e-7);
}

TEST_CASE("nonlinearities pass finite-difference checks away from kinks") {
    Rng rng(304);
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::softmax_rows(x)); },
                     randn(rng, 3, 5), 1e-5) < 1e-7);
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::leaky_relu(x, 0.01)); },
                     away_from(rng, 3, 4, 1e-3), 1e-5) < 1e-7);
    // soft threshold: keep |x| away from the +-k kinks
    CHECK(grad_check(
              [&](const ad::Var& x) { return ad::sum_sq(ad::soft_threshold(x, 0.35)); },
              away_from(rng, 3, 4, 1e-3), 1e-5) < 1e-6);
    CHECK(grad_check([&](const ad::Var& x) { return ad::sum_sq(ad::l2_normalize_rows(x)); },
                     away_from(rng, 3, 4, 1e-2), 1e-5) < 1e-7);
}

TEST_CASE("scalar reductions pass finite-difference checks") {
    Rng rng(305);
    CHECK(grad_check([](const ad::Var& x) { return ad::l2_norm(x); },
                     away_from(rng, 3, 4, 1e-2), 1e-5) < 1e-7);
    CHECK(grad_check([](const ad::Var& x) { return ad::l1_norm(x); },
                     away_from(rng, 3, 4, 1e-2), 1e-5) < 1e-7);
    CHECK(grad_check([](const ad::Var& x) { return ad::mean_all(x); },
                     randn(rng, 3, 4), 1e-5) < 1e-9);
    const Mat other = randn(rng, 3, 4);
    CHECK(grad_check(
              [&](const ad::Var& x) { return ad::cosine_all(x, ad::constant(other)); },
              randn(rng, 3, 4), 1e-5) < 1e-7);
    CHECK(grad_check(
              [&](const ad::Var& x) { return ad::cosine_all(ad::constant(other), x); },
              randn(rng, 3, 4), 1e-5) < 1e-7);
    const std::vector<int> targets = {1, 0, 3};
    CHECK(grad_check(
              [&](const ad::Var& x) { return ad::cross_entropy_rows(x, targets); },
              randn(rng, 3, 5), 1e-5) < 1e-7);
}

TEST_CASE("cosine of identical and negated inputs is exactly +-1") {
    Rng rng(306);
    const Mat x = randn(rng, 2, 6);
    CHECK(ad::cosine_all(ad::constant(x), ad::constant(x))->value(0, 0) == 1.0);
    CHECK(ad::cosine_all(ad::constant(x), ad::constant(scale(x, -1.0)))->value(0, 0) == -1.0);
}

TEST_CASE("stop-gradient blocks the tape exactly") {
    Rng rng(307);
    const ad::Var x = ad::param(randn(rng, 2, 3));
    const ad::Var y = ad::sum_sq(ad::add(ad::stopgrad(x), x));
    ad::backward(y);
    // d/dx sum_sq(c + x) with c frozen at x: 2(c + x) = 4x, not 8x
    const Mat expect = scale(x->value, 4.0);
    CHECK(max_abs_diff(x->grad, expect) < 1e-12);

    const ad::Var z = ad::sum_sq(ad::stopgrad(x));
    // fresh graph over the same leaf; grads accumulate, so use a new leaf
    const ad::Var x2 = ad::param(randn(rng, 2, 3));
    const ad::Var z2 = ad::sum_sq(ad::stopgrad(x2));
    ad::backward(z2);
    CHECK(max_abs(x2->grad) == 0.0);
    (void)z;
}

TEST_CASE("straight-through forwards one value and routes the gradient unchanged") {
    Rng rng(308);
    const Mat hard = randn(rng, 2, 3);
    const ad::Var x = ad::param(randn(rng, 2, 3));
    const ad::Var st = ad::straight_through(hard, x);
    CHECK(max_abs_diff(st->value, hard) == 0.0);
    const ad::Var loss = ad::sum_sq(st);
    ad::backward(loss);
    // chain rule applied to the forwarded value, routed to x as-is
    CHECK(max_abs_diff(x->grad, scale(hard, 2.0)) < 1e-15);
}

TEST_CASE("straight-through rejects shape mismatches") {
    const ad::Var x = ad::param(Mat(2, 3));
    CHECK_THROWS_AS(ad::straight_through(Mat(3, 2), x), std::invalid_argument);
}

TEST_CASE("shared subgraphs accumulate gradients once per path") {
    const ad::Var x = ad::param(mat_from(1, 2, {1.0, 2.0}));
    const ad::Var two_x = ad::add(x, x);
    const ad::Var y = ad::sum_sq(two_x);  // 4 sum x^2, grad 8x
    ad::backward(y);
    CHECK(x->grad(0, 0) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(x->grad(0, 1) == doctest::Approx(16.0).epsilon(1e-15));
}

TEST_CASE("backward requires a scalar root") {
    const ad::Var x = ad::param(Mat(2, 2));
    CHECK_THROWS_AS(ad::backward(ad::add(x, x)), std::invalid_argument);
}

TEST_CASE("gather_rows checks index bounds") {
    const ad::Var x = ad::constant(Mat(3, 2));
    CHECK_THROWS_AS((ad::gather_rows(x, {0, 3})), std::invalid_argument);
    CHECK_THROWS_AS((ad::gather_rows(x, {-1})), std::invalid_argument);
}

TEST_CASE("l2_norm has zero gradient at the origin") {
    const ad::Var x = ad::param(Mat(2, 2));
    const ad::Var y = ad::l2_norm(x);
    ad::backward(y);
    CHECK(max_abs(x->grad) == 0.0);
}

TEST_CASE("l1_norm subgradient is zero at exact zeros") {
    const ad::Var x = ad::param(mat_from(1, 3, {0.0, 2.0, -3.0}));
    ad::backward(ad::l1_norm(x));
    CHECK(x->grad(0, 0) == 0.0);
    CHECK(x->grad(0, 1) == 1.0);
    CHECK(x->grad(0, 2) == -1.0);
}

TEST_CASE("the checker itself flags a broken gradient") {
    // stopgrad reports zero analytic gradient while finite differences see
    // the true slope, so the checker must return a large error.
    Rng rng(309);
    const double err = grad_check(
        [](const ad::Var& x) { return ad::sum_sq(ad::stopgrad(x)); },
        away_from(rng, 2, 2, 0.5), 1e-5);
    CHECK(err > 0.1);
}

TEST_CASE("grad_check validates its inputs") {
    CHECK_THROWS_AS(grad_check([](const ad::Var& x) { return ad::sum_sq(x); }, Mat(1, 1), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(grad_check([](const ad::Var& x) { return ad::sum_sq(x); }, Mat(1, 1), 1.0),
                    std::invalid_argument);
    // non-scalar loss
    CHECK_THROWS_AS(grad_check([](const ad::Var& x) { return ad::add(x, x); }, Mat(2, 2), 1e-5),
                    std::invalid_argument);
}

}  // TEST_SUITE

TEST_SUITE("loss_suite") {

TEST_CASE("every registered training-loss gradient verifies") {
    const auto cases = run_gradcheck_suite(424242, 2, 1e-5);
    CHECK(cases.size() == 9);
    for (const auto& c : cases) {
        INFO(c.name);
        CHECK(c.worst < 1e-4);
    }
}

}  // TEST_SUITE
