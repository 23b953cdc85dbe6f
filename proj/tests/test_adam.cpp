#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ledt/adam.hpp"
#include "ledt/rng.hpp"

using namespace ledt;

TEST_SUITE("adam") {

TEST_CASE("the first step moves each entry by lr toward minus the gradient") {
    // With bias correction, m_hat = g and v_hat = g^2 on step one, so the
    // update is lr * g / (|g| + eps') -- magnitude lr up to eps.
    Rng rng(401);
    Mat p = randn(rng, 2, 3);
    const Mat p0 = p;
    Mat g = randn(rng, 2, 3);
    for (double& v : g.data)
        if (std::abs(v) < 0.1) v += 0.2;  // keep gradients well away from 0

    AdamState st;
    AdamConfig cfg;
    cfg.lr = 1e-3;
    adam_step({&p}, {&g}, st, cfg);

    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double step = p0.data[i] - p.data[i];
        const double expect = cfg.lr * (g.data[i] > 0 ? 1.0 : -1.0);
        CHECK(step == doctest::Approx(expect).epsilon(1e-4));
    }
    CHECK(st.t == 1);
}

TEST_CASE("repeated steps with a constant gradient keep moving downhill") {
    Mat p = mat_from(1, 1, {1.0});
    const Mat g = mat_from(1, 1, {2.0});
    AdamState st;
    AdamConfig cfg;
    double prev = p(0, 0);
    for (int i = 0; i < 50; ++i) {
        adam_step({&p}, {&g}, st, cfg);
        CHECK(p(0, 0) < prev);
        prev = p(0, 0);
    }
    CHECK(st.t == 50);
}

TEST_CASE("state is positional and validates shapes") {
    Mat a(2, 2), b(1, 3);
    Mat ga(2, 2), gb(1, 3);
    AdamState st;
    AdamConfig cfg;
    adam_step({&a, &b}, {&ga, &gb}, st, cfg);
    CHECK(st.m.size() == 2);
    // swapping parameter shapes against a warm state must throw
    CHECK_THROWS_AS((adam_step({&b, &a}, {&gb, &ga}, st, cfg)), std::invalid_argument);
}

TEST_CASE("mismatched list lengths throw") {
    Mat a(2, 2), ga(2, 2);
    AdamState st;
    AdamConfig cfg;
    CHECK_THROWS_AS((adam_step({&a}, {}, st, cfg)), std::invalid_argument);
}

TEST_CASE("non-finite gradients are rejected") {
    Mat a(1, 1);
    Mat ga(1, 1);
    ga(0, 0) = std::numeric_limits<double>::quiet_NaN();
    AdamState st;
    AdamConfig cfg;
    CHECK_THROWS_AS((adam_step({&a}, {&ga}, st, cfg)), std::runtime_error);
}

}  // TEST_SUITE
