#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "ledt/rng.hpp"

using namespace ledt;

TEST_SUITE("rng") {

TEST_CASE("splitmix64 matches the reference first output") {
    // First output of the reference splitmix64 stream seeded with 0.
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafull);
}

TEST_CASE("fnv1a64 matches published vectors") {
    CHECK(fnv1a64_str("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64_str("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64_str("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("same seed reproduces the stream, different seeds diverge") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto xa = a.next_u64();
        all_equal = all_equal && (xa == b.next_u64());
        any_diff = any_diff || (xa != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("derive gives reproducible independent streams") {
    const Rng base(7);
    Rng d1 = base.derive(1);
    Rng d1b = base.derive(1);
    Rng d2 = base.derive(2);
    CHECK(d1.next_u64() == d1b.next_u64());
    CHECK(d1.next_u64() != d2.next_u64());
}

TEST_CASE("uniform stays in [0, 1) and respects bounds") {
    Rng r(5);
    for (int i = 0; i < 2000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 2000; ++i) {
        const double u = r.uniform(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("below covers every residue without bias artifacts") {
    Rng r(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK(r.below(1) == 0);
    CHECK_THROWS_AS(r.below(0), std::invalid_argument);
}

TEST_CASE("normal moments match a standard Gaussian") {
    Rng r(123);
    const int n = 20000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // 4-sigma bounds: sd of the sample mean is 1/sqrt(n).
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("scaled normal applies mean and sigma") {
    Rng r(9);
    const int n = 20000;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += r.normal(3.0, 0.5);
    CHECK(sum / n == doctest::Approx(3.0).epsilon(0.01));
    CHECK_THROWS_AS(r.normal(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("randn is deterministic in the generator state") {
    Rng a(77), b(77);
    const Mat ma = randn(a, 3, 4, 2.0);
    const Mat mb = randn(b, 3, 4, 2.0);
    CHECK(max_abs_diff(ma, mb) == 0.0);
    CHECK(ma.rows == 3);
    CHECK(ma.cols == 4);
}

}  // TEST_SUITE
