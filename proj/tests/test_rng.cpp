#include <cmath>
#include <vector>

#include "doctest.h"
#include "tk/rng.hpp"

using namespace tk;

TEST_CASE("rng streams are deterministic and seed-separated") {
    Rng a(42), b(42), c(43);
    bool same = true, diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        same = same && (va == b.next_u64());
        diff = diff || (va != c.next_u64());
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("derive_seed separates trajectory streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 5) == derive_seed(7, 5));
}

TEST_CASE("uniforms live in their intervals") {
    Rng r(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.open01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        const double v = r.uniform01();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("normal sampler moments") {
    Rng r(11);
    const int n = 200000;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s1 += x;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
    }
    s1 /= n;
    s2 /= n;
    s3 /= n;
    s4 /= n;
    CHECK(std::abs(s1) < 0.01);
    CHECK(s2 == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(s3) < 0.03);
    CHECK(s4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("exponential mean matches rate") {
    Rng r(13);
    double s = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += r.exponential(4.0);
    CHECK(s / n == doctest::Approx(0.25).epsilon(0.02));
}
