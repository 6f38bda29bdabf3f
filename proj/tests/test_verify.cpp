#include <cmath>

#include "doctest.h"
#include "tk/params.hpp"
#include "tk/verify.hpp"

using namespace tk;

TEST_CASE("ellipticity check passes and reports slack") {
    for (int d : {2, 3, 6}) {
        const auto p = derive_params(d, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
        const auto r = check_ellipticity(p, 10000, 100.0, 606 + d);
        CHECK(r.pass);
        CHECK(r.worst >= -1e-12);
    }
    // equality case: Gamma(0) = lambda' I, theta = e1 gives zero slack
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
    const Matrix g = covariance(p, {0.0, 0.0});
    CHECK(g(0, 0) - p.lambda_p == doctest::Approx(0.0));
}

TEST_CASE("coefficient identity suite passes for d in {2,3,6}") {
    int i = 0;
    for (int d : {2, 3, 6}) {
        const auto p = derive_params(d, 64.0, 1.3, 0.021, 0.017);
        const auto r = check_coefficient_identities(p, 10000, 707 + i++);
        INFO(r.name, " worst ", r.worst);
        CHECK(r.pass);
        CHECK(r.worst <= 1e-10);
    }
}

TEST_CASE("identities hold in closed form at special states") {
    const auto p = derive_params(3, 16.0, 1.0, 0.125, 0.25);
    // x = 0: both sides exactly
    {
        const Matrix g = covariance(p, {0.0, 0.0, 0.0});
        double gsum = 0.0;
        for (double v : g.a) gsum += v;
        CHECK(gsum == doctest::Approx(3 * p.lambda_p));
        double bsum = 0.0;
        for (double v : drift(p, {0.0, 0.0, 0.0})) bsum += v;
        CHECK(bsum == doctest::Approx(3 * p.lambda_p));
    }
    // symmetric point x = (l'/d') 1: b = 0, grad U . b = 0
    {
        const double c = p.lambda_p / p.delta_p;
        const Vec x(3, c);
        for (double v : drift(p, x)) CHECK(v == doctest::Approx(0.0));
        CHECK(lyapunov_drift_identities(p, x, 1).dot_b == doctest::Approx(0.0));
    }
}

TEST_CASE("total-mass law check: pass, burn-in stability, precondition") {
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
    const auto r = check_total_mass_poisson(p, 2e4, 808);
    INFO(r.note);
    CHECK(r.pass);

    CHECK_THROWS_AS(check_total_mass_poisson(p, 100.0, 1), stats_error);  // T delta < 50

    // doubling the burn-in moves the mean estimate by less than one batch SE
    TotalMassEstimates e1, e2;
    check_total_mass_poisson(p, 3e4, 809, {}, 0.1, &e1);
    check_total_mass_poisson(p, 3e4, 809, {}, 0.2, &e2);
    CHECK(std::abs(e1.mean - e2.mean) <= std::max(e1.se_mean, e2.se_mean));
}

TEST_CASE("bar residual accepts the true dynamics") {
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
    BumpC2 bump{{1.0, 1.0}, 0.5, 1.0};
    const auto r = bar_residual(p, bump, 4e3, 1e-3, 909);
    INFO(r.note);
    CHECK(r.pass);
}

TEST_CASE("bar residual rejects sign-flipped drift") {
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
    BumpC2 bump{{1.0, 1.0}, 0.5, 1.0};
    const auto r = bar_residual(p, bump, 2e3, 1e-3, 910, true);
    INFO(r.note);
    CHECK_FALSE(r.pass);
}

TEST_CASE("bar residual rejects bumps touching the boundary") {
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
    BumpC2 bad{{0.3, 1.0}, 0.5, 1.0};
    CHECK_THROWS_AS(bar_residual(p, bad, 100.0, 1e-3, 1), stats_error);
}

TEST_CASE("level-set uniformity holds in regime and fails off-regime") {
    // uniform regime: lambda' = delta' = 2/V with kappa' = 1
    const auto p = derive_params(2, 64.0, 1.0, 1.0 / 32, 1.0 / 32);
    const auto good = check_level_set_uniformity(p, 1e5, 1111);
    INFO(good.note, " worst TV ", good.worst);
    CHECK(good.pass);

    const auto bad_params = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
    CHECK_THROWS_AS(check_level_set_uniformity(bad_params, 1e4, 1), stats_error);
    const auto ctrl = check_level_set_uniformity(bad_params, 1e5, 1112, false);
    INFO(ctrl.note, " worst TV ", ctrl.worst);
    CHECK_FALSE(ctrl.pass);
    CHECK(ctrl.worst > 0.1);
}

TEST_CASE("check reports are reproducible bit for bit") {
    const auto p = derive_params(3, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
    const auto a = check_ellipticity(p, 5000, 50.0, 77);
    const auto b = check_ellipticity(p, 5000, 50.0, 77);
    CHECK(a.worst == b.worst);
    const auto c = check_total_mass_poisson(p, 1.6e4, 78);
    const auto d = check_total_mass_poisson(p, 1.6e4, 78);
    CHECK(c.worst == d.worst);
    CHECK(c.note == d.note);
}
