#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tk/cla.hpp"
#include "tk/common.hpp"

// Deterministic quadrature of the expected exit time of the 1D reduced model
// on [0, n] (reflecting 0, absorbing n):
//
//   E_0[tau] = int_0^n 1/I(x) int_0^x vphi(y) I(y) dy dx,
//   phi(x)  = 2V (lambda' - delta' x) / den(x),
//   vphi(x) = 2V / den(x),
//   I(x)    = exp( int_0^x phi ),          den(x) = 2 kappa' x(n-x) + lambda' + delta' x.
//
// phi and vphi are distinct functions; the names are kept apart deliberately.
// All integrating factors are handled in log space: the inner integral is
// carried as g(x) = int_0^x vphi(y) exp(logI(y) - logI(x)) dy via a scaled
// prefix recurrence, so exp() is only ever applied to one-interval increments
// of logI and large V cannot overflow.

namespace tk {

struct QuadratureConfig {
    int grid_points = 64;      // initial Simpson grid (intervals); even, >= 64
    double refine_tol = 1e-6;  // relative agreement across grid doublings
    int max_doublings = 12;
};

struct ExitTimeResult {
    double value = 0.0;
    int grid_points_used = 0;
    double est_error = 0.0;  // |last doubling change|
};

namespace detail {

struct ExitCoeffs {
    double V, kp, lp, dp, n;
    double den(double x) const { return 2.0 * kp * x * (n - x) + lp + dp * x; }
    double phi(double x) const { return 2.0 * V * (lp - dp * x) / den(x); }
    double vphi(double x) const { return 2.0 * V / den(x); }
};

// Cumulative prefix integral of f on a uniform grid by local quadratic
// interpolation (three-point stencils), exact for quadratics.
inline std::vector<double> prefix_quadratic(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> p(n, 0.0);
    if (n < 3) {
        for (std::size_t i = 1; i < n; ++i) p[i] = p[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        return p;
    }
    p[1] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    for (std::size_t i = 2; i < n; ++i)
        p[i] = p[i - 1] + h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i]);
    return p;
}

struct ExitPass {
    double total = 0.0;        // E_0[tau]
    std::vector<double> tail;  // E_x[tau] on the grid nodes
};

// One evaluation on N intervals; also returns the full profile
// f(x_i) = E_{x_i}[tau] = total - int_0^{x_i} g.
inline ExitPass exit_time_pass(const ExitCoeffs& c, int N, bool want_profile) {
    const double h = c.n / N;
    std::vector<double> phi(N + 1), vphi(N + 1);
    for (int i = 0; i <= N; ++i) {
        const double x = h * i;
        phi[i] = c.phi(x);
        vphi[i] = c.vphi(x);
    }
    const std::vector<double> logI = prefix_quadratic(phi, h);

    // g_i = int_0^{x_i} vphi(y) e^{logI(y) - logI(x_i)} dy, by the same
    // three-point rule applied to the locally rescaled integrand.
    std::vector<double> g(N + 1, 0.0);
    if (N >= 2) {
        auto w = [&](int j, int i) { return vphi[j] * std::exp(logI[j] - logI[i]); };
        g[1] = h / 12.0 * (5.0 * w(0, 1) + 8.0 * w(1, 1) - w(2, 1));
        for (int i = 2; i <= N; ++i) {
            const double carry = g[i - 1] * std::exp(logI[i - 1] - logI[i]);
            g[i] = carry + h / 12.0 * (-w(i - 2, i) + 8.0 * w(i - 1, i) + 5.0 * w(i, i));
        }
    }

    ExitPass out;
    // composite Simpson over the even grid
    double s = g[0] + g[N];
    for (int i = 1; i < N; i += 2) s += 4.0 * g[i];
    for (int i = 2; i < N; i += 2) s += 2.0 * g[i];
    out.total = s * h / 3.0;
    if (want_profile) {
        const std::vector<double> pg = prefix_quadratic(g, h);
        out.tail.resize(N + 1);
        for (int i = 0; i <= N; ++i) out.tail[i] = out.total - pg[i];
    }
    return out;
}

inline void validate_exit_args(const Cla1dParams& p, double n, const QuadratureConfig& cfg) {
    validate(p);
    if (!(n > 0.0)) throw quadrature_error("interval cap n must be > 0");
    if (cfg.grid_points < 64 || cfg.grid_points % 2 != 0)
        throw quadrature_error("grid_points must be even and >= 64");
}

// Starting grid: resolve the integrating factor so one interval changes logI
// by at most ~2 (phi(0) = 2V can be large).
inline int initial_grid(const ExitCoeffs& c, int requested) {
    double phimax = 0.0;
    for (int i = 0; i <= 256; ++i) phimax = std::max(phimax, std::abs(c.phi(c.n * i / 256.0)));
    int n0 = requested;
    const double needed = c.n * phimax / 2.0;
    while (n0 < needed && n0 < (1 << 22)) n0 *= 2;
    return n0;
}

}  // namespace detail

inline ExitTimeResult expected_exit_time(const Cla1dParams& p, double n,
                                         const QuadratureConfig& cfg = {}) {
    detail::validate_exit_args(p, n, cfg);
    const detail::ExitCoeffs c{p.V, p.kappa_p, p.lambda_p, p.delta_p, n};
    int N = detail::initial_grid(c, cfg.grid_points);
    double prev = detail::exit_time_pass(c, N, false).total;
    for (int r = 0; r < cfg.max_doublings; ++r) {
        N *= 2;
        const double cur = detail::exit_time_pass(c, N, false).total;
        const double change = std::abs(cur - prev);
        if (change <= cfg.refine_tol * std::max(std::abs(cur), 1e-300))
            return {cur, N, change};
        prev = cur;
    }
    throw quadrature_error("exit-time quadrature did not converge after " +
                           std::to_string(cfg.max_doublings) + " grid doublings");
}

// E_x[tau] profile on a uniform grid with N intervals (N+1 nodes).
inline std::vector<double> exit_time_profile(const Cla1dParams& p, double n, int grid_intervals) {
    QuadratureConfig cfg;
    cfg.grid_points = std::max(64, grid_intervals);
    detail::validate_exit_args(p, n, cfg);
    const detail::ExitCoeffs c{p.V, p.kappa_p, p.lambda_p, p.delta_p, n};
    return detail::exit_time_pass(c, grid_intervals, true).tail;
}

// Direct-space evaluation (no log rescaling); overflows for large V and kept
// for the agreement property test at small V.
inline double expected_exit_time_direct(const Cla1dParams& p, double n, int N) {
    detail::ExitCoeffs c{p.V, p.kappa_p, p.lambda_p, p.delta_p, n};
    const double h = n / N;
    std::vector<double> phi(N + 1), integrand(N + 1);
    for (int i = 0; i <= N; ++i) phi[i] = c.phi(h * i);
    const std::vector<double> logI = detail::prefix_quadratic(phi, h);
    std::vector<double> inner(N + 1);
    for (int i = 0; i <= N; ++i) inner[i] = c.vphi(h * i) * std::exp(logI[i]);
    const std::vector<double> G = detail::prefix_quadratic(inner, h);
    for (int i = 0; i <= N; ++i) integrand[i] = G[i] * std::exp(-logI[i]);
    double s = integrand[0] + integrand[N];
    for (int i = 1; i < N; i += 2) s += 4.0 * integrand[i];
    for (int i = 2; i < N; i += 2) s += 2.0 * integrand[i];
    return s * h / 3.0;
}

// Max-norm residual of the exit-time boundary value problem
//   L f = -1 on (0, n),  f'(0) = 0,  f(n) = 0,
// for f given on a uniform grid, via second-order finite differences.
inline double solve_exit_bvp_residual(const Cla1dParams& p, double n,
                                      const std::vector<double>& f) {
    validate(p);
    if (f.size() < 65) throw quadrature_error("grid too coarse: need at least 65 nodes");
    const int N = static_cast<int>(f.size()) - 1;
    const double h = n / N;
    const detail::ExitCoeffs c{p.V, p.kappa_p, p.lambda_p, p.delta_p, n};
    double worst = 0.0;
    for (int i = 1; i < N; ++i) {
        const double x = h * i;
        const double fpp = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
        const double fp = (f[i + 1] - f[i - 1]) / (2.0 * h);
        const double Lf = c.den(x) / (2.0 * p.V) * fpp + (p.lambda_p - p.delta_p * x) * fp;
        worst = std::max(worst, std::abs(Lf + 1.0));
    }
    const double fp0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    worst = std::max(worst, std::abs(fp0));
    worst = std::max(worst, std::abs(f[N]));
    return worst;
}

}  // namespace tk
