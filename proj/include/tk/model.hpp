#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>

#include "tk/common.hpp"
#include "tk/params.hpp"

// Closed-form coefficient functions of the constrained Langevin approximation
// and the quantities built from them (Lyapunov function, generator, adjoint).
// Everything here is a pure function of (params, state).

namespace tk {

// Drift b(x):  b_k = kappa'(x_{k-1} - x_{k+1}) x_k + lambda' - delta' x_k,
// cyclic indices. For d=2 the autocatalytic part cancels identically.
inline void drift_into(const ModelParams& p, std::span<const double> x, std::span<double> out) {
    const int d = p.d;
    for (int k = 0; k < d; ++k) {
        const double auto_term = p.kappa_p * (x[cyc_prev(k, d)] - x[cyc_next(k, d)]) * x[k];
        out[k] = auto_term + p.lambda_p - p.delta_p * x[k];
    }
}

inline Vec drift(const ModelParams& p, const Vec& x) {
    Vec out(p.d);
    drift_into(p, x, out);
    return out;
}

// Diffusion matrix Gamma(x), symmetric positive definite with
// <theta, Gamma theta> >= lambda' |theta|^2 on the nonnegative orthant.
inline void covariance_into(const ModelParams& p, std::span<const double> x, Matrix& out) {
    const int d = p.d;
    if (out.rows != d || out.cols != d) out.resize(d, d);
    out.zero();
    for (int k = 0; k < d; ++k) {
        const int kp1 = cyc_next(k, d);
        const int km1 = cyc_prev(k, d);
        out(k, k) = p.kappa_p * (x[km1] + x[kp1]) * x[k] + p.lambda_p + p.delta_p * x[k];
    }
    for (int k = 0; k < d; ++k) {
        const int kp1 = cyc_next(k, d);
        const double c = p.kappa_p * x[k] * x[kp1];
        out(k, kp1) -= c;  // accumulates: for d=2 both cyclic terms stack to -2 kappa' x1 x2
        out(kp1, k) -= c;
    }
}

inline Matrix covariance(const ModelParams& p, const Vec& x) {
    Matrix g;
    covariance_into(p, x, g);
    return g;
}

// Reflection direction gamma(x) = b(x)/|b(x)|. On the boundary |b| >= lambda'
// because b_i = lambda' wherever x_i = 0; a zero drift is only possible in the
// interior, where the reflection field is never consumed.
inline Vec reflection(const ModelParams& p, const Vec& x) {
    Vec b = drift(p, x);
    double norm2 = 0.0;
    for (double v : b) norm2 += v * v;
    if (norm2 == 0.0) throw model_error("degenerate drift: |b(x)| = 0, reflection undefined");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : b) v *= inv;
    return b;
}

// Number of independent noise channels of the rectangular factor sigma~.
inline int noise_cols(int d) { return d == 2 ? 3 : 2 * d; }

// Rectangular noise factor sigma~(x) with sigma~ sigma~^T = Gamma(x) exactly.
// Columns are reaction channels: one column per autocatalytic reaction,
// (e_{k+1} - e_k) sqrt(kappa' x_k x_{k+1}), then one per species,
// e_k sqrt(lambda' + delta' x_k). For d=2 the two autocatalytic channels
// coincide and merge into the single column (e_1 - e_2) sqrt(2 kappa' x1 x2).
inline void noise_into(const ModelParams& p, std::span<const double> x, Matrix& out) {
    const int d = p.d;
    const int m = noise_cols(d);
    if (out.rows != d || out.cols != m) out.resize(d, m);
    out.zero();
    if (d == 2) {
        const double a = std::sqrt(2.0 * p.kappa_p * x[0] * x[1]);
        out(0, 0) = a;
        out(1, 0) = -a;
        out(0, 1) = std::sqrt(p.lambda_p + p.delta_p * x[0]);
        out(1, 2) = std::sqrt(p.lambda_p + p.delta_p * x[1]);
        return;
    }
    for (int k = 0; k < d; ++k) {
        const int kp1 = cyc_next(k, d);
        const double a = std::sqrt(p.kappa_p * x[k] * x[kp1]);
        out(k, k) = -a;
        out(kp1, k) = a;
    }
    for (int k = 0; k < d; ++k) out(k, d + k) = std::sqrt(p.lambda_p + p.delta_p * x[k]);
}

inline Matrix noise_matrix(const ModelParams& p, const Vec& x) {
    Matrix s;
    noise_into(p, x, s);
    return s;
}

// Lyapunov function U^p(x) = (|x|_1 - d lambda'/delta')^{2p}.
inline double lyapunov(const ModelParams& p, std::span<const double> x, int pow) {
    const double s = l1_norm(x) - p.d * p.lambda_p / p.delta_p;
    return std::pow(s * s, pow);
}

struct LyapunovIdentities {
    double dot_b;  // grad U^p . b
    double gen;    // L U^p
};

// Closed forms for grad U^p . b and L U^p. Both follow from the exact
// coefficient sums  sum_i b_i = d lambda' - delta' |x|_1  and
// sum_ij Gamma_ij = d lambda' + delta' |x|_1:
//   grad U^p . b = -2 p delta' s^{2p},
//   L U^p = (p(2p-1)/V) s^{2p-2} (d lambda' + delta' |x|_1) - 2 p delta' s^{2p},
// with s = |x|_1 - d lambda'/delta'.
inline LyapunovIdentities lyapunov_drift_identities(const ModelParams& p,
                                                    std::span<const double> x, int pow) {
    const double mass = l1_norm(x);
    const double s = mass - p.d * p.lambda_p / p.delta_p;
    const double s2pm2 = std::pow(s * s, pow - 1);
    const double s2p = s2pm2 * s * s;
    LyapunovIdentities out;
    out.dot_b = -2.0 * pow * p.delta_p * s2p;
    out.gen = (pow * (2.0 * pow - 1.0) / p.V) * s2pm2 * (p.d * p.lambda_p + p.delta_p * mass) +
              out.dot_b;
    return out;
}

// Twice-differentiable test function with caller-supplied analytic
// derivatives; support_radius marks compact support when present.
struct TestFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Matrix(const Vec&)> hessian;  // d x d, symmetric
    std::optional<double> support_radius;
};

// L f(x) = (1/2V) sum_ij Gamma_ij(x) Hess f_ij(x) + sum_i b_i(x) grad f_i(x).
inline double generator_apply(const ModelParams& p, const TestFunction& f, const Vec& x) {
    const Matrix g = covariance(p, x);
    const Matrix h = f.hessian(x);
    const Vec gr = f.gradient(x);
    const Vec b = drift(p, x);
    double diff = 0.0;
    for (int i = 0; i < p.d; ++i)
        for (int j = 0; j < p.d; ++j) diff += g(i, j) * h(i, j);
    double adv = 0.0;
    for (int i = 0; i < p.d; ++i) adv += b[i] * gr[i];
    return diff / (2.0 * p.V) + adv;
}

namespace detail {

// c * x_i * x_j with i/j = -1 for absent factors (degree <= 2).
struct Monomial {
    double c;
    int i = -1;
    int j = -1;

    double value(std::span<const double> x) const {
        double v = c;
        if (i >= 0) v *= x[i];
        if (j >= 0) v *= x[j];
        return v;
    }
    double d1(int k, std::span<const double> x) const {
        double v = 0.0;
        if (i == k) v += c * (j >= 0 ? x[j] : 1.0);
        if (j == k) v += c * (i >= 0 ? x[i] : 1.0);
        return v;
    }
    double d2(int k, int l) const {
        double v = 0.0;
        if (i == k && j == l) v += c;
        if (i == l && j == k) v += c;
        return v;
    }
};

using Poly = std::vector<Monomial>;

inline double poly_val(const Poly& q, std::span<const double> x) {
    double s = 0.0;
    for (const auto& m : q) s += m.value(x);
    return s;
}
inline double poly_d1(const Poly& q, int k, std::span<const double> x) {
    double s = 0.0;
    for (const auto& m : q) s += m.d1(k, x);
    return s;
}
inline double poly_d2(const Poly& q, int k, int l) {
    double s = 0.0;
    for (const auto& m : q) s += m.d2(k, l);
    return s;
}

struct SparseEntry {
    int i, j;
    Poly poly;
};

// Gamma as 3d sparse polynomial entries; exact partials for the adjoint.
inline std::vector<SparseEntry> gamma_polys(const ModelParams& p) {
    const int d = p.d;
    std::vector<SparseEntry> out;
    out.reserve(3 * d);
    for (int k = 0; k < d; ++k) {
        Poly q;
        q.push_back({p.kappa_p, cyc_prev(k, d), k});
        q.push_back({p.kappa_p, k, cyc_next(k, d)});
        q.push_back({p.lambda_p, -1, -1});
        q.push_back({p.delta_p, k, -1});
        out.push_back({k, k, std::move(q)});
    }
    for (int k = 0; k < d; ++k) {
        // both orientations of channel k; for d=2 the k=0 and k=1 entries land
        // on the same (0,1)/(1,0) pair and stack, matching covariance_into
        const int kp1 = cyc_next(k, d);
        Poly q{{-p.kappa_p, k, kp1}};
        out.push_back({k, kp1, q});
        out.push_back({kp1, k, std::move(q)});
    }
    return out;
}

inline std::vector<Poly> drift_polys(const ModelParams& p) {
    const int d = p.d;
    std::vector<Poly> out(d);
    for (int k = 0; k < d; ++k) {
        out[k].push_back({p.kappa_p, cyc_prev(k, d), k});
        out[k].push_back({-p.kappa_p, k, cyc_next(k, d)});
        out[k].push_back({p.lambda_p, -1, -1});
        out[k].push_back({-p.delta_p, k, -1});
    }
    return out;
}

}  // namespace detail

// Adjoint L* q(x) = (1/2V) sum_ij d2/dxi dxj (Gamma_ij q) - sum_i d/dxi (b_i q),
// expanded by the product rule with exact polynomial partials of Gamma and b.
inline double adjoint_generator_apply(const ModelParams& p, const TestFunction& q, const Vec& x) {
    const Vec gr = q.gradient(x);
    const Matrix h = q.hessian(x);
    const double qv = q.value(x);

    double diff = 0.0;
    for (const auto& e : detail::gamma_polys(p)) {
        diff += detail::poly_val(e.poly, x) * h(e.i, e.j);
        diff += detail::poly_d1(e.poly, e.i, x) * gr[e.j];
        diff += detail::poly_d1(e.poly, e.j, x) * gr[e.i];
        diff += detail::poly_d2(e.poly, e.i, e.j) * qv;
    }
    double adv = 0.0;
    const auto bs = detail::drift_polys(p);
    for (int i = 0; i < p.d; ++i) {
        adv += detail::poly_val(bs[i], x) * gr[i];
        adv += detail::poly_d1(bs[i], i, x) * qv;
    }
    return diff / (2.0 * p.V) - adv;
}

// C^2 bump with compact support: f(x) = A (1 - |x-c|^2/r^2)_+^3.
// Support is the closed ball B(c, r); keep it inside the open orthant for
// stationarity tests (the reflection term then vanishes identically).
struct BumpC2 {
    Vec center;
    double radius = 1.0;
    double amplitude = 1.0;

    double value(std::span<const double> x) const {
        const double s = s_of(x);
        if (s >= 1.0) return 0.0;
        const double u = 1.0 - s;
        return amplitude * u * u * u;
    }

    void gradient_into(std::span<const double> x, std::span<double> out) const {
        const double s = s_of(x);
        const int d = static_cast<int>(center.size());
        if (s >= 1.0) {
            for (int i = 0; i < d; ++i) out[i] = 0.0;
            return;
        }
        const double u = 1.0 - s;
        const double f = -6.0 * amplitude * u * u / (radius * radius);
        for (int i = 0; i < d; ++i) out[i] = f * (x[i] - center[i]);
    }

    void hessian_into(std::span<const double> x, Matrix& out) const {
        const int d = static_cast<int>(center.size());
        if (out.rows != d || out.cols != d) out.resize(d, d);
        out.zero();
        const double s = s_of(x);
        if (s >= 1.0) return;
        const double u = 1.0 - s;
        const double r2 = radius * radius;
        const double diag = -6.0 * amplitude * u * u / r2;
        const double rank1 = 24.0 * amplitude * u / (r2 * r2);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j)
                out(i, j) = rank1 * (x[i] - center[i]) * (x[j] - center[j]);
            out(i, i) += diag;
        }
    }

    TestFunction to_test_function() const {
        BumpC2 b = *this;
        TestFunction f;
        f.value = [b](const Vec& x) { return b.value(x); };
        f.gradient = [b](const Vec& x) {
            Vec g(b.center.size());
            b.gradient_into(x, g);
            return g;
        };
        f.hessian = [b](const Vec& x) {
            Matrix h;
            b.hessian_into(x, h);
            return h;
        };
        f.support_radius = radius;
        return f;
    }

  private:
    double s_of(std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < center.size(); ++i) s += sqr(x[i] - center[i]);
        return s / (radius * radius);
    }
};

// U^p packaged as a TestFunction, for generator cross-checks.
inline TestFunction lyapunov_test_function(const ModelParams& p, int pow) {
    const double shift = p.d * p.lambda_p / p.delta_p;
    const int d = p.d;
    TestFunction f;
    f.value = [shift, pow](const Vec& x) {
        const double s = l1_norm(x) - shift;
        return std::pow(s * s, pow);
    };
    f.gradient = [shift, pow, d](const Vec& x) {
        const double s = l1_norm(x) - shift;
        const double g = 2.0 * pow * std::pow(s * s, pow - 1) * s;
        return Vec(d, g);
    };
    f.hessian = [shift, pow, d](const Vec& x) {
        const double s = l1_norm(x) - shift;
        const double h = 2.0 * pow * (2.0 * pow - 1.0) * std::pow(s * s, pow - 1);
        Matrix m(d, d);
        for (auto& v : m.a) v = h;
        return m;
    };
    return f;
}

}  // namespace tk
