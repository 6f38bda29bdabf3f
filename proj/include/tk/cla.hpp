#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "tk/common.hpp"
#include "tk/model.hpp"
#include "tk/rng.hpp"

// Numerical integration of the constrained Langevin approximation: explicit
// Euler-Maruyama proposals with an oblique pushback along gamma = b/|b| when
// a proposal leaves the nonnegative orthant. Local time is recorded in the
// normalization of the SDER, i.e. the applied correction is (1/sqrt(V)) gamma dL.

namespace tk {

struct ClaStepConfig {
    double dt = 1e-3;             // default step; callers may pass a shorter last step
    double clamp_floor = 0.0;     // tolerated negativity before the final snap to 0
    int max_reflection_iters = 8;
};

struct reflection_error : simulation_error {
    std::uint64_t step;
    explicit reflection_error(const std::string& what, std::uint64_t step_index)
        : simulation_error(what), step(step_index) {}
};

namespace detail {

struct ClaWorkspace {
    Vec b, y, gauss, gamma, clamped;
    Matrix sigma;

    void resize(int d, int m) {
        b.assign(d, 0.0);
        y.assign(d, 0.0);
        gauss.assign(m, 0.0);
        gamma.assign(d, 0.0);
        clamped.assign(d, 0.0);
        if (sigma.rows != d || sigma.cols != m) sigma.resize(d, m);
    }
};

// Pushback of an out-of-orthant proposal y along the state-dependent oblique
// direction. Each round solves for the smallest l >= 0 with y + l*gamma >= -floor
// (requires gamma_i > 0 on every violated face, which holds for the TK drift
// since b_i = lambda' where x_i = 0); gamma is re-evaluated at the clamped
// point between rounds because pushing along gamma can expose another face.
// Returns the accumulated multiplier sum(l).
inline double push_into_orthant(const ModelParams& p, Vec& y, const ClaStepConfig& cfg,
                                ClaWorkspace& ws, std::uint64_t step_index) {
    const int d = p.d;
    double total_l = 0.0;
    const double floor = cfg.clamp_floor;
    for (int iter = 0; iter < cfg.max_reflection_iters; ++iter) {
        bool violated = false;
        for (int i = 0; i < d; ++i)
            if (y[i] < -floor) {
                violated = true;
                break;
            }
        if (!violated) break;

        for (int i = 0; i < d; ++i) ws.clamped[i] = y[i] > 0.0 ? y[i] : 0.0;
        drift_into(p, ws.clamped, ws.gamma);
        double norm2 = 0.0;
        for (double v : ws.gamma) norm2 += v * v;
        if (norm2 == 0.0)
            throw reflection_error("degenerate reflection direction at boundary", step_index);
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : ws.gamma) v *= inv;

        double l = 0.0;
        int binding = -1;
        for (int i = 0; i < d; ++i) {
            if (y[i] < -floor) {
                if (!(ws.gamma[i] > 0.0))
                    throw reflection_error(
                        "reflection direction points out of the orthant on a violated face "
                        "(component " +
                            std::to_string(i) + "); dt too large or drift inconsistent",
                        step_index);
                const double li = (-floor - y[i]) / ws.gamma[i];
                if (li > l) {
                    l = li;
                    binding = i;
                }
            }
        }
        for (int i = 0; i < d; ++i) y[i] += l * ws.gamma[i];
        if (binding >= 0) y[binding] = -floor;  // kill roundoff dust on the binding face
        total_l += l;
    }
    for (int i = 0; i < d; ++i) {
        if (y[i] < 0.0) {
            if (y[i] < -floor - 1e-12)
                throw reflection_error("coordinate " + std::to_string(i) +
                                           " still negative after pushback iterations",
                                       step_index);
            y[i] = 0.0;  // residual negatives within the floor
        }
    }
    return total_l;
}

}  // namespace detail

struct ClaStepResult {
    Vec x;
    double dL = 0.0;  // local-time increment, sqrt(V) * sum of pushback multipliers
};

// One explicit step from caller-supplied standard normal draws:
//   y = x + b(x) dt + sqrt(dt/V) sigma~(x) xi,
// then the oblique pushback if y leaves the orthant.
inline ClaStepResult cla_step(const ModelParams& p, const Vec& x, double dt,
                              const Vec& gauss, const ClaStepConfig& cfg = {}) {
    const int d = p.d;
    const int m = noise_cols(d);
    if (static_cast<int>(gauss.size()) != m)
        throw simulation_error("gauss vector must have " + std::to_string(m) + " entries");
    detail::ClaWorkspace ws;
    ws.resize(d, m);
    drift_into(p, x, ws.b);
    noise_into(p, x, ws.sigma);
    const double noise_scale = std::sqrt(dt / p.V);
    ClaStepResult out;
    out.x.resize(d);
    for (int i = 0; i < d; ++i) {
        double nz = 0.0;
        for (int j = 0; j < m; ++j) nz += ws.sigma(i, j) * gauss[j];
        out.x[i] = x[i] + ws.b[i] * dt + noise_scale * nz;
    }
    bool inside = true;
    for (int i = 0; i < d; ++i)
        if (out.x[i] < 0.0) {
            inside = false;
            break;
        }
    if (!inside) out.dL = std::sqrt(p.V) * detail::push_into_orthant(p, out.x, cfg, ws, 0);
    return out;
}

struct SimResultCla {
    Vec state;
    double t = 0.0;
    double local_time = 0.0;
    std::uint64_t steps = 0;
    bool stopped_by_observer = false;
};

// Fixed-step path with ceil(t_end/dt) steps; the final step is shortened to
// land exactly on t_end. Observer hooks mirror simulate_ctmc:
//   on_init(t, x); on_interval(t0, t1, x) with x the pre-step state;
//   on_event(t1, x_new, dL) -> bool, false stops the run.
template <class Observer>
SimResultCla simulate_cla(const ModelParams& p, Vec x0, double t_end, double dt,
                          std::uint64_t seed, Observer&& obs, const ClaStepConfig& cfg = {}) {
    if (!(t_end > 0.0)) throw simulation_error("t_end must be > 0");
    if (!(dt > 0.0)) throw simulation_error("dt must be > 0");
    const int d = p.d;
    if (static_cast<int>(x0.size()) != d) throw simulation_error("initial state has wrong length");
    for (double v : x0)
        if (v < 0.0) throw simulation_error("initial state must be nonnegative");

    Rng rng(seed);
    detail::ClaWorkspace ws;
    const int m = noise_cols(d);
    ws.resize(d, m);
    Vec x = std::move(x0);

    SimResultCla res;
    double t = 0.0;
    obs.on_init(t, x);
    const double noise_base = 1.0 / std::sqrt(p.V);
    const double sqrtV = std::sqrt(p.V);

    while (t < t_end) {
        const double h = std::min(dt, t_end - t);
        if (!(h > 0.0) || t + h == t) break;  // spent the representable budget
        drift_into(p, x, ws.b);
        noise_into(p, x, ws.sigma);
        for (int j = 0; j < m; ++j) ws.gauss[j] = rng.normal();
        const double ns = noise_base * std::sqrt(h);
        for (int i = 0; i < d; ++i) {
            double nz = 0.0;
            for (int j = 0; j < m; ++j) nz += ws.sigma(i, j) * ws.gauss[j];
            ws.y[i] = x[i] + ws.b[i] * h + ns * nz;
        }
        double dL = 0.0;
        bool inside = true;
        for (int i = 0; i < d; ++i)
            if (ws.y[i] < 0.0) {
                inside = false;
                break;
            }
        if (!inside) dL = sqrtV * detail::push_into_orthant(p, ws.y, cfg, ws, res.steps);

        obs.on_interval(t, t + h, x);
        x.swap(ws.y);
        t += h;
        res.local_time += dL;
        ++res.steps;
        if (!obs.on_event(t, x, dL)) {
            res.stopped_by_observer = true;
            break;
        }
    }
    res.state = std::move(x);
    res.t = t;
    return res;
}

struct NullObserverCla {
    void on_init(double, const Vec&) {}
    void on_interval(double, double, const Vec&) {}
    bool on_event(double, const Vec&, double) { return true; }
};

// ----------------------------------------------------------------------------
// 1D reduced model on [0, n]:
//   dS = (lambda' - delta' S) dt
//      + (1/sqrt(V)) sqrt(2 kappa' S (n-S) + lambda' + delta' S) dW + m(S) dL,
// with inward normals m(0) = +1, m(n) = -1. The raw coefficient struct admits
// kappa' = 0 and delta' = 0 (closed-form regression cases) that ModelParams
// rejects.
// ----------------------------------------------------------------------------

struct Cla1dParams {
    double V = 1.0;
    double kappa_p = 0.0;
    double lambda_p = 0.0;
    double delta_p = 0.0;
};

inline void validate(const Cla1dParams& p) {
    if (!(p.V > 0.0)) throw model_error("V must be > 0");
    if (!(p.lambda_p > 0.0)) throw model_error("lambda' must be > 0");
    if (p.kappa_p < 0.0 || p.delta_p < 0.0) throw model_error("rates must be >= 0");
}

struct Cla1dResult {
    double s = 0.0;
    double t = 0.0;
    double local_time = 0.0;
    bool hit_n = false;
    double hit_time = 0.0;  // linearly interpolated when stop_at_n fired
    std::uint64_t steps = 0;
};

// Euler-Maruyama with symmetrized (mirror) reflection at 0, and at n when the
// run is free; with stop_at_n the upper end is absorbing and the crossing time
// is interpolated within the step. Observer: on_sample(t, s, L) per step,
// returning false to stop.
template <class Observer>
Cla1dResult simulate_cla1d(const Cla1dParams& p, double n, double s0, double t_end, double dt,
                           std::uint64_t seed, bool stop_at_n, Observer&& obs) {
    validate(p);
    if (!(n > 0.0)) throw simulation_error("interval cap n must be > 0");
    if (s0 < 0.0 || s0 > n) throw simulation_error("s0 must lie in [0, n]");
    if (!(t_end > 0.0) || !(dt > 0.0)) throw simulation_error("t_end and dt must be > 0");

    Rng rng(seed);
    Cla1dResult res;
    double s = s0;
    double t = 0.0;
    const double inv_sqrtV = 1.0 / std::sqrt(p.V);
    obs.on_sample(t, s, res.local_time);

    while (t < t_end) {
        const double h = std::min(dt, t_end - t);
        const double diff2 = 2.0 * p.kappa_p * s * (n - s) + p.lambda_p + p.delta_p * s;
        const double prop =
            s + (p.lambda_p - p.delta_p * s) * h + inv_sqrtV * std::sqrt(diff2 * h) * rng.normal();
        ++res.steps;
        if (stop_at_n && prop >= n) {
            const double frac = (n - s) / (prop - s);
            res.hit_n = true;
            res.hit_time = t + frac * h;
            res.t = res.hit_time;
            res.s = n;
            return res;
        }
        double next = prop;
        for (int fold = 0; fold < 64; ++fold) {  // mirror until inside [0, n]
            if (next < 0.0) {
                res.local_time += -2.0 * next;  // |reflected - proposal|
                next = -next;
            } else if (!stop_at_n && next > n) {
                res.local_time += 2.0 * (next - n);
                next = 2.0 * n - next;
            } else {
                break;
            }
        }
        if (next < 0.0) next = 0.0;  // pathological giant step
        if (!stop_at_n && next > n) next = n;
        s = next;
        t += h;
        if (!obs.on_sample(t, s, res.local_time)) break;
    }
    res.s = s;
    res.t = t;
    return res;
}

struct NullObserver1d {
    bool on_sample(double, double, double) { return true; }
};

}  // namespace tk
