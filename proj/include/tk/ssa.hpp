#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

#include "tk/common.hpp"
#include "tk/params.hpp"
#include "tk/rng.hpp"

// Exact simulation of the TK continuous-time Markov chain by the direct
// Gillespie method. Channel layout is fixed for reproducibility:
//   [0, d)    autocatalytic k: A_k + A_{k+1} -> 2 A_{k+1}, rate kappa n_k n_{k+1}
//   [d, 2d)   inflow k:        0 -> A_k,                   rate lambda
//   [2d, 3d)  outflow k:       A_k -> 0,                   rate delta n_k
// All rates use the raw (count-level) constants of ModelParams.

namespace tk {

struct SsaOptions {
    std::uint64_t event_cap = 10'000'000'000ULL;  // guards runaway configurations
};

inline void propensities_into(const ModelParams& p, std::span<const std::int64_t> n,
                              std::span<double> a) {
    const int d = p.d;
    for (int k = 0; k < d; ++k)
        a[k] = p.kappa * static_cast<double>(n[k]) * static_cast<double>(n[cyc_next(k, d)]);
    for (int k = 0; k < d; ++k) a[d + k] = p.lambda;
    for (int k = 0; k < d; ++k) a[2 * d + k] = p.delta * static_cast<double>(n[k]);
}

inline Vec propensities(const ModelParams& p, const CountVec& n) {
    Vec a(3 * p.d);
    propensities_into(p, n, a);
    return a;
}

// Applies channel j's stoichiometry in place. Counts stay nonnegative because
// outflow k has zero propensity at n_k = 0.
inline void apply_channel(int j, int d, std::span<std::int64_t> n) {
    if (j < d) {
        --n[j];
        ++n[cyc_next(j, d)];
    } else if (j < 2 * d) {
        ++n[j - d];
    } else {
        --n[j - 2 * d];
    }
}

struct SsaStepResult {
    CountVec n;
    double t;
    int channel;
};

// One direct-method step from explicit uniforms:
//   t' = t - ln(u1)/a0, channel = first j with cumulative propensity >= u2*a0
// (ties resolve to the lower index).
inline SsaStepResult ssa_step(const ModelParams& p, const CountVec& n, double t, double u1,
                              double u2) {
    Vec a = propensities(p, n);
    double a0 = 0.0;
    for (double v : a) a0 += v;
    SsaStepResult out;
    out.t = t - std::log(u1) / a0;
    const double target = u2 * a0;
    double cum = 0.0;
    int pick = -1;
    for (std::size_t j = 0; j < a.size(); ++j) {
        cum += a[j];
        if (cum >= target && a[j] > 0.0) {
            pick = static_cast<int>(j);
            break;
        }
    }
    if (pick < 0) {  // cumulative roundoff overran; take the last active channel
        for (int j = static_cast<int>(a.size()) - 1; j >= 0; --j)
            if (a[j] > 0.0) {
                pick = j;
                break;
            }
    }
    out.channel = pick;
    out.n = n;
    apply_channel(pick, p.d, out.n);
    return out;
}

struct SimResultCtmc {
    CountVec state;
    double t = 0.0;
    std::uint64_t events = 0;
    bool stopped_by_observer = false;
};

// Observer hooks (all optional semantics documented at the call sites):
//   on_init(t, n)                 before the first event
//   on_interval(t0, t1, n)        state n held on [t0, t1)
//   on_event(t, n, channel)->bool state after the jump at t; false stops the run
template <class Observer>
SimResultCtmc simulate_ctmc(const ModelParams& p, CountVec n0, double t_end, std::uint64_t seed,
                            Observer&& obs, const SsaOptions& opts = {}) {
    if (!(t_end > 0.0)) throw simulation_error("t_end must be > 0");
    const int d = p.d;
    if (static_cast<int>(n0.size()) != d) throw simulation_error("initial state has wrong length");
    for (auto v : n0)
        if (v < 0) throw simulation_error("initial counts must be nonnegative");

    Rng rng(seed);
    CountVec n = std::move(n0);
    Vec a(3 * d);
    propensities_into(p, n, a);

    SimResultCtmc res;
    double t = 0.0;
    obs.on_init(t, n);

    // recompute only the channels whose inputs changed at the last jump
    auto refresh_species = [&](int k) {
        a[k] = p.kappa * static_cast<double>(n[k]) * static_cast<double>(n[cyc_next(k, d)]);
        const int km1 = cyc_prev(k, d);
        a[km1] = p.kappa * static_cast<double>(n[km1]) * static_cast<double>(n[k]);
        a[2 * d + k] = p.delta * static_cast<double>(n[k]);
    };

    while (true) {
        double a0 = 0.0;
        for (double v : a) a0 += v;  // a0 >= d*lambda > 0 always
        const double dt = -std::log(rng.open01()) / a0;
        const double t1 = t + dt;
        if (t1 >= t_end) {
            obs.on_interval(t, t_end, n);
            res.t = t_end;
            break;
        }
        obs.on_interval(t, t1, n);

        const double target = rng.uniform01() * a0;
        double cum = 0.0;
        int pick = -1;
        const int nch = 3 * d;
        for (int j = 0; j < nch; ++j) {
            cum += a[j];
            if (cum >= target && a[j] > 0.0) {
                pick = j;
                break;
            }
        }
        if (pick < 0) {
            for (int j = nch - 1; j >= 0; --j)
                if (a[j] > 0.0) {
                    pick = j;
                    break;
                }
        }

        apply_channel(pick, d, n);
        if (pick < d) {
            refresh_species(pick);
            refresh_species(cyc_next(pick, d));
        } else if (pick < 2 * d) {
            refresh_species(pick - d);
        } else {
            refresh_species(pick - 2 * d);
        }

        t = t1;
        if (++res.events > opts.event_cap)
            throw simulation_error("event budget exceeded (cap " +
                                   std::to_string(opts.event_cap) + "); runaway parameterization?");
        if (!obs.on_event(t, n, pick)) {
            res.t = t;
            res.stopped_by_observer = true;
            break;
        }
    }
    res.state = std::move(n);
    return res;
}

// No-op observer for runs where only the final state matters.
struct NullObserverCtmc {
    void on_init(double, const CountVec&) {}
    void on_interval(double, double, const CountVec&) {}
    bool on_event(double, const CountVec&, int) { return true; }
};

}  // namespace tk
