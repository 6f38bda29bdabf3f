#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tk/cla.hpp"
#include "tk/common.hpp"
#include "tk/ensemble.hpp"
#include "tk/params.hpp"
#include "tk/ssa.hpp"
#include "tk/stats.hpp"

// Ensemble experiment protocols shared by the CLI and the acceptance suite.
// Event times are reported in the model's native time (the clock of the CTMC
// stochastic equation and of the SDER). The switching-time figures of the
// source experiments are stated in volume-scaled units tau/V; that conversion
// is applied by callers that compare against those reference values.

namespace tk {

enum class Backend { ctmc, cla, cla1d };

inline Backend parse_backend(const std::string& s) {
    if (s == "ctmc") return Backend::ctmc;
    if (s == "cla") return Backend::cla;
    if (s == "cla1d") return Backend::cla1d;
    throw config_error("unknown backend '" + s + "' (expected ctmc|cla|cla1d)");
}

struct StudyConfig {
    int n_traj = 1000;
    int threads = 1;
    std::uint64_t seed = 0;
    double horizon = 1e4;   // per-trajectory time budget
    double dt = 1e-3;       // CLA / CLA1D step
    double eps = 0.0;       // CLA extinction threshold (0 = boundary contact)
    double theta = 0.5;     // cycling dominance threshold
};

// Switching study: species 2 extinction from (0, 2V) counts / (0, 2)
// concentrations; d = 2 convention, general d accepted with the same shape.
inline EventStudy switching_study(const ModelParams& p, Backend backend, const StudyConfig& cfg) {
    const int d = p.d;
    auto runs = run_ensemble(cfg.n_traj, cfg.threads, cfg.seed,
                             [&](int, std::uint64_t seed) -> std::optional<double> {
        DetectorSpec spec;
        spec.kind = DetectorKind::switching;
        spec.target_species = 1;
        spec.extinction_eps = backend == Backend::ctmc ? 0.0 : cfg.eps;
        switch (backend) {
            case Backend::ctmc: {
                CountVec n0(d, 0);
                n0[1] = static_cast<std::int64_t>(2 * p.V);
                SwitchingDetector det(spec, d);
                det.on_init(0.0, n0);
                simulate_ctmc(p, std::move(n0), cfg.horizon, seed, det);
                return det.event_time;
            }
            case Backend::cla: {
                Vec x0(d, 0.0);
                x0[1] = 2.0;
                SwitchingDetector det(spec, d);
                det.on_init(0.0, x0);
                simulate_cla(p, std::move(x0), cfg.horizon, cfg.dt, seed, det);
                return det.event_time;
            }
            case Backend::cla1d: {
                // reduced model: S = Z^1 on [0, n], n = initial total
                // concentration 2; species 2 extinct when S hits n
                Cla1dParams q{p.V, p.kappa_p, p.lambda_p, p.delta_p};
                NullObserver1d obs;
                auto r = simulate_cla1d(q, 2.0, 0.0, cfg.horizon, cfg.dt, seed, true, obs);
                if (r.hit_n) return r.hit_time;
                return std::nullopt;
            }
        }
        return std::nullopt;
    });
    return collect_event_times(runs);
}

// Cycling study: second peak of species d from (0, ..., 0, dV) counts /
// (0, ..., 0, d) concentrations.
inline EventStudy cycling_study(const ModelParams& p, Backend backend, const StudyConfig& cfg) {
    if (backend == Backend::cla1d) throw config_error("cycling has no 1D reduced backend");
    const int d = p.d;
    auto runs = run_ensemble(cfg.n_traj, cfg.threads, cfg.seed,
                             [&](int, std::uint64_t seed) -> std::optional<double> {
        DetectorSpec spec;
        spec.kind = DetectorKind::cycling;
        spec.target_species = d - 1;
        spec.peak_fraction = cfg.theta;
        if (backend == Backend::ctmc) {
            CountVec n0(d, 0);
            n0[d - 1] = static_cast<std::int64_t>(d * p.V);
            CyclingDetector det(spec, d);
            det.on_init(0.0, n0);
            simulate_ctmc(p, std::move(n0), cfg.horizon, seed, det);
            if (det.event_time) return det.event_time;
            return det.provisional_peak();
        }
        Vec x0(d, 0.0);
        x0[d - 1] = static_cast<double>(d);
        CyclingDetector det(spec, d);
        det.on_init(0.0, x0);
        simulate_cla(p, std::move(x0), cfg.horizon, cfg.dt, seed, det);
        if (det.event_time) return det.event_time;
        return det.provisional_peak();
    });
    return collect_event_times(runs);
}

}  // namespace tk
