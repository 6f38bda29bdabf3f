#pragma once

#include <string>

#include "tk/common.hpp"

namespace tk {

// Model parameters under the classical volume scaling
//   kappa = kappa'/V,   lambda = lambda'*V,   delta = delta'.
// Primed rates are the concentration-level constants; the raw triple drives
// the molecule-count CTMC. This struct is the single source of truth for
// both unit systems.
struct ModelParams {
    int d = 0;          // species count, >= 2
    double V = 0.0;     // volume scale
    double kappa_p = 0.0;
    double lambda_p = 0.0;
    double delta_p = 0.0;

    // derived raw CTMC rates
    double kappa = 0.0;
    double lambda = 0.0;
    double delta = 0.0;
};

inline ModelParams derive_params(int d, double V, double kappa_p, double lambda_p,
                                 double delta_p) {
    if (d < 2) throw model_error("species count d must be >= 2 (got " + std::to_string(d) + ")");
    if (!(V > 0.0)) throw model_error("volume V must be > 0");
    if (!(kappa_p > 0.0)) throw model_error("kappa' must be > 0");
    if (!(lambda_p > 0.0)) throw model_error("lambda' must be > 0");
    if (!(delta_p > 0.0)) throw model_error("delta' must be > 0");

    ModelParams p;
    p.d = d;
    p.V = V;
    p.kappa_p = kappa_p;
    p.lambda_p = lambda_p;
    p.delta_p = delta_p;
    p.kappa = kappa_p / V;
    p.lambda = lambda_p * V;
    p.delta = delta_p;
    return p;
}

}  // namespace tk
