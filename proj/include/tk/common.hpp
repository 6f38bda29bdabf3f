#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tk {

using Vec = std::vector<double>;
using CountVec = std::vector<std::int64_t>;

// Error taxonomy. The CLI maps these onto exit codes: config errors -> 2,
// everything else -> 1 (verification failures are handled separately).
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct model_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

struct simulation_error : error {
    using error::error;
};

// Raised when a detector saw no event before the time horizon.
struct horizon_error : error {
    double elapsed;
    explicit horizon_error(double t)
        : error("no event before t_end (elapsed " + std::to_string(t) + ")"), elapsed(t) {}
};

struct quadrature_error : error {
    using error::error;
};

struct stats_error : error {
    using error::error;
};

// Cyclic species index: k-1 and k+1 wrap around, 0-based internally.
// Centralised so the CTMC, drift and covariance code cannot disagree.
inline int cyc_next(int k, int d) { return k + 1 == d ? 0 : k + 1; }
inline int cyc_prev(int k, int d) { return k == 0 ? d - 1 : k - 1; }

inline double sqr(double x) { return x * x; }

inline double l1_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

inline std::int64_t total_count(std::span<const std::int64_t> n) {
    std::int64_t s = 0;
    for (auto v : n) s += v;
    return s;
}

// Dense row-major matrix, just enough for coefficient work.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<std::size_t>(r) * c, 0.0);
    }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

}  // namespace tk
