#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tk/common.hpp"

// Observables, estimators and event detectors. Detectors and accumulators are
// written as simulator observers (streaming); thin wrappers at the bottom
// apply them to stored paths.

namespace tk {

// ----------------------------------------------------------------------------
// Sampled paths
// ----------------------------------------------------------------------------

struct SampledPath {
    int dim = 0;
    std::vector<double> times;   // strictly increasing
    std::vector<double> states;  // row-major, times.size() x dim
    std::vector<double> local_time;  // cumulative; all zero for CTMC paths

    std::size_t size() const { return times.size(); }
    std::span<const double> state(std::size_t i) const {
        return {states.data() + i * dim, static_cast<std::size_t>(dim)};
    }
    void push(double t, std::span<const double> x, double L) {
        times.push_back(t);
        states.insert(states.end(), x.begin(), x.end());
        local_time.push_back(L);
    }
};

// Records states on a uniform grid of spacing sample_dt (0 keeps every event).
// For jump processes the held state is sampled at every grid time inside the
// holding interval; for the CLA the post-step state at step boundaries is kept.
struct PathRecorder {
    double sample_dt = 0.0;
    SampledPath path;

    explicit PathRecorder(int dim, double sample_dt_ = 0.0) : sample_dt(sample_dt_) {
        path.dim = dim;
    }

    void on_init(double t, const CountVec& n) { record_counts(t, n); }
    void on_init(double t, const Vec& x) {
        path.push(t, x, 0.0);
        next_ = t + sample_dt;
    }

    void on_interval(double t0, double t1, const CountVec& n) {
        if (sample_dt <= 0.0) return;
        // grid points in (t0, t1): state is held there
        double g = (std::floor(t0 / sample_dt) + 1.0) * sample_dt;
        for (; g < t1; g += sample_dt) record_counts(g, n);
    }
    void on_interval(double, double, const Vec&) {}

    bool on_event(double t, const CountVec& n, int) {
        if (sample_dt <= 0.0) record_counts(t, n);
        return true;
    }
    bool on_event(double t, const Vec& x, double dL) {
        cum_L_ += dL;
        if (sample_dt <= 0.0) {
            path.push(t, x, cum_L_);
        } else if (t + 1e-12 >= next_) {
            path.push(t, x, cum_L_);
            next_ += sample_dt * std::max(1.0, std::floor((t - next_) / sample_dt) + 1.0);
        }
        return true;
    }

  private:
    void record_counts(double t, const CountVec& n) {
        buf_.resize(n.size());
        for (std::size_t i = 0; i < n.size(); ++i) buf_[i] = static_cast<double>(n[i]);
        path.push(t, buf_, 0.0);
    }
    Vec buf_;
    double cum_L_ = 0.0;
    double next_ = 0.0;
};

// ----------------------------------------------------------------------------
// Weighted occupation histograms
// ----------------------------------------------------------------------------

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 1;

    int index(double v) const {
        if (v <= lo) return 0;
        if (v >= hi) return bins - 1;  // clamp keeps total mass = total time
        int i = static_cast<int>((v - lo) / (hi - lo) * bins);
        return std::min(i, bins - 1);
    }
    double edge(int i) const { return lo + (hi - lo) * i / bins; }
    double width() const { return (hi - lo) / bins; }
};

struct WeightedHistogram {
    int dims = 1;
    Axis ax;      // first axis
    Axis ay;      // second axis (dims == 2 only)
    std::vector<double> mass;
    double total_time = 0.0;

    static WeightedHistogram make1d(double lo, double hi, int bins) {
        WeightedHistogram h;
        h.dims = 1;
        h.ax = {lo, hi, bins};
        h.mass.assign(bins, 0.0);
        return h;
    }
    static WeightedHistogram make2d(Axis x, Axis y) {
        WeightedHistogram h;
        h.dims = 2;
        h.ax = x;
        h.ay = y;
        h.mass.assign(static_cast<std::size_t>(x.bins) * y.bins, 0.0);
        return h;
    }

    void add(double v, double w) {
        mass[ax.index(v)] += w;
        total_time += w;
    }
    void add2(double vx, double vy, double w) {
        mass[static_cast<std::size_t>(ax.index(vx)) * ay.bins + ay.index(vy)] += w;
        total_time += w;
    }

    // occupation fractions; sums to 1 when total_time > 0
    std::vector<double> normalized() const {
        std::vector<double> out(mass.size(), 0.0);
        if (total_time > 0.0)
            for (std::size_t i = 0; i < mass.size(); ++i) out[i] = mass[i] / total_time;
        return out;
    }

    void merge(const WeightedHistogram& other) {
        if (mass.size() != other.mass.size()) throw stats_error("merging incompatible histograms");
        for (std::size_t i = 0; i < mass.size(); ++i) mass[i] += other.mass[i];
        total_time += other.total_time;
    }
};

// ----------------------------------------------------------------------------
// Summary statistics
// ----------------------------------------------------------------------------

struct SummaryStats {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;   // unbiased; 0 when n < 2
    double std_error = 0.0;  // sqrt(variance / n)
};

inline SummaryStats summarize(std::span<const double> samples) {
    if (samples.empty()) throw stats_error("summarize: empty sample set");
    SummaryStats s;
    s.n = samples.size();
    double acc = 0.0;
    for (double v : samples) acc += v;
    s.mean = acc / static_cast<double>(s.n);
    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : samples) ss += sqr(v - s.mean);
        s.variance = ss / static_cast<double>(s.n - 1);
        s.std_error = std::sqrt(s.variance / static_cast<double>(s.n));
    }
    return s;
}

// Batch-means accumulator over a fixed time window: the window splits into k
// equal batches and time-weighted averages are kept per batch. Standard errors
// come from the spread of batch means.
struct BatchMeans {
    double t_begin = 0.0;
    double t_end = 0.0;
    int batches = 10;
    std::vector<double> weighted_sum;  // integral of the observable per batch
    std::vector<double> time_in_batch;

    BatchMeans(double t0, double t1, int k) : t_begin(t0), t_end(t1), batches(k) {
        weighted_sum.assign(k, 0.0);
        time_in_batch.assign(k, 0.0);
    }

    void add(double t0, double t1, double value) {
        // clip to the window and split across batch boundaries
        t0 = std::max(t0, t_begin);
        t1 = std::min(t1, t_end);
        if (t1 <= t0) return;
        const double bw = (t_end - t_begin) / batches;
        int b0 = std::min(static_cast<int>((t0 - t_begin) / bw), batches - 1);
        while (t0 < t1) {
            const double edge = t_begin + bw * (b0 + 1);
            const double seg = std::min(t1, edge) - t0;
            if (seg > 0.0) {
                weighted_sum[b0] += seg * value;
                time_in_batch[b0] += seg;
            }
            t0 = edge;
            ++b0;
            if (b0 >= batches) break;
        }
    }

    double mean() const {
        double w = 0.0, t = 0.0;
        for (int b = 0; b < batches; ++b) {
            w += weighted_sum[b];
            t += time_in_batch[b];
        }
        return t > 0.0 ? w / t : 0.0;
    }

    // standard error of the time average, from the batch means
    double std_error() const {
        std::vector<double> means;
        for (int b = 0; b < batches; ++b)
            if (time_in_batch[b] > 0.0) means.push_back(weighted_sum[b] / time_in_batch[b]);
        if (means.size() < 2) return 0.0;
        double m = 0.0;
        for (double v : means) m += v;
        m /= static_cast<double>(means.size());
        double ss = 0.0;
        for (double v : means) ss += sqr(v - m);
        const double var = ss / static_cast<double>(means.size() - 1);
        return std::sqrt(var / static_cast<double>(means.size()));
    }
};

// ----------------------------------------------------------------------------
// Event detectors
// ----------------------------------------------------------------------------

enum class DetectorKind { switching, cycling };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::switching;
    double extinction_eps = 0.0;  // CLA switching threshold; 1/(2V) by convention
    double peak_fraction = 0.5;   // theta: dominance-episode threshold for cycling
    int target_species = 1;       // 0-based index
};

inline void validate(const DetectorSpec& s, int d) {
    if (s.peak_fraction <= 0.0 || s.peak_fraction > 1.0)
        throw stats_error("peak fraction theta must lie in (0, 1]");
    if (s.extinction_eps < 0.0) throw stats_error("extinction_eps must be >= 0");
    if (s.target_species < 0 || s.target_species >= d)
        throw stats_error("target species out of range");
}

// First time the target count reaches 0 (CTMC) or drops to extinction_eps
// (CLA, linearly interpolated within the step).
struct SwitchingDetector {
    int target;
    double eps;
    std::optional<double> event_time;

    SwitchingDetector(const DetectorSpec& spec, int d) : target(spec.target_species), eps(spec.extinction_eps) {
        validate(spec, d);
    }

    void on_init(double t, const CountVec& n) {
        if (n[target] == 0) event_time = t;
    }
    void on_init(double t, const Vec& x) {
        prev_ = x[target];
        if (prev_ <= eps) event_time = t;
    }
    void on_interval(double, double, const CountVec&) {}
    void on_interval(double t0, double, const Vec& x) {
        prev_ = x[target];
        prev_t_ = t0;
    }
    bool on_event(double t, const CountVec& n, int) {
        if (!event_time && n[target] == 0) event_time = t;
        return !event_time.has_value();
    }
    bool on_event(double t, const Vec& x, double) {
        if (!event_time && x[target] <= eps) {
            const double a = prev_ - eps;
            const double b = prev_ - x[target];
            const double frac = (b > 0.0 && a > 0.0) ? std::min(a / b, 1.0) : 1.0;
            event_time = prev_t_ + frac * (t - prev_t_);
        }
        return !event_time.has_value();
    }

  private:
    double prev_ = 0.0;
    double prev_t_ = 0.0;
};

// Peak-abundance detector for cycling times. A dominance episode opens when
// the target-species fraction x_target/|x|_1 crosses theta upward while armed
// (the detector re-arms only after the fraction falls below theta/2, a
// hysteresis band against chatter) and closes when the fraction drops back
// below theta. "Peak abundance" is the maximum of the fraction within an
// episode, so the recorded time is where the species actually peaks, not
// where it first crosses the threshold. Starting from all mass in the target
// species, episode 1 opens at t = 0; the requested event is the peak of
// episode `wanted_edges` (2 by default: the second time the species peaks).
struct CyclingDetector {
    int target;
    double theta;
    int wanted_edges;
    std::optional<double> event_time;
    std::vector<double> edge_times;  // episode opening times

    CyclingDetector(const DetectorSpec& spec, int d, int wanted = 2)
        : target(spec.target_species), theta(spec.peak_fraction), wanted_edges(wanted) {
        validate(spec, d);
    }

    void on_init(double t, const CountVec& n) { check(t, fraction(n)); }
    void on_init(double t, const Vec& x) { check(t, fraction(x)); }
    void on_interval(double, double, const CountVec&) {}
    void on_interval(double, double, const Vec&) {}
    bool on_event(double t, const CountVec& n, int) { return check(t, fraction(n)); }
    bool on_event(double t, const Vec& x, double) { return check(t, fraction(x)); }

    // Peak of a still-open final episode (horizon ended mid-episode).
    std::optional<double> provisional_peak() const {
        if (in_episode_ && static_cast<int>(edge_times.size()) == wanted_edges)
            return peak_time_;
        return std::nullopt;
    }

  private:
    double fraction(const CountVec& n) const {
        const auto tot = total_count(n);
        return tot > 0 ? static_cast<double>(n[target]) / static_cast<double>(tot) : 0.0;
    }
    double fraction(const Vec& x) const {
        const double tot = l1_norm(x);
        return tot > 0.0 ? x[target] / tot : 0.0;
    }
    bool check(double t, double frac) {
        if (event_time) return false;
        if (in_episode_) {
            if (frac > peak_frac_) {
                peak_frac_ = frac;
                peak_time_ = t;
            }
            if (frac < theta) {  // episode closes; finalize its peak
                in_episode_ = false;
                if (static_cast<int>(edge_times.size()) >= wanted_edges) {
                    event_time = peak_time_;
                    return false;
                }
            }
            return true;
        }
        if (!armed_ && frac < theta / 2.0) armed_ = true;
        if (armed_ && frac >= theta) {
            edge_times.push_back(t);
            armed_ = false;
            in_episode_ = true;
            peak_frac_ = frac;
            peak_time_ = t;
        }
        return true;
    }
    bool armed_ = true;
    bool in_episode_ = false;
    double peak_frac_ = 0.0;
    double peak_time_ = 0.0;
};

// ----------------------------------------------------------------------------
// Occupation observers
// ----------------------------------------------------------------------------

// Time-weighted occupation of a scalar projection of the state.
template <class Proj>
struct Occupation1d {
    WeightedHistogram hist;
    Proj proj;

    Occupation1d(WeightedHistogram h, Proj pr) : hist(std::move(h)), proj(std::move(pr)) {}

    void on_init(double, const CountVec&) {}
    void on_init(double, const Vec&) {}
    template <class State>
    void on_interval(double t0, double t1, const State& s) {
        hist.add(proj(s), t1 - t0);
    }
    bool on_event(double, const CountVec&, int) { return true; }
    bool on_event(double, const Vec&, double) { return true; }
};

// Joint occupation of two scalar projections, with an optional condition.
template <class ProjX, class ProjY, class Cond>
struct Occupation2d {
    WeightedHistogram hist;
    ProjX px;
    ProjY py;
    Cond cond;

    Occupation2d(WeightedHistogram h, ProjX x, ProjY y, Cond c)
        : hist(std::move(h)), px(std::move(x)), py(std::move(y)), cond(std::move(c)) {}

    void on_init(double, const CountVec&) {}
    void on_init(double, const Vec&) {}
    template <class State>
    void on_interval(double t0, double t1, const State& s) {
        if (cond(s)) hist.add2(px(s), py(s), t1 - t0);
    }
    bool on_event(double, const CountVec&, int) { return true; }
    bool on_event(double, const Vec&, double) { return true; }
};

// Odd/even disparity B(t) = (1/(dV)) sum_i (x_{2i-1} - x_{2i}), d even; the
// the 6V normalization generalized to dV.
inline double disparity(std::span<const double> x, double V) {
    const int d = static_cast<int>(x.size());
    if (d % 2 != 0) throw stats_error("disparity B(t) requires an even species count");
    double s = 0.0;
    for (int i = 0; i + 1 < d; i += 2) s += x[i] - x[i + 1];
    return s / (d * V);
}

inline double disparity_counts(std::span<const std::int64_t> n, double V) {
    const int d = static_cast<int>(n.size());
    if (d % 2 != 0) throw stats_error("disparity B(t) requires an even species count");
    double s = 0.0;
    for (int i = 0; i + 1 < d; i += 2) s += static_cast<double>(n[i] - n[i + 1]);
    return s / (d * V);
}

// ----------------------------------------------------------------------------
// Conditional level-set occupation (d = 2 CTMC): occupation of X^1 on each
// total-count level set, for the uniformity diagnostics.
// ----------------------------------------------------------------------------

struct LevelSetOccupation {
    std::map<std::int64_t, std::vector<double>> occupation;  // level -> time at X1 = k
    double total_time = 0.0;

    void on_init(double, const CountVec&) {}
    void on_interval(double t0, double t1, const CountVec& n) {
        const auto tot = total_count(n);
        auto& v = occupation[tot];
        if (v.size() < static_cast<std::size_t>(tot + 1)) v.resize(tot + 1, 0.0);
        v[static_cast<std::size_t>(n[0])] += t1 - t0;
        total_time += t1 - t0;
    }
    bool on_event(double, const CountVec&, int) { return true; }

    // total-variation distance of the conditional law on {|n|=level} to uniform
    double tv_to_uniform(std::int64_t level) const {
        const auto it = occupation.find(level);
        if (it == occupation.end()) throw stats_error("level never occupied");
        double t = 0.0;
        for (double w : it->second) t += w;
        if (t <= 0.0) throw stats_error("level never occupied");
        const double u = 1.0 / static_cast<double>(level + 1);
        double tv = 0.0;
        for (std::int64_t k = 0; k <= level; ++k) {
            const double p = (static_cast<std::size_t>(k) < it->second.size())
                                 ? it->second[static_cast<std::size_t>(k)] / t
                                 : 0.0;
            tv += std::abs(p - u);
        }
        return 0.5 * tv;
    }
    double level_time(std::int64_t level) const {
        const auto it = occupation.find(level);
        if (it == occupation.end()) return 0.0;
        double t = 0.0;
        for (double w : it->second) t += w;
        return t;
    }
};

// ----------------------------------------------------------------------------
// Composite observer
// ----------------------------------------------------------------------------

template <class... Obs>
struct Fanout {
    std::tuple<Obs&...> obs;
    explicit Fanout(Obs&... o) : obs(o...) {}

    template <class State>
    void on_init(double t, const State& s) {
        std::apply([&](auto&... o) { (o.on_init(t, s), ...); }, obs);
    }
    template <class State>
    void on_interval(double t0, double t1, const State& s) {
        std::apply([&](auto&... o) { (o.on_interval(t0, t1, s), ...); }, obs);
    }
    template <class State, class Tag>
    bool on_event(double t, const State& s, Tag tag) {
        bool keep = true;
        std::apply([&](auto&... o) { ((keep = o.on_event(t, s, tag) && keep), ...); }, obs);
        return keep;
    }
};

template <class... Obs>
Fanout<Obs...> fanout(Obs&... o) {
    return Fanout<Obs...>(o...);
}

// ----------------------------------------------------------------------------
// Path-level operations, defined on stored SampledPaths by
// replaying the holding intervals.
// ----------------------------------------------------------------------------

namespace detail {

// Replay a stored path through an observer. Interval i covers
// [t_i, t_{i+1}) with state(i); the final sample closes the path.
template <class Obs>
void replay(const SampledPath& path, Obs& obs) {
    if (path.size() == 0) throw stats_error("empty path");
    Vec xv(path.dim);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto x = path.state(i);
        xv.assign(x.begin(), x.end());
        obs.on_interval(path.times[i], path.times[i + 1], xv);
    }
}

}  // namespace detail

inline WeightedHistogram occupation_histogram(const SampledPath& path, WeightedHistogram bins,
                                              int species) {
    if (path.size() == 0) throw stats_error("empty path");
    auto proj = [species](const Vec& x) { return x[species]; };
    Occupation1d<decltype(proj)> obs(std::move(bins), proj);
    detail::replay(path, obs);
    return obs.hist;
}

// Switching time on a stored path: first sample time with the target at/below
// the threshold (0 for integer count paths).
inline double switching_time(const SampledPath& path, const DetectorSpec& spec) {
    if (path.size() == 0) throw stats_error("empty path");
    validate(spec, path.dim);
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path.state(i)[spec.target_species] <= spec.extinction_eps) return path.times[i];
    }
    throw horizon_error(path.times.back());
}

// Cycling time on a stored path: peak time of the wanted dominance episode.
inline double cycling_time(const SampledPath& path, const DetectorSpec& spec) {
    if (path.size() == 0) throw stats_error("empty path");
    CyclingDetector det(spec, path.dim);
    for (std::size_t i = 0; i < path.size(); ++i) {
        Vec x(path.state(i).begin(), path.state(i).end());
        if (i == 0)
            det.on_init(path.times[i], x);
        else
            det.on_event(path.times[i], x, 0.0);
        if (det.event_time) return *det.event_time;
    }
    throw horizon_error(path.times.back());
}

// B(t) series along a stored path.
inline std::vector<double> odd_even_disparity(const SampledPath& path, double V) {
    if (path.size() == 0) throw stats_error("empty path");
    std::vector<double> out(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) out[i] = disparity(path.state(i), V);
    return out;
}

// Occupation restricted to a total-mass slab ||x|_1 - center| <= eps. On
// integer count paths any eps < 1/2 restricts to the exact level set
// |n|_1 = center; for diffusion paths the 1/128 width is the conditional-
// density convention (otherwise scale as 1/(2V)).
struct SlabCondition {
    double center = 0.0;
    double eps = 1.0 / 128.0;
};

inline WeightedHistogram conditional_histogram(const SampledPath& path, const SlabCondition& slab,
                                               WeightedHistogram bins, int species) {
    if (path.size() == 0) throw stats_error("empty path");
    WeightedHistogram h = std::move(bins);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto x = path.state(i);
        if (std::abs(l1_norm(x) - slab.center) > slab.eps) continue;
        h.add(x[species], path.times[i + 1] - path.times[i]);
    }
    if (h.total_time <= 0.0) throw stats_error("condition never satisfied on the path");
    return h;
}

// Joint occupation of the odd-species fractions (rho1, rho3) over samples
// where the disparity condition B >= threshold holds (d = 6 convention).
inline WeightedHistogram odd_fractions(const SampledPath& path, double V, double b_threshold,
                                       int bins = 64) {
    if (path.size() == 0) throw stats_error("empty path");
    if (path.dim != 6) throw stats_error("odd_fractions is the d = 6 observable");
    WeightedHistogram h = WeightedHistogram::make2d({0.0, 1.0, bins}, {0.0, 1.0, bins});
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto x = path.state(i);
        if (disparity(x, V) < b_threshold) continue;
        const double odd = x[0] + x[2] + x[4];
        if (odd <= 0.0) continue;
        h.add2(x[0] / odd, x[2] / odd, path.times[i + 1] - path.times[i]);
    }
    if (h.total_time <= 0.0) throw stats_error("condition never satisfied on the path");
    return h;
}

}  // namespace tk
