#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tk/common.hpp"
#include "tk/rng.hpp"
#include "tk/stats.hpp"

// Embarrassingly parallel trajectory ensembles. Workers claim trajectory
// indices from an atomic counter; every result lands in a slot indexed by
// trajectory, so reductions run in index order and the output is independent
// of thread count and scheduling.

namespace tk {

template <class T>
struct Outcome {
    std::optional<T> value;
    std::string error;  // nonempty when the trajectory raised
};

// fn(index, seed) -> T, seeds derived as derive_seed(master_seed, index).
template <class Fn>
auto run_ensemble(int n_traj, int threads, std::uint64_t master_seed, Fn&& fn)
    -> std::vector<Outcome<decltype(fn(0, std::uint64_t{}))>> {
    using T = decltype(fn(0, std::uint64_t{}));
    if (n_traj < 1) throw simulation_error("n_traj must be >= 1");
    if (threads < 1) threads = 1;
    threads = std::min(threads, n_traj);

    std::vector<Outcome<T>> out(n_traj);
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n_traj) return;
            try {
                out[i].value = fn(i, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

// Aggregate of an event-time study (switching / cycling ensembles).
struct EventStudy {
    SummaryStats stats;
    std::vector<double> times;        // per-trajectory event times, index order
    int horizon_exceeded = 0;
    std::vector<std::string> errors;  // unexpected per-trajectory failures
};

// Collapses per-trajectory optional event times into summary form.
// horizon sentinel: trajectories whose detector saw no event.
inline EventStudy collect_event_times(const std::vector<Outcome<std::optional<double>>>& runs) {
    EventStudy s;
    for (const auto& r : runs) {
        if (!r.error.empty()) {
            s.errors.push_back(r.error);
        } else if (r.value && r.value->has_value()) {
            s.times.push_back(**r.value);
        } else {
            ++s.horizon_exceeded;
        }
    }
    if (!s.times.empty()) s.stats = summarize(s.times);
    return s;
}

}  // namespace tk
