#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cableperc/rng.hpp"
#include "cableperc/stats.hpp"

namespace cableperc {

// Monte Carlo result. For Bernoulli experiments `successes >= 0` and the
// interval is a Wilson score interval; for mean-type estimates the interval
// is value +- z * stderr and successes stays -1.
struct Estimate {
    std::string id;
    double value = 0.0;
    double stderr_ = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int64_t n = 0;
    int64_t successes = -1;
    uint64_t seed = 0;
    // mean-type estimates carry the merged sum of squared deviations
    double m2 = 0.0;
};

Estimate bernoulli_estimate(const std::string& id, int64_t successes, int64_t trials,
                            uint64_t seed, double confidence = 0.95);

Estimate mean_estimate(const std::string& id, double sum, double sum_sq_dev, int64_t n,
                       uint64_t seed, double confidence = 0.95);

// Count-weighted merge; associative and commutative; rejects mismatched ids.
Estimate merge(const Estimate& a, const Estimate& b);

struct RunPlan {
    int64_t replicas = 1;
    int64_t per_replica = 1;
    uint64_t seed = 0;
    std::string chunking = "static";

    void validate() const {
        if (replicas < 1 || per_replica < 1)
            throw std::invalid_argument("RunPlan: counts must be >= 1");
    }
    int64_t total() const { return replicas * per_replica; }
};

// Worker count: CABLEPERC_WORKERS env var, else hardware concurrency.
int worker_count();

namespace detail {
void parallel_for_replicas(int64_t replicas, const std::function<void(int64_t)>& body);
}

// Runs `per_replica(r, rng)` for each replica with rng = Philox(seed, r),
// then folds the results in replica-index order. The fold order is fixed, so
// the outcome is bit-for-bit independent of the worker count.
template <class T, class Fn, class Fold>
T run_replicas(const RunPlan& plan, Fn&& per_replica, T init, Fold&& fold) {
    plan.validate();
    std::vector<T> results(static_cast<size_t>(plan.replicas));
    detail::parallel_for_replicas(plan.replicas, [&](int64_t r) {
        Philox rng(plan.seed, static_cast<uint64_t>(r));
        try {
            results[static_cast<size_t>(r)] = per_replica(r, rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("replica " + std::to_string(r) + ": " + e.what());
        }
    });
    T acc = std::move(init);
    for (auto& r : results) acc = fold(std::move(acc), std::move(r));
    return acc;
}

// Bernoulli experiment: trial must be a pure function of its generator.
Estimate run_bernoulli(const RunPlan& plan, const std::string& id,
                       const std::function<bool(Philox&)>& trial);

// Mean of a real-valued trial.
Estimate run_mean(const RunPlan& plan, const std::string& id,
                  const std::function<double(Philox&)>& trial);

}  // namespace cableperc
