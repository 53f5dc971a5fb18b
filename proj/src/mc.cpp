#include "cableperc/mc.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>

namespace cableperc {

Estimate bernoulli_estimate(const std::string& id, int64_t successes, int64_t trials,
                            uint64_t seed, double confidence) {
    Estimate e;
    e.id = id;
    e.n = trials;
    e.successes = successes;
    e.seed = seed;
    double p = trials > 0 ? static_cast<double>(successes) / trials : 0.0;
    e.value = p;
    e.stderr_ = trials > 0 ? std::sqrt(p * (1.0 - p) / trials) : 0.0;
    if (trials > 0) {
        auto [lo, hi] = wilson_interval(successes, trials, confidence);
        e.lo = lo;
        e.hi = hi;
    }
    return e;
}

Estimate mean_estimate(const std::string& id, double sum, double sum_sq_dev, int64_t n,
                       uint64_t seed, double confidence) {
    Estimate e;
    e.id = id;
    e.n = n;
    e.seed = seed;
    e.value = n > 0 ? sum / n : 0.0;
    e.m2 = sum_sq_dev;
    if (n > 1) e.stderr_ = std::sqrt(sum_sq_dev / (n - 1) / n);
    double z = normal_quantile(0.5 * (1.0 + confidence));
    e.lo = e.value - z * e.stderr_;
    e.hi = e.value + z * e.stderr_;
    return e;
}

Estimate merge(const Estimate& a, const Estimate& b) {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    if (a.id != b.id) throw std::invalid_argument("merge: experiment identity mismatch");
    if ((a.successes >= 0) != (b.successes >= 0))
        throw std::invalid_argument("merge: mixing Bernoulli and mean estimates");
    if (a.successes >= 0)
        return bernoulli_estimate(a.id, a.successes + b.successes, a.n + b.n, a.seed);
    // Chan et al. parallel update of mean and squared deviations.
    int64_t n = a.n + b.n;
    double delta = b.value - a.value;
    double mean = a.value + delta * (static_cast<double>(b.n) / n);
    double m2 = a.m2 + b.m2 + delta * delta * (static_cast<double>(a.n) * b.n / n);
    return mean_estimate(a.id, mean * n, m2, n, a.seed);
}

int worker_count() {
    if (const char* env = std::getenv("CABLEPERC_WORKERS")) {
        int w = std::atoi(env);
        if (w >= 1) return w;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {

void parallel_for_replicas(int64_t replicas, const std::function<void(int64_t)>& body) {
    int workers = worker_count();
    if (workers > replicas) workers = static_cast<int>(replicas);
    if (workers <= 1) {
        for (int64_t r = 0; r < replicas; ++r) body(r);
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            int64_t r = next.fetch_add(1);
            if (r >= replicas) return;
            try {
                body(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

Estimate run_bernoulli(const RunPlan& plan, const std::string& id,
                       const std::function<bool(Philox&)>& trial) {
    auto per_replica = [&](int64_t, Philox& rng) -> int64_t {
        int64_t hits = 0;
        for (int64_t i = 0; i < plan.per_replica; ++i)
            if (trial(rng)) ++hits;
        return hits;
    };
    int64_t successes = run_replicas<int64_t>(
        plan, per_replica, 0, [](int64_t a, int64_t b) { return a + b; });
    return bernoulli_estimate(id, successes, plan.total(), plan.seed);
}

Estimate run_mean(const RunPlan& plan, const std::string& id,
                  const std::function<double(Philox&)>& trial) {
    struct Acc {
        double sum = 0.0, m2 = 0.0;
        int64_t n = 0;
    };
    auto per_replica = [&](int64_t, Philox& rng) -> Acc {
        Acc a;
        double mean = 0.0;
        for (int64_t i = 0; i < plan.per_replica; ++i) {
            double x = trial(rng);
            ++a.n;
            double d = x - mean;
            mean += d / a.n;
            a.m2 += d * (x - mean);
        }
        a.sum = mean * a.n;
        return a;
    };
    Acc total = run_replicas<Acc>(plan, per_replica, Acc{}, [](Acc a, Acc b) {
        if (a.n == 0) return b;
        if (b.n == 0) return a;
        Acc c;
        c.n = a.n + b.n;
        double ma = a.sum / a.n, mb = b.sum / b.n;
        double delta = mb - ma;
        c.sum = a.sum + b.sum;
        c.m2 = a.m2 + b.m2 + delta * delta * (static_cast<double>(a.n) * b.n / c.n);
        return c;
    });
    return mean_estimate(id, total.sum, total.m2, total.n, plan.seed);
}

}  // namespace cableperc
