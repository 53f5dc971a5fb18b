#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "cableperc/mc.hpp"
#include "cableperc/rng.hpp"
#include "cableperc/stats.hpp"

using namespace cableperc;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 distribution (kat_vectors).
    auto zero = Philox::block({0, 0, 0, 0}, {0, 0});
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);

    auto ones = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);

    auto pi = Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
    CHECK(pi[0] == 0xd16cfe09u);
    CHECK(pi[1] == 0x94fdccebu);
    CHECK(pi[2] == 0x5001e420u);
    CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("philox streams are reproducible and distinct") {
    Philox a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        uint64_t x = a.next_u64();
        CHECK(x == b.next_u64());
    }
    int same = 0;
    Philox a2(42, 7);
    for (int i = 0; i < 100; ++i)
        if (a2.next_u64() == c.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniforms in range, normals roughly standard") {
    Philox rng(1, 0);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double z = rng.next_normal();
        sum += z;
        sum2 += z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("wilson interval closed-form check") {
    auto [lo0, hi0] = wilson_interval(0, 50, 0.95);
    CHECK(lo0 == doctest::Approx(0.0));
    auto [lon, hin] = wilson_interval(50, 50, 0.95);
    CHECK(hin == doctest::Approx(1.0));
    (void)lon;
    (void)hi0;
    auto [lo, hi] = wilson_interval(50, 100, 0.95);
    CHECK(lo == doctest::Approx(0.40383).epsilon(1e-4));
    CHECK(hi == doctest::Approx(0.59617).epsilon(1e-4));
    CHECK_THROWS(wilson_interval(5, 4, 0.95));
    CHECK_THROWS(wilson_interval(-1, 4, 0.95));
}

TEST_CASE("normal tail functions") {
    CHECK(normal_sf(0.0) == doctest::Approx(0.5));
    CHECK(normal_sf(1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
    CHECK(normal_cdf(1.0) + normal_sf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    for (double x : {5.0, 9.0, 11.0, 20.0, 35.0}) {
        double direct = normal_sf(x);
        if (direct > 0.0)
            CHECK(log_normal_sf(x) == doctest::Approx(std::log(direct)).epsilon(1e-6));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(chi2_sf(0.0, 3) == doctest::Approx(1.0));
    CHECK(chi2_sf(7.814727903, 3) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("bernoulli runner: constant trials") {
    RunPlan plan;
    plan.replicas = 8;
    plan.per_replica = 100;
    plan.seed = 3;
    auto yes = run_bernoulli(plan, "t", [](Philox&) { return true; });
    CHECK(yes.value == 1.0);
    CHECK(yes.stderr_ == 0.0);
    auto no = run_bernoulli(plan, "t", [](Philox&) { return false; });
    CHECK(no.value == 0.0);
}

TEST_CASE("fair coin hits the binomial oracle") {
    RunPlan plan;
    plan.replicas = 100;
    plan.per_replica = 10000;
    plan.seed = 11;
    auto e = run_bernoulli(plan, "coin", [](Philox& g) { return g.next_double() < 0.5; });
    double sigma = 0.5 / std::sqrt(double(plan.total()));
    CHECK(std::abs(e.value - 0.5) < 3.0 * sigma);
    CHECK(e.lo <= 0.5);
    CHECK(e.hi >= 0.5);
}

TEST_CASE("merge is associative, commutative, respects identity") {
    Estimate a = bernoulli_estimate("x", 10, 100, 1);
    Estimate b = bernoulli_estimate("x", 30, 50, 1);
    Estimate c = bernoulli_estimate("x", 7, 70, 1);
    Estimate ab_c = merge(merge(a, b), c);
    Estimate a_bc = merge(a, merge(b, c));
    CHECK(ab_c.value == doctest::Approx(a_bc.value).epsilon(1e-15));
    CHECK(ab_c.n == a_bc.n);
    Estimate ba = merge(b, a);
    Estimate ab = merge(a, b);
    CHECK(ab.value == ba.value);
    CHECK(ab.successes == ba.successes);
    Estimate empty;
    empty.id = "x";
    CHECK(merge(a, empty).value == a.value);
    Estimate other = bernoulli_estimate("y", 1, 10, 1);
    CHECK_THROWS(merge(a, other));

    Philox rng(99, 0);
    for (int trial = 0; trial < 50; ++trial) {
        int64_t n1 = 1 + static_cast<int64_t>(rng.next_double() * 50);
        int64_t n2 = 1 + static_cast<int64_t>(rng.next_double() * 50);
        int64_t s1 = static_cast<int64_t>(rng.next_double() * (n1 + 1));
        int64_t s2 = static_cast<int64_t>(rng.next_double() * (n2 + 1));
        if (s1 > n1) s1 = n1;
        if (s2 > n2) s2 = n2;
        Estimate m = merge(bernoulli_estimate("r", s1, n1, 0),
                           bernoulli_estimate("r", s2, n2, 0));
        Estimate whole = bernoulli_estimate("r", s1 + s2, n1 + n2, 0);
        CHECK(m.value == doctest::Approx(whole.value).epsilon(1e-15));
        CHECK(m.lo == doctest::Approx(whole.lo).epsilon(1e-12));
    }
}

TEST_CASE("replica runner is worker-count independent") {
    RunPlan plan;
    plan.replicas = 32;
    plan.per_replica = 500;
    plan.seed = 17;
    auto trial = [](Philox& g) { return g.next_normal() > 0.3; };

    setenv("CABLEPERC_WORKERS", "1", 1);
    Estimate e1 = run_bernoulli(plan, "w", trial);
    setenv("CABLEPERC_WORKERS", "2", 1);
    Estimate e2 = run_bernoulli(plan, "w", trial);
    setenv("CABLEPERC_WORKERS", "8", 1);
    Estimate e8 = run_bernoulli(plan, "w", trial);
    unsetenv("CABLEPERC_WORKERS");
    CHECK(e1.successes == e2.successes);
    CHECK(e2.successes == e8.successes);
    CHECK(e1.value == e2.value);
    CHECK(e2.value == e8.value);
}

TEST_CASE("mean runner merges deterministically across shards") {
    RunPlan plan;
    plan.replicas = 16;
    plan.per_replica = 2000;
    plan.seed = 23;
    auto e = run_mean(plan, "m", [](Philox& g) { return 2.0 + g.next_normal(); });
    CHECK(std::abs(e.value - 2.0) < 4.0 * e.stderr_);
    CHECK(e.stderr_ == doctest::Approx(1.0 / std::sqrt(double(plan.total()))).epsilon(0.1));
}
