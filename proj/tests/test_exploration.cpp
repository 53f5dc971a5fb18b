#include <doctest.h>

#include <cmath>
#include <map>

#include "cableperc/exploration.hpp"
#include "cableperc/gff.hpp"
#include "cableperc/stats.hpp"

using namespace cableperc;

TEST_CASE("conditional variance: no exploration, single target") {
    auto dom = build_box(2, 2, Metric::LInf);
    auto G = green(dom);
    Vertex v = dom.vertex_at({0, 0, 0});
    CHECK(conditional_variance(dom, {v}, {}) == doctest::Approx(G.G(v, v)).epsilon(1e-12));
}

TEST_CASE("conditional variance: isolated vertex pins variance at 1") {
    auto dom = build_box(2, 2, Metric::LInf);
    Vertex v = dom.vertex_at({0, 0, 0});
    std::vector<Vertex> ring{dom.vertex_at({1, 0, 0}), dom.vertex_at({-1, 0, 0}),
                             dom.vertex_at({0, 1, 0}), dom.vertex_at({0, -1, 0})};
    CHECK(conditional_variance(dom, {v}, ring) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conditional variance is nonincreasing under more conditioning") {
    auto dom = build_box(2, 2, Metric::LInf);
    std::vector<Vertex> A{dom.vertex_at({2, 2, 0}), dom.vertex_at({2, 1, 0})};
    std::vector<Vertex> I1{dom.vertex_at({-2, -2, 0})};
    std::vector<Vertex> I2 = I1;
    I2.push_back(dom.vertex_at({-1, -2, 0}));
    I2.push_back(dom.vertex_at({0, 0, 0}));
    double v0 = conditional_variance(dom, A, {});
    double v1 = conditional_variance(dom, A, I1);
    double v2 = conditional_variance(dom, A, I2);
    CHECK(v1 <= v0 + 1e-13);
    CHECK(v2 <= v1 + 1e-13);
    CHECK_THROWS(conditional_variance(dom, A, {A[0]}));
}

TEST_CASE("quadratic variation: constant exploration gives zero") {
    auto dom = build_box(2, 2, Metric::LInf);
    std::vector<Vertex> I0{dom.vertex_at({-2, 0, 0})};
    ExplorationSequence seq(dom, {I0, I0, I0}, {dom.vertex_at({2, 0, 0})});
    auto qv = quadratic_variation(dom, seq);
    for (double q : qv) CHECK(q == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("quadratic variation: 5x5 box, growing columns, two-solve oracle") {
    auto dom = build_box(2, 2, Metric::LInf);
    std::vector<Vertex> A{dom.vertex_at({2, 2, 0}), dom.vertex_at({2, -2, 0})};
    std::vector<std::vector<Vertex>> stages;
    std::vector<Vertex> acc;
    stages.push_back(acc);  // I_0 empty
    for (int x = -2; x <= 0; ++x) {
        for (int y = -2; y <= 2; ++y) acc.push_back(dom.vertex_at({x, y, 0}));
        stages.push_back(acc);
    }
    ExplorationSequence seq(dom, stages, A);
    auto qv = quadratic_variation(dom, seq);  // throws if the identity fails

    double var0 = conditional_variance(dom, A, stages.front());
    for (size_t t = 0; t < stages.size(); ++t) {
        double direct = var0 - conditional_variance(dom, A, stages[t]);
        CHECK(qv[t] == doctest::Approx(direct).epsilon(1e-12));
        if (t > 0) CHECK(qv[t] >= qv[t - 1] - 1e-12);
    }
    CHECK(qv.back() <= var0 + 1e-12);

    // single step equals the variance difference by definition
    ExplorationSequence two(dom, {stages[0], stages[2]}, A);
    auto qv2 = quadratic_variation(dom, two);
    CHECK(qv2[1] ==
          doctest::Approx(var0 - conditional_variance(dom, A, stages[2])).epsilon(1e-12));
}

TEST_CASE("nested-set validation") {
    auto dom = build_box(2, 1, Metric::LInf);
    std::vector<Vertex> big{dom.vertex_at({0, 0, 0}), dom.vertex_at({1, 0, 0})};
    std::vector<Vertex> small{dom.vertex_at({0, 0, 0})};
    CHECK_THROWS(ExplorationSequence(dom, {big, small}, {dom.vertex_at({-1, -1, 0})}));
    CHECK_THROWS(ExplorationSequence(dom, {small}, small));  // target meets explored
}

TEST_CASE("martingale step: A inside the explored set averages supplied values") {
    auto dom = build_box(2, 1, Metric::LInf);
    std::vector<Vertex> I{dom.vertex_at({0, 0, 0}), dom.vertex_at({1, 0, 0})};
    std::map<Vertex, double> vals{{I[0], 2.0}, {I[1], 4.0}};
    CHECK(martingale_step(dom, I, I, vals) == doctest::Approx(3.0).epsilon(1e-13));

    std::map<Vertex, double> zeros{{I[0], 0.0}, {I[1], 0.0}};
    std::vector<Vertex> A{dom.vertex_at({-1, 1, 0})};
    CHECK(martingale_step(dom, A, I, zeros) == doctest::Approx(0.0));

    std::map<Vertex, double> missing{{I[0], 1.0}};
    CHECK_THROWS(martingale_step(dom, A, I, missing));
}

TEST_CASE("martingale step equals the conditional-mean solve") {
    auto dom = build_box(2, 1, Metric::LInf);
    auto G = green(dom);
    std::vector<Vertex> I{dom.vertex_at({-1, -1, 0}), dom.vertex_at({0, -1, 0}),
                          dom.vertex_at({1, 1, 0})};
    std::vector<Vertex> A{dom.vertex_at({0, 1, 0}), dom.vertex_at({-1, 1, 0})};
    std::map<Vertex, double> vals{{I[0], 0.7}, {I[1], -1.1}, {I[2], 0.4}};
    // oracle: E[X_A | phi_I] = mean over A of G(v,I) G(I,I)^{-1} phi_I
    Eigen::MatrixXd GII(3, 3);
    Eigen::VectorXd phi(3);
    for (int i = 0; i < 3; ++i) {
        phi(i) = vals[I[static_cast<size_t>(i)]];
        for (int j = 0; j < 3; ++j) GII(i, j) = G.G(I[static_cast<size_t>(i)],
                                                    I[static_cast<size_t>(j)]);
    }
    double expect = 0.0;
    for (Vertex v : A) {
        Eigen::VectorXd gvI(3);
        for (int j = 0; j < 3; ++j) gvI(j) = G.G(v, I[static_cast<size_t>(j)]);
        expect += gvI.transpose() * GII.llt().solve(phi);
    }
    expect /= static_cast<double>(A.size());
    CHECK(martingale_step(dom, A, I, vals) == doctest::Approx(expect).epsilon(1e-11));
}

TEST_CASE("martingale property under resampled boundary extensions") {
    auto dom = build_box(2, 1, Metric::LInf);
    auto G = green(dom);
    std::vector<Vertex> I1{dom.vertex_at({-1, -1, 0})};
    std::vector<Vertex> I2 = I1;
    I2.push_back(dom.vertex_at({0, -1, 0}));
    std::vector<Vertex> A{dom.vertex_at({1, 1, 0})};

    std::map<Vertex, double> vals1{{I1[0], 0.9}};
    double m1 = martingale_step(dom, A, I1, vals1);

    // resample the field conditioned on I1 and average the next step
    Eigen::MatrixXd H = harmonic_measure_matrix(dom, I1);
    GreenMatrix G1 = green_after_exploration(dom, I1);
    Eigen::MatrixXd cov = G1.G;
    Eigen::LLT<Eigen::MatrixXd> llt(cov +
                                    1e-12 * Eigen::MatrixXd::Identity(cov.rows(),
                                                                      cov.cols()));
    Eigen::MatrixXd L = llt.matrixL();
    Philox rng(55, 0);
    const int reps = 200000;
    double acc = 0.0;
    Vertex w = I2[1];
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXd z(cov.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
        double value_w = H(w, 0) * vals1[I1[0]] + (L * z)(w);
        std::map<Vertex, double> vals2{{I1[0], 0.9}, {w, value_w}};
        acc += martingale_step(dom, A, I2, vals2);
    }
    acc /= reps;
    CHECK(std::abs(acc - m1) < 0.01);  // MC noise at this sample size
}

TEST_CASE("first passage closed form") {
    FirstPassageParams p{0.0, 1.0, 1.0};
    CHECK(first_passage_cdf(p) == doctest::Approx(0.31731050786291410).epsilon(1e-12));
    CHECK(first_passage_cdf(p) == doctest::Approx(2.0 * normal_sf(1.0)).epsilon(1e-14));

    FirstPassageParams tiny_b{0.3, 1e-9, 1.0};
    CHECK(first_passage_cdf(tiny_b) == doctest::Approx(1.0).epsilon(1e-6));

    FirstPassageParams drift_up{0.5, 1.0, 1e8};
    CHECK(first_passage_cdf(drift_up) == doctest::Approx(1.0).epsilon(1e-9));

    FirstPassageParams drift_down{-0.5, 1.0, 1e8};
    CHECK(first_passage_cdf(drift_down) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

    CHECK_THROWS(first_passage_cdf({0.0, -1.0, 1.0}));
    CHECK_THROWS(first_passage_cdf({0.0, 1.0, 0.0}));
    CHECK_THROWS(first_passage_cdf(
        {std::numeric_limits<double>::quiet_NaN(), 1.0, 1.0}));
}

TEST_CASE("first passage monotonicity in T and b") {
    double last = 0.0;
    for (double T : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        double c = first_passage_cdf({0.2, 1.0, T});
        CHECK(c >= last - 1e-14);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        last = c;
    }
    double prev = 1.0;
    for (double b : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        double c = first_passage_cdf({0.2, b, 1.0});
        CHECK(c <= prev + 1e-14);
        prev = c;
    }
}

TEST_CASE("first passage oracle brackets the closed form") {
    FirstPassageParams p{0.0, 1.0, 1.0};
    auto est = first_passage_mc_oracle(p, 40000, 2000, 77);
    double band = first_passage_bias_band(p, 2000);
    double exact = first_passage_cdf(p);
    // negative bias: discrete checks miss excursions
    CHECK(exact - est.value > -3.0 * est.stderr_);
    CHECK(exact - est.value < 3.0 * est.stderr_ + band);

    FirstPassageParams near_zero{0.0, 1e-6, 1.0};
    auto sure = first_passage_mc_oracle(near_zero, 2000, 1000, 3);
    CHECK(sure.value >
          1.0 - 3.0 * sure.stderr_ - first_passage_bias_band(near_zero, 1000));
    auto never = first_passage_mc_oracle({0.0, 10.0, 0.01}, 2000, 1000, 4);
    CHECK(never.value == 0.0);
}

TEST_CASE("tau bounds report: degenerate heights") {
    auto low = tau_h_percolation_bounds(2, -1e6, 6, 3, 400, 5);
    REQUIRE(low.defined);
    CHECK(low.tail_f1 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(low.tail_f2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(low.crossing.value == 1.0);

    auto high = tau_h_percolation_bounds(2, 1e6, 6, 3, 400, 5);
    REQUIRE(high.defined);
    CHECK(high.tail_f1 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(high.tail_f2 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(high.crossing.value == 0.0);

    auto mid = tau_h_percolation_bounds(2, 0.0, 6, 3, 400, 5);
    CHECK(mid.green_origin > 0.0);
    CHECK(mid.f1 >= mid.f2);  // the ball is hit at least as often as the pair
}
