#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cableperc/geometry.hpp"
#include "cableperc/potential.hpp"
#include "cableperc/rng.hpp"

using namespace cableperc;

TEST_CASE("green: single interior vertex leaves in one step") {
    for (int d : {2, 3}) {
        auto dom = build_explicit_domain(d, {{0, 0, 0}});
        auto G = green(dom);
        REQUIRE(G.G.rows() == 1);
        CHECK(G.G(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("green: hand-inverted two-site values") {
    auto dom2 = build_explicit_domain(2, {{0, 0, 0}, {1, 0, 0}});
    auto G2 = green(dom2);
    CHECK(G2.G(0, 0) == doctest::Approx(16.0 / 15.0).epsilon(1e-13));
    CHECK(G2.G(0, 1) == doctest::Approx(4.0 / 15.0).epsilon(1e-13));

    auto dom3 = build_explicit_domain(3, {{0, 0, 0}, {1, 0, 0}});
    auto G3 = green(dom3);
    CHECK(G3.G(0, 0) == doctest::Approx(36.0 / 35.0).epsilon(1e-13));
    CHECK(G3.G(0, 1) == doctest::Approx(6.0 / 35.0).epsilon(1e-13));
}

TEST_CASE("green: free slab faces keep their reduced degree") {
    auto path = build_slab(0, 1);  // 3-vertex path, Dirichlet ends, d label 3
    auto G = green(path);
    // path Laplacian inverse times 2d = 6: diag (4.5, 6, 4.5)
    CHECK(G.G(1, 1) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(G.G(0, 0) == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(G.G(0, 2) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("green is symmetric positive definite with nonnegative entries") {
    for (auto dom : {build_box(2, 2, Metric::LInf), build_box(3, 1, Metric::LInf),
                     build_box(2, 3, Metric::L1)}) {
        auto G = green(dom);
        CHECK((G.G - G.G.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G.G);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK(G.G.minCoeff() >= 0.0);
        for (Eigen::Index i = 0; i < G.G.rows(); ++i) CHECK(G.G(i, i) >= 1.0);
    }
}

TEST_CASE("green mc oracle agrees with the exact solve") {
    auto two = build_explicit_domain(2, {{0, 0, 0}, {1, 0, 0}});
    auto same = green_mc_oracle(two, 0, 0, 200000, 7);
    CHECK(std::abs(same.value - 16.0 / 15.0) < 3.0 * same.stderr_);

    auto one = build_explicit_domain(2, {{0, 0, 0}});
    auto single = green_mc_oracle(one, 0, 0, 50000, 9);
    CHECK(single.value == 1.0);  // the walk visits its start exactly once
    CHECK(single.stderr_ == 0.0);

    // disconnected components never meet
    auto split = build_explicit_domain(2, {{0, 0, 0}, {5, 5, 0}});
    auto zero = green_mc_oracle(split, 0, 1, 20000, 11);
    CHECK(zero.value == 0.0);
}

TEST_CASE("harmonic measure: gambler's ruin on the path") {
    auto dom = build_slab(0, 1);  // interior x in {-1,0,1}, ends at +-2
    Vertex mid = dom.vertex_at({0, 0, 0});
    Vertex left = dom.vertex_at({-2, 0, 0});
    Vertex right = dom.vertex_at({2, 0, 0});
    auto hm = harmonic_measure(dom, mid, {left, right});
    CHECK(hm.weights(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hm.weights(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hm.total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("harmonic measure: symmetry orbits and total mass at the center") {
    auto dom = build_box(2, 2, Metric::LInf);
    Vertex center = dom.vertex_at({0, 0, 0});
    std::vector<Vertex> layer;
    for (Vertex v = dom.interior_count; v < dom.vertex_count(); ++v) layer.push_back(v);
    auto hm = harmonic_measure(dom, center, layer);
    CHECK(hm.total() == doctest::Approx(1.0).epsilon(1e-12));
    double w0 = -1.0;
    for (size_t j = 0; j < layer.size(); ++j) {
        const Coord& c = dom.coord(layer[j]);
        bool axis_center = (std::abs(c[0]) == 3 && c[1] == 0) ||
                           (std::abs(c[1]) == 3 && c[0] == 0);
        if (!axis_center) continue;
        if (w0 < 0.0)
            w0 = hm.weights(static_cast<Eigen::Index>(j));
        else
            CHECK(hm.weights(static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(w0).epsilon(1e-12));
    }
}

TEST_CASE("harmonic measure: start inside K gives a point mass") {
    auto dom = build_box(2, 1, Metric::LInf);
    Vertex v = dom.vertex_at({1, 0, 0});
    auto hm = harmonic_measure(dom, v, {v, dom.vertex_at({0, 1, 0})});
    CHECK(hm.weights(0) == 1.0);
    CHECK(hm.weights(1) == 0.0);
}

TEST_CASE("metric green: endpoint reduction, bridge, orientation") {
    auto dom = build_box(3, 1, Metric::LInf);
    auto G = green(dom);
    Vertex u = dom.vertex_at({0, 0, 0});
    Vertex v = dom.vertex_at({1, 0, 0});
    Vertex w = dom.vertex_at({0, 1, 0});

    CHECK(metric_green(dom, G, CablePoint(u, v, 0.0), CablePoint(u, w, 0.0)) ==
          doctest::Approx(G.G(u, u)).epsilon(1e-12));
    CHECK(metric_green(dom, G, CablePoint(u, v, 1.0), CablePoint(u, w, 0.0)) ==
          doctest::Approx(G.G(v, u)).epsilon(1e-12));

    double mid = metric_green(dom, G, CablePoint(u, v, 0.5), CablePoint(u, v, 0.5));
    double bilinear = 0.25 * (G.G(u, u) + G.G(v, v) + 2.0 * G.G(u, v));
    CHECK(mid == doctest::Approx(bilinear + 6.0 * 0.25).epsilon(1e-12));

    double cross = metric_green(dom, G, CablePoint(u, v, 0.5), CablePoint(u, w, 0.5));
    double avg = 0.25 * (G.G(u, u) + G.G(v, w) + G.G(u, w) + G.G(v, u));
    CHECK(cross == doctest::Approx(avg).epsilon(1e-12));

    CHECK(metric_green(dom, G, CablePoint(v, u, 0.75), CablePoint(u, v, 0.25)) ==
          doctest::Approx(metric_green(dom, G, CablePoint(u, v, 0.25),
                                       CablePoint(u, v, 0.25)))
              .epsilon(1e-12));

    // random endpoint reductions across edges
    Philox rng(31, 0);
    for (int trial = 0; trial < 30; ++trial) {
        size_t e1 = static_cast<size_t>(rng.next_double() * dom.edges.size());
        size_t e2 = static_cast<size_t>(rng.next_double() * dom.edges.size());
        CablePoint p1(dom.edges[e1][0], dom.edges[e1][1], rng.next_double() < 0.5 ? 0.0 : 1.0);
        CablePoint p2(dom.edges[e2][0], dom.edges[e2][1], rng.next_double() < 0.5 ? 0.0 : 1.0);
        Vertex a = p1.r == 0.0 ? p1.u : p1.v;
        Vertex b = p2.r == 0.0 ? p2.u : p2.v;
        CHECK(metric_green(dom, G, p1, p2) ==
              doctest::Approx(G.at(dom, a, b)).epsilon(1e-12));
    }
}

TEST_CASE("metric green: hand value on the two-site Z^3 system") {
    auto dom = build_explicit_domain(3, {{0, 0, 0}, {1, 0, 0}});
    auto G = green(dom);
    double val = metric_green(dom, G, CablePoint(0, 1, 0.5), CablePoint(0, 1, 0.5));
    CHECK(val == doctest::Approx(2.1).epsilon(1e-12));
}

TEST_CASE("green after exploration") {
    auto dom = build_box(2, 2, Metric::LInf);
    auto base = green(dom);

    auto empty = green_after_exploration(dom, {});
    CHECK((empty.G - base.G).cwiseAbs().maxCoeff() < 1e-10);

    Vertex center = dom.vertex_at({0, 0, 0});
    std::vector<Vertex> ring;
    for (auto c : {Coord{1, 0, 0}, Coord{-1, 0, 0}, Coord{0, 1, 0}, Coord{0, -1, 0}})
        ring.push_back(dom.vertex_at(c));
    auto GI = green_after_exploration(dom, ring);
    CHECK(GI.G(center, center) == doctest::Approx(1.0).epsilon(1e-12));
    for (Vertex v : ring) CHECK(GI.G(v, v) == 0.0);

    std::vector<Vertex> all;
    for (Vertex v = 0; v < dom.interior_count; ++v) all.push_back(v);
    auto GA = green_after_exploration(dom, all);
    CHECK(GA.G.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strong Markov identity: G - G_I = Hm * G") {
    auto dom = build_box(2, 2, Metric::LInf);
    auto base = green(dom);
    std::vector<Vertex> I{dom.vertex_at({0, 0, 0}), dom.vertex_at({1, 0, 0}),
                          dom.vertex_at({-2, 1, 0})};
    auto GI = green_after_exploration(dom, I);
    Eigen::MatrixXd H = harmonic_measure_matrix(dom, I);
    double worst = 0.0;
    for (Vertex v = 0; v < dom.interior_count; ++v) {
        if (std::find(I.begin(), I.end(), v) != I.end()) continue;
        for (Vertex w = 0; w < dom.interior_count; ++w) {
            double rhs = 0.0;
            for (size_t j = 0; j < I.size(); ++j)
                rhs += H(v, static_cast<Eigen::Index>(j)) * base.G(I[j], w);
            worst = std::max(worst, std::abs(base.G(v, w) - GI.G(v, w) - rhs));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("cg-based entries match the dense solve") {
    auto dom = build_box(3, 2, Metric::LInf);
    auto G = green(dom);
    Vertex a = dom.vertex_at({0, 0, 0});
    Vertex b = dom.vertex_at({2, -1, 1});
    CHECK(green_entry(dom, a, a) == doctest::Approx(G.G(a, a)).epsilon(1e-9));
    CHECK(green_entry(dom, a, b) == doctest::Approx(G.G(a, b)).epsilon(1e-8));

    std::vector<Vertex> K{dom.vertex_at({1, 1, 0}), dom.vertex_at({0, -1, -1})};
    auto hm = harmonic_measure(dom, a, K);
    CHECK(hitting_probability(dom, a, K) == doctest::Approx(hm.total()).epsilon(1e-9));
}

TEST_CASE("cable point validation and bad edges rejected") {
    CHECK_THROWS(CablePoint(0, 1, 1.5));
    CHECK_THROWS(CablePoint(0, 1, -0.1));
    auto dom = build_box(2, 1, Metric::LInf);
    auto G = green(dom);
    Vertex u = dom.vertex_at({0, 0, 0});
    Vertex far = dom.vertex_at({1, 1, 0});
    CHECK_THROWS(metric_green(dom, G, CablePoint(u, far, 0.5), CablePoint(u, far, 0.5)));
}
