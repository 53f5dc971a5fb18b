#include <doctest.h>

#include <cmath>

#include "cableperc/geometry.hpp"
#include "cableperc/gff.hpp"
#include "cableperc/percolation.hpp"

using namespace cableperc;

namespace {

// brute-force transitive closure over open edges
std::vector<int> brute_components(const FieldSample& s) {
    const LatticeDomain& dom = *s.dom;
    int n = dom.vertex_count();
    std::vector<int> comp(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) comp[static_cast<size_t>(i)] = i;
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t e = 0; e < dom.edges.size(); ++e) {
            if (!s.edge_open[e]) continue;
            auto [u, v] = dom.edges[e];
            int cu = comp[static_cast<size_t>(u)], cv = comp[static_cast<size_t>(v)];
            if (cu != cv) {
                int m = std::min(cu, cv);
                for (auto& c : comp)
                    if (c == cu || c == cv) c = m;
                changed = true;
            }
        }
    }
    return comp;
}

FieldSample random_sample(const LatticeDomain& dom, double h, Philox& rng,
                          double edge_bias) {
    Eigen::VectorXd values(dom.interior_count);
    for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = rng.next_normal();
    FieldSample s;
    s.dom = &dom;
    s.values = values;
    s.h = h;
    s.edge_open.resize(dom.edges.size());
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        bool admissible = s.value_at(u) >= h && s.value_at(v) >= h;
        s.edge_open[e] = admissible && rng.next_double() < edge_bias;
    }
    return s;
}

}  // namespace

TEST_CASE("label_clusters equals brute-force closure on random samples") {
    Philox rng(101, 0);
    auto small = build_box(2, 1, Metric::LInf);
    auto diamond = build_box(2, 2, Metric::L1);
    for (int trial = 0; trial < 1000; ++trial) {
        const LatticeDomain& dom = trial % 2 ? small : diamond;
        FieldSample s = random_sample(dom, 0.0, rng, 0.55);
        auto labels = label_clusters(s);
        auto brute = brute_components(s);
        for (Vertex u = 0; u < dom.vertex_count(); ++u) {
            CHECK(labels.open(u) == s.vertex_open(u));
            for (Vertex v = u + 1; v < dom.vertex_count(); ++v) {
                if (!s.vertex_open(u) || !s.vertex_open(v)) continue;
                bool same_brute =
                    brute[static_cast<size_t>(u)] == brute[static_cast<size_t>(v)];
                CHECK(labels.same_cluster(u, v) == same_brute);
            }
        }
        int64_t open_sum = 0;
        for (Vertex u = 0; u < dom.vertex_count(); ++u)
            if (labels.root[static_cast<size_t>(u)] == u)
                open_sum += labels.size[static_cast<size_t>(u)];
        CHECK(open_sum == labels.open_vertex_count);
    }
}

TEST_CASE("cluster counts: everything open / nothing open") {
    auto dom = build_box(2, 1, Metric::LInf);
    auto G = green(dom);
    auto all = extend_level_set(dom, sample_field(dom, G, 2), -1e6, 3);
    CHECK(label_clusters(all).cluster_count == 1);
    auto none = extend_level_set(dom, sample_field(dom, G, 2), 1e6, 3);
    auto labels2 = label_clusters(none);
    CHECK(labels2.cluster_count == 0);
    CHECK(labels2.open_vertex_count == 0);
}

TEST_CASE("crossing matches brute-force path search") {
    Philox rng(202, 0);
    auto dom = build_box(2, 2, Metric::LInf);
    const Coord origin{0, 0, 0};
    CrossingQuery q{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 2),
                    std::nullopt, 0.0};
    for (int trial = 0; trial < 500; ++trial) {
        FieldSample s = random_sample(dom, 0.0, rng, 0.5);
        auto brute = brute_components(s);
        bool expected = false;
        Vertex o = dom.vertex_at(origin);
        if (s.vertex_open(o))
            for (Vertex v : region_vertices(dom, q.target))
                if (s.vertex_open(v) &&
                    brute[static_cast<size_t>(o)] == brute[static_cast<size_t>(v)])
                    expected = true;
        CHECK(crossing_occurs(s, q) == expected);
    }
}

TEST_CASE("crossing trivia: shared open vertex, closed world") {
    auto dom = build_box(2, 1, Metric::LInf);
    auto G = green(dom);
    auto s = extend_level_set(dom, sample_field(dom, G, 4), -1e6, 5);
    const Coord origin{0, 0, 0};
    CrossingQuery overlap{RegionSpec::box(origin, 1), RegionSpec::box(origin, 1),
                          std::nullopt, -1e6};
    CHECK(crossing_occurs(s, overlap));
    auto closed = extend_level_set(dom, s.values, 1e6, 5);
    CrossingQuery q{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 1),
                    std::nullopt, 1e6};
    CHECK(!crossing_occurs(closed, q));
}

TEST_CASE("estimate_crossing degenerate levels") {
    auto dom = build_box(2, 2, Metric::LInf);
    const Coord origin{0, 0, 0};
    CrossingQuery q{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 2),
                    std::nullopt, -1e6};
    CHECK(estimate_crossing(dom, q, 500, 7).value == 1.0);
    q.h = 1e6;
    CHECK(estimate_crossing(dom, q, 500, 7).value == 0.0);
}

TEST_CASE("estimates at heights: coupled estimates are antitone in h") {
    auto dom = build_box(2, 2, Metric::LInf);
    FieldSampler sampler = FieldSampler::spectral(dom);
    const Coord origin{0, 0, 0};
    CrossingQuery q{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 2),
                    std::nullopt, 0.0};
    HeightSchedule schedule({0.5, 0.25, 0.0});
    auto ests = estimate_crossing_at_heights(sampler, q, schedule, 4000, 11);
    REQUIRE(ests.size() == 3);
    CHECK(ests[0].value <= ests[1].value);
    CHECK(ests[1].value <= ests[2].value);

    HeightSchedule one({0.25});
    auto single = estimate_crossing_at_heights(sampler, q, one, 4000, 13);
    CrossingQuery q25 = q;
    q25.h = 0.25;
    auto plain = estimate_crossing(sampler, q25, 4000, 13);
    CHECK(single[0].successes == plain.successes);
}

TEST_CASE("restriction: enlarging the region cannot destroy a crossing") {
    Philox rng(303, 0);
    auto dom = build_box(2, 2, Metric::LInf);
    const Coord origin{0, 0, 0};
    for (int trial = 0; trial < 300; ++trial) {
        FieldSample s = random_sample(dom, 0.0, rng, 0.6);
        CrossingQuery qs{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 1),
                         RegionSpec::box(origin, 1), 0.0};
        CrossingQuery qb = qs;
        qb.restriction = RegionSpec::box(origin, 2);
        if (crossing_occurs(s, qs)) CHECK(crossing_occurs(s, qb));
    }
}

TEST_CASE("chemical distance basics") {
    auto dom = build_explicit_domain(
        2, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}, {5, 0, 0}});
    FieldSample s;
    s.dom = &dom;
    s.h = 0.0;
    s.values = Eigen::VectorXd::Ones(dom.interior_count);
    s.edge_open.assign(dom.edges.size(), 0);
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        if (dom.is_interior(u) && dom.is_interior(v)) s.edge_open[e] = 1;
    }
    Vertex a = dom.vertex_at({0, 0, 0});
    Vertex b = dom.vertex_at({5, 0, 0});
    CHECK(chemical_distance(s, a, a) == 0);
    CHECK(chemical_distance(s, a, b) == 5);  // the only route has length 5
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        if (dom.coord(u)[0] == 2 && dom.coord(v)[0] == 3) s.edge_open[e] = 0;
    }
    CHECK(chemical_distance(s, a, b) == kDistanceInfinite);
}

TEST_CASE("chemical distance dominates the lattice metric") {
    Philox rng(404, 0);
    auto dom = build_box(2, 2, Metric::LInf);
    for (int trial = 0; trial < 200; ++trial) {
        FieldSample s = random_sample(dom, 0.0, rng, 0.7);
        Vertex u = static_cast<Vertex>(rng.next_double() * dom.interior_count);
        Vertex v = static_cast<Vertex>(rng.next_double() * dom.interior_count);
        int64_t d = chemical_distance(s, u, v);
        if (d != kDistanceInfinite) CHECK(d >= dom.dist(dom.coord(u), dom.coord(v)));
    }
}

TEST_CASE("conditional chemical scan: degenerate thresholds and monotonicity") {
    auto dom = build_box(3, 4, Metric::LInf);
    auto res =
        conditional_chemical_scan(dom, 0.26, 0.51, 0.76, 0.0, 3000, 17, {0.0, 1e9});
    REQUIRE(res.defined);
    CHECK(res.rows[0].conditional.value == 1.0);  // any positive distance > 0
    CHECK(res.rows[1].conditional.value == 0.0);  // nothing exceeds 1e9
    CHECK(res.acceptance_rate > 0.0);
    CHECK_THROWS(conditional_chemical_scan(dom, 0.5, 0.3, 0.8, 0.0, 10, 1, {1.0}));

    auto curve = conditional_chemical_scan(dom, 0.26, 0.51, 0.76, 0.0, 3000, 19,
                                           {0.0, 0.3, 0.6, 1.2, 2.4});
    REQUIRE(curve.defined);
    for (size_t i = 1; i < curve.rows.size(); ++i)
        CHECK(curve.rows[i].conditional.value <=
              curve.rows[i - 1].conditional.value + 1e-12);
}
