#include <doctest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "cableperc/geometry.hpp"
#include "cableperc/rng.hpp"

using namespace cableperc;

TEST_CASE("box interior counts") {
    CHECK(build_box(2, 1, Metric::LInf).interior_count == 9);
    CHECK(build_box(2, 2, Metric::L1).interior_count == 13);
    CHECK(build_box(3, 1, Metric::LInf).interior_count == 27);
    CHECK_THROWS(build_box(1, 2));
    CHECK_THROWS(build_box(2, 0));
}

TEST_CASE("slab counts and shape") {
    auto path = build_slab(0, 3);
    CHECK(path.interior_count == 7);
    CHECK(path.vertex_count() - path.interior_count == 2);
    CHECK(build_slab(1, 2).interior_count == 10);
    CHECK(build_slab(2, 2).interior_count == 15);
    CHECK_THROWS(build_slab(0, 0));
    CHECK_THROWS(build_slab(-1, 2));
}

TEST_CASE("region vertices: box, boundary, annulus") {
    auto dom = build_box(2, 3, Metric::L1);
    const Coord origin{0, 0, 0};
    CHECK(region_vertices(dom, RegionSpec::annulus(origin, 1, 2)).size() == 12);
    CHECK(region_vertices(dom, RegionSpec::boundary(origin, 1)).size() == 4);
    auto just_origin = region_vertices(dom, RegionSpec::box(origin, 0));
    REQUIRE(just_origin.size() == 1);
    CHECK(dom.coord(just_origin[0]) == origin);
    CHECK_THROWS(region_vertices(dom, RegionSpec::box({99, 0, 0}, 1)));
    CHECK_THROWS(region_vertices(dom, RegionSpec::annulus(origin, 3, 2)));
}

TEST_CASE("sphere-plus-ball decomposition of a ball") {
    for (auto metric : {Metric::LInf, Metric::L1}) {
        auto dom = build_box(3, 3, metric);
        const Coord origin{0, 0, 0};
        for (int n = 1; n <= 3; ++n) {
            auto ball = region_vertices(dom, RegionSpec::box(origin, n));
            auto smaller = region_vertices(dom, RegionSpec::box(origin, n - 1));
            auto sphere = region_vertices(dom, RegionSpec::boundary(origin, n));
            std::set<Vertex> united(smaller.begin(), smaller.end());
            for (Vertex v : sphere) CHECK(united.insert(v).second);  // disjoint
            CHECK(united == std::set<Vertex>(ball.begin(), ball.end()));
        }
    }
}

TEST_CASE("handshake identity over random domains") {
    Philox rng(5, 0);
    for (int trial = 0; trial < 12; ++trial) {
        int d = rng.next_double() < 0.5 ? 2 : 3;
        int n = 1 + static_cast<int>(rng.next_double() * 3);
        auto metric = rng.next_double() < 0.5 ? Metric::LInf : Metric::L1;
        auto dom = trial % 4 == 3 ? build_slab(trial % 3, 2 + n) : build_box(d, n, metric);
        int64_t degree_sum = 0;
        for (Vertex v = 0; v < dom.interior_count; ++v) degree_sum += dom.degree(v);
        int64_t cross_edges = 0;
        for (const auto& e : dom.edges)
            if (!dom.is_interior(e[1])) ++cross_edges;
        CHECK(degree_sum == 2 * static_cast<int64_t>(dom.edges.size()) - cross_edges);
    }
}

TEST_CASE("edges join metric-1 lattice neighbors, no duplicates") {
    auto dom = build_box(3, 2, Metric::L1);
    std::set<std::pair<Vertex, Vertex>> seen;
    for (const auto& e : dom.edges) {
        CHECK(e[0] < e[1]);
        CHECK(seen.emplace(e[0], e[1]).second);
        const Coord& a = dom.coord(e[0]);
        const Coord& b = dom.coord(e[1]);
        int diff = std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
        CHECK(diff == 1);
    }
}

TEST_CASE("interior vertices have all lattice neighbors present in a box") {
    auto dom = build_box(3, 2, Metric::LInf);
    for (Vertex v = 0; v < dom.interior_count; ++v) CHECK(dom.degree(v) == 6);
    auto dom2 = build_box(2, 3, Metric::L1);
    for (Vertex v = 0; v < dom2.interior_count; ++v) CHECK(dom2.degree(v) == 4);
}

TEST_CASE("dirichlet layer has no internal edges and touches interior only") {
    auto dom = build_box(2, 2, Metric::LInf);
    for (const auto& e : dom.edges) CHECK(dom.is_interior(e[0]));
    for (Vertex v = dom.interior_count; v < dom.vertex_count(); ++v)
        CHECK(dom.degree(v) >= 1);
}

TEST_CASE("construction is deterministic") {
    auto a = build_box(3, 2, Metric::LInf);
    auto b = build_box(3, 2, Metric::LInf);
    CHECK(a.coords == b.coords);
    CHECK(a.edges == b.edges);
}

TEST_CASE("descriptor round trip") {
    auto dom = build_box(3, 2, Metric::L1);
    auto back = domain_from_descriptor(dom.descriptor());
    CHECK(back.coords == dom.coords);
    auto slab = build_slab(2, 4);
    auto back2 = domain_from_descriptor(slab.descriptor());
    CHECK(back2.coords == slab.coords);
}

TEST_CASE("slab regions use the strip graph metric") {
    auto slab = build_slab(2, 5);
    const Coord origin{0, 0, 0};
    auto sphere1 = region_vertices(slab, RegionSpec::boundary(origin, 1));
    CHECK(sphere1.size() == 3);  // (1,0), (-1,0), (0,1); (0,-1) does not exist
    auto layer = region_vertices(slab, RegionSpec::dirichlet_layer());
    CHECK(layer.size() == 6);
}
