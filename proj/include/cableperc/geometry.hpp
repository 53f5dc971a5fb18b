#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cableperc {

using Vertex = int32_t;
using Coord = std::array<int, 3>;  // d = 2 domains keep the third entry at 0

enum class Metric { LInf, L1 };

Metric metric_from_string(const std::string& s);
std::string metric_to_string(Metric m);

// Finite vertex/edge set carved from Z^d (box) or from the slab
// Z x {0..k}^(d-2) truncated to longitudinal coordinates [-L, L].
// Vertices are ordered interior-first, each block lexicographically, so
// construction is deterministic. The boundary block is the Dirichlet layer:
// it carries field value 0 and has edges only into the interior.
struct LatticeDomain {
    enum class Kind { Box, Slab, Explicit };

    int d = 0;  // ambient dimension label (2 or 3)
    Metric metric = Metric::LInf;
    Kind kind = Kind::Box;
    int box_halfwidth = 0;    // boxes
    int slab_thickness = 0;   // slabs: transverse coordinates {0..k}
    int slab_halflength = 0;  // slabs: longitudinal coordinates [-L, L]

    std::vector<Coord> coords;  // interior block then boundary block
    Vertex interior_count = 0;
    std::vector<std::array<Vertex, 2>> edges;  // u < v

    // CSR adjacency over all vertices; edge_index[slot] maps back into edges.
    std::vector<int32_t> adj_offset;
    std::vector<Vertex> adj;
    std::vector<int32_t> edge_index;

    Vertex vertex_count() const { return static_cast<Vertex>(coords.size()); }
    bool is_interior(Vertex v) const { return v < interior_count; }
    int degree(Vertex v) const { return adj_offset[v + 1] - adj_offset[v]; }
    Vertex vertex_at(const Coord& c) const;  // -1 if absent
    const Coord& coord(Vertex v) const { return coords[static_cast<size_t>(v)]; }

    // Domain metric between coordinates: LInf/L1 for boxes, the slab graph
    // metric (which coincides with L1 on a strip) for slabs.
    int dist(const Coord& a, const Coord& b) const;

    nlohmann::json descriptor() const;

private:
    std::unordered_map<uint64_t, Vertex> index_;
    friend LatticeDomain build_box(int, int, Metric);
    friend LatticeDomain build_slab(int, int);
    friend LatticeDomain build_explicit_domain(int, const std::vector<Coord>&, Metric);
    void finalize();
};

LatticeDomain build_box(int d, int n, Metric metric = Metric::LInf);
LatticeDomain build_slab(int k, int L);

// Arbitrary interior vertex set; the Dirichlet layer is derived as every
// lattice neighbor not in the interior.
LatticeDomain build_explicit_domain(int d, const std::vector<Coord>& interior,
                                    Metric metric = Metric::LInf);
LatticeDomain domain_from_descriptor(const nlohmann::json& j);

struct RegionSpec {
    enum class Tag { Box, Boundary, Annulus, Explicit, DirichletLayer };

    Tag tag = Tag::Box;
    Coord center{0, 0, 0};
    int m = 0;  // inner radius for annuli
    int n = 0;  // radius
    std::vector<Vertex> vertices;  // Explicit tag

    static RegionSpec box(Coord c, int n) { return {Tag::Box, c, 0, n, {}}; }
    static RegionSpec boundary(Coord c, int n) { return {Tag::Boundary, c, 0, n, {}}; }
    static RegionSpec annulus(Coord c, int m, int n) { return {Tag::Annulus, c, m, n, {}}; }
    static RegionSpec explicit_set(std::vector<Vertex> vs) {
        return {Tag::Explicit, {0, 0, 0}, 0, 0, std::move(vs)};
    }
    static RegionSpec dirichlet_layer() { return {Tag::DirichletLayer, {0, 0, 0}, 0, 0, {}}; }

    void validate(const LatticeDomain& dom) const;
};

// Box tag: {x : rho(c,x) <= n}. Boundary: {x : rho(c,x) = n}.
// Annulus: B(c,n) \ B(c,m-1). DirichletLayer: the boundary block.
std::vector<Vertex> region_vertices(const LatticeDomain& dom, const RegionSpec& spec);

}  // namespace cableperc
