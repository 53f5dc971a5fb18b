#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/gff.hpp"
#include "cableperc/mc.hpp"

namespace cableperc {

class UnionFind {
public:
    explicit UnionFind(int32_t n) : parent_(n), size_(n, 1) {
        for (int32_t i = 0; i < n; ++i) parent_[i] = i;
    }
    int32_t find(int32_t x) {
        int32_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            int32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }
    int32_t component_size(int32_t x) { return size_[find(x)]; }

private:
    std::vector<int32_t> parent_, size_;
};

// Union-find partition of the vertices open at the sample's level, joined
// through open edges (optionally inside a restriction region).
struct ClusterLabeling {
    std::vector<int32_t> root;      // -1 for closed or out-of-restriction vertices
    std::vector<int32_t> size;      // per vertex: size of its cluster (at roots)
    int32_t cluster_count = 0;
    int64_t open_vertex_count = 0;

    bool open(Vertex v) const { return root[static_cast<size_t>(v)] >= 0; }
    bool same_cluster(Vertex u, Vertex v) const {
        return open(u) && open(v) && root[static_cast<size_t>(u)] == root[static_cast<size_t>(v)];
    }
};

ClusterLabeling label_clusters(const FieldSample& sample,
                               const std::optional<RegionSpec>& restriction = std::nullopt);

// Depth-first search through open edges from start; true when it reaches a
// flagged vertex. Ignores vertex openness (callers gate the start if needed).
bool open_cluster_reaches(const LatticeDomain& dom, const std::vector<uint8_t>& edge_open,
                          Vertex start, const std::vector<char>& is_target);

struct CrossingQuery {
    RegionSpec source;
    RegionSpec target;
    std::optional<RegionSpec> restriction;
    double h = 0.0;
};

// Query with regions resolved to vertex sets; resolve once, test many samples.
struct ResolvedCrossing {
    std::vector<Vertex> source;
    std::vector<char> is_target;
    std::vector<char> mask;
    double h = 0.0;
};

ResolvedCrossing resolve_crossing(const LatticeDomain& dom, const CrossingQuery& query);
bool crossing_occurs(const FieldSample& sample, const ResolvedCrossing& rq);
bool crossing_occurs(const FieldSample& sample, const CrossingQuery& query);

// p_hat over independent field samples, Wilson interval.
Estimate estimate_crossing(const LatticeDomain& dom, const CrossingQuery& query,
                           int64_t reps, uint64_t seed);
Estimate estimate_crossing(const FieldSampler& sampler, const CrossingQuery& query,
                           int64_t reps, uint64_t seed);

// One estimate per height; with coupled=true the per-sample open edge sets
// are built from shared uniforms, so they are nested across the schedule.
std::vector<Estimate> estimate_crossing_at_heights(const FieldSampler& sampler,
                                                   const CrossingQuery& query_template,
                                                   const HeightSchedule& schedule,
                                                   int64_t reps, uint64_t seed,
                                                   bool coupled = true);

inline constexpr int64_t kDistanceInfinite = std::numeric_limits<int64_t>::max();

// Breadth-first graph distance through open edges; kDistanceInfinite when
// disconnected. Endpoints must be open to connect (distance 0 needs u open).
int64_t chemical_distance(const FieldSample& sample, Vertex u, Vertex v);
int64_t chemical_distance(const FieldSample& sample, const std::vector<Vertex>& from,
                          const std::vector<Vertex>& to);

struct ChemScanRow {
    double C = 0.0;
    double threshold = 0.0;  // C * N * (log N)^{1/4}
    Estimate conditional;    // P[D > threshold | crossing]
};

struct ChemScanResult {
    double acceptance_rate = 0.0;
    int64_t accepted = 0;
    int64_t reps = 0;
    std::vector<ChemScanRow> rows;
    bool defined = true;  // false when no sample satisfied the conditioning
};

// Theorem-1 style scan: conditions on {V_{alpha N} <-> boundary sphere of
// radius gamma N} and tabulates P[D(V_{alpha N}, sphere beta N) > C N (log N)^{1/4}]
// over a grid of C values, by rejection sampling.
ChemScanResult conditional_chemical_scan(const LatticeDomain& dom, double alpha,
                                         double beta, double gamma, double h,
                                         int64_t reps, uint64_t seed,
                                         const std::vector<double>& C_grid);

}  // namespace cableperc
