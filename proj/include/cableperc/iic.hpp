#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/gff.hpp"
#include "cableperc/mc.hpp"
#include "cableperc/percolation.hpp"

namespace cableperc {

// Event depending on a declared finite vertex/edge set. Vertices are given
// as lattice coordinates so the same event works across a domain sequence.
struct CylinderEvent {
    enum class Kind { VertexOpen, EdgeOpen, LocalPattern, DegreeAtLeast, ReachRadius };

    Kind kind = Kind::VertexOpen;
    Coord a{0, 0, 0};
    Coord b{0, 0, 0};  // EdgeOpen second endpoint
    int k = 0;         // DegreeAtLeast threshold or ReachRadius radius
    std::vector<std::pair<Coord, bool>> pattern;

    static CylinderEvent vertex_open(Coord v) { return {Kind::VertexOpen, v, {}, 0, {}}; }
    static CylinderEvent edge_open(Coord u, Coord v) { return {Kind::EdgeOpen, u, v, 0, {}}; }
    static CylinderEvent degree_at_least(Coord v, int k) {
        return {Kind::DegreeAtLeast, v, {}, k, {}};
    }
    static CylinderEvent local_pattern(std::vector<std::pair<Coord, bool>> p) {
        return {Kind::LocalPattern, {}, {}, 0, std::move(p)};
    }
    static CylinderEvent reach_radius(Coord center, int radius) {
        return {Kind::ReachRadius, center, {}, radius, {}};
    }
    std::string describe() const;
};

bool eval_cylinder_event(const FieldSample& sample, const CylinderEvent& event);

// Evaluation against a bare edge-indicator configuration (the Villain
// clusters): a vertex counts as open when it has an open incident edge.
bool eval_cylinder_event_edges(const LatticeDomain& dom,
                               const std::vector<uint8_t>& edge_open,
                               const CylinderEvent& event);

// Conditioning: the cluster of `center` reaches the sphere rho = radius at
// the sample's level. Serves both the crossing-to-radius conditioning and
// the reach-R_max proxy for the infinite-cluster conditioning.
struct Conditioning {
    Coord center{0, 0, 0};
    int radius = 0;
    std::string describe() const;
};

struct ConditionalEstimate {
    std::string event;
    std::string conditioning;
    double h = 0.0;
    Estimate estimate;       // conditional probability over accepted samples
    double acceptance_rate = 0.0;
    int64_t accepted = 0;
    bool defined = true;     // false when nothing was accepted
};

ConditionalEstimate estimate_conditional(const FieldSampler& sampler,
                                         const CylinderEvent& event,
                                         const Conditioning& conditioning, double h,
                                         int64_t reps, uint64_t seed);

struct ScanRow {
    double x = 0.0;          // radius n or height h
    ConditionalEstimate ce;
    double diff_prev = 0.0;  // |p(i) - p(i-1)|
    double diff_sigma = 0.0; // combined stderr of the difference
};

struct ScanTable {
    std::vector<ScanRow> rows;
    const ScanRow& terminal() const { return rows.back(); }
};

// P_0[E | 0 <-> boundary sphere n] over a growing sequence of boxes, with
// successive-difference diagnostics.
ScanTable iic_convergence_scan(int d, const std::vector<int>& radii,
                               const CylinderEvent& event, double h, int64_t reps,
                               uint64_t seed);

// P_h[E | cluster of the origin reaches R_max] along a decreasing height
// schedule on a fixed box.
ScanTable iic_height_scan(int d, int n, const CylinderEvent& event,
                          const HeightSchedule& schedule, int R_max, int64_t reps,
                          uint64_t seed);

struct EpsilonCell {
    double h = 0.0;
    int pair_index = 0;
    Estimate estimate;
    bool defined = false;
};

struct EpsilonResult {
    std::vector<EpsilonCell> cells;
    double sup = 0.0;         // max over defined cells
    double sup_lo = 0.0, sup_hi = 0.0;
    bool defined = false;
    std::vector<std::string> family;  // description of the region pairs
};

// Supremum over a finite h-grid and a finite family of annulus region pairs
// of P_h[{F1 <-/-> F2 within A_i}^c | boundary sphere r_i <-> sphere r_next].
// Default family: opposite outer faces of the annulus, one pair per axis.
EpsilonResult epsilon_i_estimate(const LatticeDomain& dom, int r_i, int r_next,
                                 double h0, int h_grid, int64_t reps, uint64_t seed);

struct QmResult {
    double ratio = 0.0;
    double stderr_ = 0.0;
    double lo = 0.0, hi = 0.0;  // delta-method 95% interval
    Estimate numerator, denom_x, denom_y;
    int64_t inclusion_violations = 0;  // pathwise subset check failures
    bool defined = true;
    uint64_t seed = 0;
};

// C_hat = P[X <-> Y within Z] / (P[X <-> sphere(r)] P[Y <-> sphere(r)]),
// all three indicators from shared samples, delta-method interval.
QmResult qm_ratio(const LatticeDomain& dom, const RegionSpec& X, const RegionSpec& Y,
                  const std::optional<RegionSpec>& Z, Coord center, int r, double h,
                  int64_t reps, uint64_t seed);

}  // namespace cableperc
