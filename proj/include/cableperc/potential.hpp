#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/mc.hpp"

namespace cableperc {

// Maximum interior size for the dense exact mode.
inline constexpr Vertex kDenseDomainCap = 5000;

// Dense Green's function over interior vertices, in visit-count units:
// G = 2d (D - A)^{-1} with Dirichlet boundary, which for a full box equals
// (I - Q)^{-1} with Q(u,v) = 1/(2d) on interior-adjacent pairs. Boundary
// rows/columns are implicitly zero.
struct GreenMatrix {
    Eigen::MatrixXd G;            // interior x interior
    Eigen::MatrixXd chol_lower;   // lower-triangular factor of G
    std::vector<Vertex> absorbed; // extra absorbed interior set (empty for green())

    double at(const LatticeDomain& dom, Vertex u, Vertex v) const {
        if (!dom.is_interior(u) || !dom.is_interior(v)) return 0.0;
        return G(u, v);
    }
};

GreenMatrix green(const LatticeDomain& dom);

// Green matrix of the domain with the interior set I additionally absorbing.
// Rows and columns of I are zero; I = all interior gives the all-zero matrix.
GreenMatrix green_after_exploration(const LatticeDomain& dom,
                                    const std::vector<Vertex>& explored);

// Mean visit count of v by the killed walk from u; independent oracle for
// green().
Estimate green_mc_oracle(const LatticeDomain& dom, Vertex u, Vertex v,
                         int64_t walks, uint64_t seed);

// Hitting distribution on K of the walk from v, killed at the Dirichlet
// layer. Entries live on `support` (the set K in its given order); mass
// escaping through the boundary without touching K is dropped, so the
// entries sum to 1 exactly when K screens v from the boundary.
struct HarmonicMeasure {
    Vertex start = -1;
    std::vector<Vertex> support;
    Eigen::VectorXd weights;

    double total() const { return weights.size() ? weights.sum() : 0.0; }
};

HarmonicMeasure harmonic_measure(const LatticeDomain& dom, Vertex v,
                                 const std::vector<Vertex>& K);

// All-starts hitting matrix: rows over interior vertices, columns in K order;
// row v is harmonic_measure(dom, v, K).
Eigen::MatrixXd harmonic_measure_matrix(const LatticeDomain& dom,
                                        const std::vector<Vertex>& K);

// Matrix-free conjugate-gradient versions for domains beyond the dense cap.
// hitting_probability: P[walk from `from` hits S before the Dirichlet layer].
double hitting_probability(const LatticeDomain& dom, Vertex from,
                           const std::vector<Vertex>& S, double tol = 1e-10);
// One Green column entry, 2d (L^{-1})_{uv}, without forming the dense matrix.
double green_entry(const LatticeDomain& dom, Vertex u, Vertex v, double tol = 1e-10);

// Point on the cable of an edge: offset r in [0,1] measured from u.
struct CablePoint {
    Vertex u = -1;
    Vertex v = -1;
    double r = 0.0;

    CablePoint() = default;
    CablePoint(Vertex u_, Vertex v_, double r_);
    bool same_edge(const CablePoint& o) const { return u == o.u && v == o.v; }
};

// Metric-graph Green's function: bilinear interpolation of the four vertex
// values plus the bridge term 2d (r1 ^ r2 - r1 r2) on a shared edge.
double metric_green(const LatticeDomain& dom, const GreenMatrix& G,
                    const CablePoint& w1, const CablePoint& w2);

void dump_green_csv(const LatticeDomain& dom, const GreenMatrix& G,
                    const std::string& path);

}  // namespace cableperc
