#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/mc.hpp"
#include "cableperc/potential.hpp"

namespace cableperc {

// One GFF realization extended to cable edges at level h. Boundary vertices
// carry value exactly 0 and participate in edges.
struct FieldSample {
    const LatticeDomain* dom = nullptr;
    Eigen::VectorXd values;  // interior vertices
    double h = 0.0;
    std::vector<uint8_t> edge_open;  // per domain edge
    uint64_t seed = 0;

    double value_at(Vertex v) const { return dom->is_interior(v) ? values(v) : 0.0; }
    bool vertex_open(Vertex v) const { return value_at(v) >= h; }
};

struct HeightSchedule {
    std::vector<double> heights;  // strictly decreasing, >= 0

    explicit HeightSchedule(std::vector<double> hs);
    size_t size() const { return heights.size(); }
};

// Exact Dirichlet GFF sampler with covariance green(dom). Two backends:
//  - dense: values = chol_lower * z (any domain up to the exact-mode cap);
//  - spectral: sine-basis synthesis for ell-infinity boxes, used when the
//    dense factorization would not fit the cap (and cheaper in general).
class FieldSampler {
public:
    static FieldSampler make(const LatticeDomain& dom);
    static FieldSampler dense(const LatticeDomain& dom, const GreenMatrix& G);
    static FieldSampler spectral(const LatticeDomain& dom);

    Eigen::VectorXd sample(Philox& rng) const;
    const LatticeDomain& domain() const { return *dom_; }
    const char* backend() const { return spectral_ ? "spectral" : "dense"; }

    // Exact covariance of the spectral synthesis, for identity tests.
    Eigen::MatrixXd spectral_covariance() const;

private:
    const LatticeDomain* dom_ = nullptr;
    bool spectral_ = false;
    Eigen::MatrixXd chol_lower_;
    Eigen::MatrixXd sine_;        // symmetric DST-I basis, M x M
    Eigen::VectorXd mode_scale_;  // sqrt(2d / lambda) per flattened mode
    int grid_ = 0;
};

// values drawn on dom with the cached dense factor, per the sampler contract.
Eigen::VectorXd sample_field(const LatticeDomain& dom, const GreenMatrix& G,
                             uint64_t seed);

// Probability that the cable interpolation between endpoint values a and b
// plus a centered bridge of covariance 2d(r ^ r' - r r') stays >= h:
// 0 if a < h or b < h, else 1 - exp(-(a-h)(b-h)/d).
double bridge_open_probability(double a, double b, double h, int d);

// Independent oracle: discretized Gaussian bridges on a uniform grid. The
// discrete minimum overestimates staying above, so the estimate carries a
// positive bias of order steps^{-1/2}; see bridge_oracle_bias_band.
Estimate bridge_oracle(double a, double b, double h, int d, int steps,
                       int64_t reps, uint64_t seed);

// Stated bias band for the oracle above: first-order continuity correction
// beta * sigma * sqrt(dt) times the closed-form density of the bridge
// minimum at the level, with 30% headroom.
double bridge_oracle_bias_band(double a, double b, double h, int d, int steps);

// Extends vertex values to per-edge open indicators: each edge independently
// open with bridge_open_probability given its endpoint values.
FieldSample extend_level_set(const LatticeDomain& dom, const Eigen::VectorXd& values,
                             double h, uint64_t seed);
FieldSample extend_level_set(const LatticeDomain& dom, const Eigen::VectorXd& values,
                             double h, Philox& rng);

// Shared-uniform coupling: one sample per height, nested open edge sets
// (open at h' is a subset of open at h for h' > h).
std::vector<FieldSample> extend_level_set_coupled(const LatticeDomain& dom,
                                                  const Eigen::VectorXd& values,
                                                  const HeightSchedule& schedule,
                                                  Philox& rng);

void dump_field_csv(const FieldSample& sample, const std::string& path);

}  // namespace cableperc
