#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/iic.hpp"
#include "cableperc/mc.hpp"
#include "cableperc/percolation.hpp"

namespace cableperc {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Heat kernel on the circle. Image series for small t, dual (Fourier) series
// for large t; both truncated so the dropped tail is below 1e-14.
double circle_kernel(double t, double theta1, double theta2);
double circle_kernel_image(double t, double delta);
double circle_kernel_dual(double t, double delta);

struct Arc {
    double a = 0.0;
    double b = 0.0;  // a < b, b - a <= 2*pi
};

// Absorbed kernel on the arc by the method of images. Endpoint arguments
// give 0; arguments outside the closed arc are rejected.
double arc_kernel(double t, double theta1, double theta2, const Arc& arc);

// Finite set of absorbed angles; the open arcs between consecutive angles
// partition the complement of the set.
struct AvoidSet {
    std::vector<double> angles;  // sorted, within [0, 2*pi)

    explicit AvoidSet(std::vector<double> raw);
    static AvoidSet pm_i();                  // {pi/2, 3*pi/2}: the set {+-i}
    static AvoidSet pm_xi(double alpha);     // {alpha, alpha+pi}: {+-e^{i alpha}}
    static AvoidSet pm_xi_bar(double alpha); // conjugate: {-alpha, pi-alpha}
    AvoidSet united(const AvoidSet& other) const;

    // Unwrapped open arc containing theta, or nullopt when theta lies on the
    // set. The returned bounds satisfy lo < theta < hi, hi - lo <= 2*pi.
    std::optional<Arc> arc_containing(double theta) const;
};

// Probability that one edge trajectory of duration t from theta_x to theta_y
// avoids S: 0 across distinct arcs (or on S), else the ratio of the absorbed
// arc kernel to the free circle kernel.
double edge_avoid_probability(double t, double theta_x, double theta_y,
                              const AvoidSet& S);

// Joint indicator pair for a single trajectory and two avoid sets, built
// from P(avoid both) = P(avoid the union) and the two marginals.
std::pair<bool, bool> joint_edge_indicators(double t, double theta_x, double theta_y,
                                            const AvoidSet& S1, const AvoidSet& S2,
                                            Philox& rng);

// Same construction for several sets at once via inclusion-exclusion over
// unions; bit i of the result is the avoid indicator for sets[i]. Negative
// atoms from numerical noise are clamped at zero and counted.
uint32_t joint_edge_indicator_mask(double t, double theta_x, double theta_y,
                                   const std::vector<const AvoidSet*>& sets,
                                   Philox& rng, int64_t* clamped = nullptr);

// Monte Carlo oracle for edge_avoid_probability: discretized lifted bridge,
// winding sampled from the heat-kernel weights. Positive discretization bias
// of order steps^{-1/2}.
Estimate villain_avoid_oracle(double t, double theta_x, double theta_y,
                              const AvoidSet& S, int steps, int64_t reps,
                              uint64_t seed);
// Barrier-shift continuity correction: the discretely monitored trajectory
// behaves like the continuous one with the arc widened by 0.5826 sqrt(t dt)
// per endpoint; the band is that probability shift with 40% headroom.
double villain_avoid_bias_band(double t, double theta_x, double theta_y,
                               const AvoidSet& S, int steps);

// Angle per interior vertex, time per edge, boundary spins pinned at angle 0.
struct VillainState {
    const LatticeDomain* dom = nullptr;
    Eigen::VectorXd theta;   // interior angles in [0, 2*pi)
    Eigen::VectorXd edge_t;  // positive time per domain edge

    VillainState(const LatticeDomain& d, double t);
    VillainState(const LatticeDomain& d, Eigen::VectorXd edge_times);
    double angle_at(Vertex v) const { return dom->is_interior(v) ? theta(v) : 0.0; }
};

// Heat-bath sweeps: each interior site resampled from the exact single-site
// conditional density via an inverse CDF on `bins` angular bins (midpoint
// weights, O(bins^-2) bias).
VillainState gibbs_sample(const VillainState& state, int sweeps, Philox& rng,
                          int bins = 4096);

// Per-edge open indicators for the avoid set S given the spin configuration
// (edges are conditionally independent given the vertex angles), plus the
// resulting union-find labeling over all vertices.
struct VillainClusters {
    std::vector<uint8_t> edge_open;
    ClusterLabeling labels;
};
VillainClusters villain_clusters(const VillainState& state, const AvoidSet& S,
                                 Philox& rng);

// Replica chains with batched measurements. Per-replica means of each
// observable component come back row-per-replica; cross-replica variance
// gives honest errors despite within-chain correlation.
struct ChainPlan {
    int64_t replicas = 64;
    int equil = 0;  // 0: auto from the autocorrelation pilot (10x tau)
    int batch = 32;
    int stride = 2;
    uint64_t seed = 0;
    int bins = 4096;
};

struct ChainStats {
    Eigen::MatrixXd replica_means;  // replicas x obs_dim
    int equil_sweeps = 0;
    double tau_int = 0.0;

    Eigen::VectorXd mean() const;
    Eigen::MatrixXd covariance_of_mean() const;  // covariance of the grand mean
};

ChainStats run_villain_observables(
    const LatticeDomain& dom, const Eigen::VectorXd& edge_t, const ChainPlan& plan,
    int obs_dim,
    const std::function<void(const VillainState&, Philox&, double*)>& observe);

// Integrated autocorrelation time of the mean spin alignment, from a pilot
// chain; used to size equilibration.
double villain_autocorr_tau(const LatticeDomain& dom, const Eigen::VectorXd& edge_t,
                            int bins, uint64_t seed);

enum class RatioMode { Cos, Cos2 };

struct RatioEstimate {
    double ratio = 0.0;
    double stderr_ = 0.0;
    double lo = 0.0, hi = 0.0;
    double numerator = 0.0, denominator = 0.0;
    double numerator_se = 0.0, denominator_se = 0.0;
    int equil_sweeps = 0;
    double tau_int = 0.0;
    bool defined = true;  // false when the denominator interval touches 0
    uint64_t seed = 0;
};

// <cos theta_x> / P[x <-> Dirichlet layer in {+-i}^c] (mode Cos), or
// <cos 2 theta_x> over the joint {+-xi}, {+-xi-bar} connection (mode Cos2)
// with xi = e^{i alpha}; x is the center vertex.
RatioEstimate correlation_ratio(const LatticeDomain& dom, double t, ChainPlan plan,
                                RatioMode mode, double alpha = 1.55);

struct VillainScanColumn {
    double alpha = 0.0;  // 0 marks the {+-i} column
    ConditionalEstimate ce;
};

struct VillainScanRow {
    int n = 0;
    VillainScanColumn column_a;
    std::vector<VillainScanColumn> column_b;
    double diff_terminal = 0.0;   // |A - B(last alpha)|
    double diff_sigma = 0.0;
};

// Conditional cylinder-event scan for the two IIC-type limits: column A
// conditions on reach-R_max through {+-i}^c edges, column B on the joint
// {+-xi}^c and {+-xi-bar}^c reach events, per alpha. All three edge sets are
// coupled through one trajectory law per edge, so at alpha = pi/2 column B
// reproduces column A by construction.
std::vector<VillainScanRow> villain_iic_scan(const std::vector<int>& ns,
                                             const CylinderEvent& event,
                                             const std::vector<double>& alphas,
                                             double t, ChainPlan plan, int R_max = 0);

}  // namespace cableperc
