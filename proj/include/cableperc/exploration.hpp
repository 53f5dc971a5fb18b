#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "cableperc/geometry.hpp"
#include "cableperc/mc.hpp"
#include "cableperc/potential.hpp"

namespace cableperc {

// Nested explored vertex sets I_0 <= I_1 <= ... with a target average set A
// disjoint from every stage.
struct ExplorationSequence {
    const LatticeDomain* dom = nullptr;
    std::vector<std::vector<Vertex>> stages;
    std::vector<Vertex> target;  // the set A averaged by X_A

    ExplorationSequence(const LatticeDomain& d, std::vector<std::vector<Vertex>> s,
                        std::vector<Vertex> a);
};

// Var[X_A | field on I] = (1/|A|^2) sum over A x A of the Green matrix with I
// absorbing.
double conditional_variance(const LatticeDomain& dom, const std::vector<Vertex>& A,
                            const std::vector<Vertex>& I);

// Quadratic variation per stage: Var[X_A | I_0] - Var[X_A | I_t]. Each step
// is cross-checked internally against the harmonic-measure decomposition of
// the Green difference (exact linear algebra, 1e-10).
std::vector<double> quadratic_variation(const LatticeDomain& dom,
                                        const ExplorationSequence& seq,
                                        double identity_tol = 1e-10);

// Max residual of the Definition-2 harmonic-measure decomposition of the
// Green difference over every vertex pair outside I_t, for nested I_s <= I_t.
double harmonic_decomposition_residual(const LatticeDomain& dom, const GreenMatrix& base,
                                       const std::vector<Vertex>& I_s,
                                       const std::vector<Vertex>& I_t);

// Conditional mean of X_A given boundary values observed on I:
// (1/|A|) sum_{v in A} sum_{w in I} Hm(v,w;I) phi_w.
double martingale_step(const LatticeDomain& dom, const std::vector<Vertex>& A,
                       const std::vector<Vertex>& I,
                       const std::map<Vertex, double>& boundary_values);

struct FirstPassageParams {
    double slope = 0.0;      // m
    double intercept = 1.0;  // b > 0
    double horizon = 1.0;    // T > 0
};

// P[tau <= T] for tau = inf{t > 0 : B_t <= m t - b}:
// Phi-bar(b/sqrt(T) - m sqrt(T)) + exp(2bm) Phi-bar(b/sqrt(T) + m sqrt(T)),
// clamped to [0,1].
double first_passage_cdf(const FirstPassageParams& p);

// Euler-discretized oracle; discrete checks miss excursions, so the estimate
// has a negative bias of order steps^{-1/2} (see first_passage_bias_band).
Estimate first_passage_mc_oracle(const FirstPassageParams& p, int64_t paths, int steps,
                                 uint64_t seed);
// First-order continuity correction: beta sqrt(dt) times dF/db.
double first_passage_bias_band(const FirstPassageParams& p, int steps);

struct TauBoundsReport {
    double h = 0.0;
    double sigma2 = 0.0;           // variance parameter sigma^2_d
    double f1 = 0.0, f2 = 0.0;     // finite-K harmonic measure quotients
    double tail_f1 = 0.0;          // P[tau_h >= f1]
    double tail_f2 = 0.0;
    Estimate crossing;             // p_hat_{N,h}
    double green_origin = 0.0;     // G(0,0) on the enlarged domain
    bool defined = true;
};

// Finite-K diagnostic for the stopping-time percolation bounds: harmonic
// measure quotients at a far vertex x_K of an enlarged box of half-width K,
// the tau_h tail marginalized over phi_0 ~ N(0, G(0,0)), and the Monte Carlo
// crossing estimate side by side. sigma2 <= 0 selects the default G(0,0).
TauBoundsReport tau_h_percolation_bounds(int d, double h, int K_far, int N,
                                         int64_t reps, uint64_t seed,
                                         double sigma2 = 0.0);

}  // namespace cableperc
