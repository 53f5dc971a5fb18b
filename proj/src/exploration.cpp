#include "cableperc/exploration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cableperc/gff.hpp"
#include "cableperc/percolation.hpp"

namespace cableperc {

ExplorationSequence::ExplorationSequence(const LatticeDomain& d,
                                         std::vector<std::vector<Vertex>> s,
                                         std::vector<Vertex> a)
    : dom(&d), stages(std::move(s)), target(std::move(a)) {
    if (stages.empty()) throw std::invalid_argument("ExplorationSequence: no stages");
    if (target.empty()) throw std::invalid_argument("ExplorationSequence: empty target set");
    std::vector<char> prev(static_cast<size_t>(d.interior_count), 0);
    for (size_t t = 0; t < stages.size(); ++t) {
        std::vector<char> cur(static_cast<size_t>(d.interior_count), 0);
        for (Vertex v : stages[t]) {
            if (v < 0 || !d.is_interior(v))
                throw std::invalid_argument("ExplorationSequence: stages must be interior");
            cur[static_cast<size_t>(v)] = 1;
        }
        for (Vertex v = 0; v < d.interior_count; ++v)
            if (prev[static_cast<size_t>(v)] && !cur[static_cast<size_t>(v)])
                throw std::invalid_argument("ExplorationSequence: stages must be nested");
        for (Vertex v : target)
            if (cur[static_cast<size_t>(v)])
                throw std::invalid_argument("ExplorationSequence: target meets explored set");
        prev = cur;
    }
}

double conditional_variance(const LatticeDomain& dom, const std::vector<Vertex>& A,
                            const std::vector<Vertex>& I) {
    if (A.empty()) throw std::invalid_argument("conditional_variance: empty A");
    for (Vertex v : A)
        for (Vertex w : I)
            if (v == w) throw std::invalid_argument("conditional_variance: A meets I");
    GreenMatrix GI = green_after_exploration(dom, I);
    double sum = 0.0;
    for (Vertex v : A)
        for (Vertex w : A) sum += GI.at(dom, v, w);
    double m = static_cast<double>(A.size());
    return sum / (m * m);
}

namespace {

// max residual of the Definition-2 display over v, v' in probe:
// (G_s - G_t)(v,v') - [sum_{w in I_t} Hm_t(v,w) G(w,v')
//                      - sum_{w in I_s} Hm_s(v,w) G(w,v')]
double decomposition_residual(const LatticeDomain& dom, const GreenMatrix& base,
                              const GreenMatrix& Gs, const GreenMatrix& Gt,
                              const std::vector<Vertex>& Is, const std::vector<Vertex>& It,
                              const std::vector<Vertex>& probe) {
    Eigen::MatrixXd Hs, Ht;
    if (!Is.empty()) Hs = harmonic_measure_matrix(dom, Is);
    if (!It.empty()) Ht = harmonic_measure_matrix(dom, It);
    double worst = 0.0;
    for (Vertex v : probe) {
        for (Vertex w : probe) {
            double lhs = Gs.at(dom, v, w) - Gt.at(dom, v, w);
            double rhs = 0.0;
            for (size_t j = 0; j < It.size(); ++j)
                rhs += Ht(v, static_cast<Eigen::Index>(j)) * base.at(dom, It[j], w);
            for (size_t j = 0; j < Is.size(); ++j)
                rhs -= Hs(v, static_cast<Eigen::Index>(j)) * base.at(dom, Is[j], w);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

}  // namespace

double harmonic_decomposition_residual(const LatticeDomain& dom, const GreenMatrix& base,
                                       const std::vector<Vertex>& I_s,
                                       const std::vector<Vertex>& I_t) {
    std::vector<char> in_t(static_cast<size_t>(dom.interior_count), 0);
    for (Vertex v : I_t) in_t[static_cast<size_t>(v)] = 1;
    for (Vertex v : I_s)
        if (!in_t[static_cast<size_t>(v)])
            throw std::invalid_argument("decomposition residual: sets must be nested");
    std::vector<Vertex> probe;
    for (Vertex v = 0; v < dom.interior_count; ++v)
        if (!in_t[static_cast<size_t>(v)]) probe.push_back(v);
    GreenMatrix Gs = green_after_exploration(dom, I_s);
    GreenMatrix Gt = green_after_exploration(dom, I_t);
    return decomposition_residual(dom, base, Gs, Gt, I_s, I_t, probe);
}

std::vector<double> quadratic_variation(const LatticeDomain& dom,
                                        const ExplorationSequence& seq,
                                        double identity_tol) {
    GreenMatrix base = green(dom);
    const auto& I0 = seq.stages.front();
    double var0 = conditional_variance(dom, seq.target, I0);
    GreenMatrix G0 = green_after_exploration(dom, I0);

    std::vector<double> qv;
    qv.reserve(seq.stages.size());
    for (size_t t = 0; t < seq.stages.size(); ++t) {
        const auto& It = seq.stages[t];
        double vart = conditional_variance(dom, seq.target, It);
        qv.push_back(var0 - vart);
        GreenMatrix Gt = green_after_exploration(dom, It);
        double res = decomposition_residual(dom, base, G0, Gt, I0, It, seq.target);
        if (res > identity_tol)
            throw std::runtime_error(
                "quadratic_variation: harmonic-measure decomposition residual " +
                std::to_string(res));
    }
    return qv;
}

double martingale_step(const LatticeDomain& dom, const std::vector<Vertex>& A,
                       const std::vector<Vertex>& I,
                       const std::map<Vertex, double>& boundary_values) {
    if (A.empty()) throw std::invalid_argument("martingale_step: empty A");
    if (I.empty()) throw std::invalid_argument("martingale_step: empty explored set");
    Eigen::MatrixXd H = harmonic_measure_matrix(dom, I);
    double acc = 0.0;
    for (Vertex v : A) {
        if (!dom.is_interior(v))
            throw std::invalid_argument("martingale_step: A must be interior");
        for (size_t j = 0; j < I.size(); ++j) {
            double w = H(v, static_cast<Eigen::Index>(j));
            if (w == 0.0) continue;
            auto it = boundary_values.find(I[j]);
            if (it == boundary_values.end())
                throw std::invalid_argument("martingale_step: missing boundary value");
            acc += w * it->second;
        }
    }
    return acc / static_cast<double>(A.size());
}

double first_passage_cdf(const FirstPassageParams& p) {
    if (!std::isfinite(p.slope) || !std::isfinite(p.intercept) || !std::isfinite(p.horizon))
        throw std::invalid_argument("first_passage_cdf: nonfinite input");
    if (p.intercept <= 0.0) throw std::invalid_argument("first_passage_cdf: need b > 0");
    if (p.horizon <= 0.0) throw std::invalid_argument("first_passage_cdf: need T > 0");
    double sqT = std::sqrt(p.horizon);
    double x1 = p.intercept / sqT - p.slope * sqT;
    double x2 = p.intercept / sqT + p.slope * sqT;
    double term1 = normal_sf(x1);
    double log_term2 = 2.0 * p.intercept * p.slope + log_normal_sf(x2);
    double term2 = log_term2 < -745.0 ? 0.0 : std::exp(log_term2);
    double cdf = term1 + term2;
    return std::min(1.0, std::max(0.0, cdf));
}

double first_passage_bias_band(const FirstPassageParams& p, int steps) {
    double eps = 1e-5 * std::max(1.0, p.intercept);
    FirstPassageParams hi = p, lo = p;
    hi.intercept += eps;
    lo.intercept = std::max(1e-12, lo.intercept - eps);
    double dFdb = std::abs(first_passage_cdf(hi) - first_passage_cdf(lo)) / (2.0 * eps);
    const double beta = 0.5826;
    return 1.3 * beta * std::sqrt(p.horizon / static_cast<double>(steps)) * dFdb;
}

Estimate first_passage_mc_oracle(const FirstPassageParams& p, int64_t paths, int steps,
                                 uint64_t seed) {
    if (steps < 1000) throw std::invalid_argument("first_passage_mc_oracle: steps >= 1000");
    if (paths < 1) throw std::invalid_argument("first_passage_mc_oracle: paths >= 1");
    const double dt = p.horizon / steps;
    const double sdt = std::sqrt(dt);
    RunPlan plan;
    plan.replicas = std::min<int64_t>(paths, 256);
    plan.per_replica = (paths + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    auto trial = [&](Philox& rng) -> bool {
        double b = 0.0;
        for (int i = 1; i <= steps; ++i) {
            b += sdt * rng.next_normal();
            if (b <= p.slope * (i * dt) - p.intercept) return true;
        }
        return false;
    };
    return run_bernoulli(plan, "first_passage_mc", trial);
}

namespace {

// P[tau_h >= f] with slope h and intercept (phi0 - h)/sigma2, phi0 marginal
// N(0, g00), by Simpson quadrature over the region phi0 > h; below h the
// stopping time is 0.
double tau_tail(double h, double f, double sigma2, double g00) {
    double sd = std::sqrt(g00);
    if (f <= 0.0) return 1.0;
    // below h the stopping time is 0, so only x in (h, 12 sd] contributes
    double lo = std::max(h, -12.0 * sd);
    double hi = 12.0 * sd;
    if (lo >= hi) return 0.0;
    const int n = 4096;  // even
    double step = (hi - lo) / n;
    auto integrand = [&](double x) {
        double dens = std::exp(-0.5 * x * x / g00) / (sd * std::sqrt(2.0 * M_PI));
        double b = (x - h) / sigma2;
        if (b <= 0.0) return 0.0;
        FirstPassageParams p{h, b, f};
        return dens * (1.0 - first_passage_cdf(p));
    };
    double acc = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) acc += integrand(lo + i * step) * (i % 2 ? 4.0 : 2.0);
    return acc * step / 3.0;
}

}  // namespace

TauBoundsReport tau_h_percolation_bounds(int d, double h, int K_far, int N,
                                         int64_t reps, uint64_t seed, double sigma2) {
    if (K_far <= N) throw std::invalid_argument("tau_h_percolation_bounds: need K > N");
    LatticeDomain dom = build_box(d, K_far, Metric::LInf);
    const Coord origin{0, 0, 0};
    Vertex v0 = dom.vertex_at(origin);
    Coord far{K_far, 0, 0};
    Vertex xK = dom.vertex_at(far);
    TauBoundsReport rep;
    rep.h = h;
    if (v0 < 0 || xK < 0) {
        rep.defined = false;
        return rep;
    }

    rep.green_origin = green_entry(dom, v0, v0);
    rep.sigma2 = sigma2 > 0.0 ? sigma2 : rep.green_origin;

    double g0xK = green_entry(dom, v0, xK);
    double hm_origin = hitting_probability(dom, xK, {v0});
    auto ball = region_vertices(dom, RegionSpec::box(origin, N));
    double hm_ball = hitting_probability(dom, xK, ball);
    // minimal nontrivial exploration set, the documented finite-K stand-in
    // for the infimum over explored sets
    std::vector<Vertex> minimal{v0};
    Coord e1{1, 0, 0};
    if (Vertex w = dom.vertex_at(e1); w >= 0) minimal.push_back(w);
    double hm_min = hitting_probability(dom, xK, minimal);

    rep.f1 = (hm_ball - hm_origin) / g0xK;
    rep.f2 = (hm_min - hm_origin) / g0xK;
    rep.tail_f1 = tau_tail(h, rep.f1, rep.sigma2, rep.green_origin);
    rep.tail_f2 = tau_tail(h, rep.f2, rep.sigma2, rep.green_origin);

    CrossingQuery query{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, N),
                        std::nullopt, h};
    rep.crossing = estimate_crossing(dom, query, reps, seed);
    return rep;
}

}  // namespace cableperc
