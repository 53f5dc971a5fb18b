#include "cableperc/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "cableperc/exploration.hpp"
#include "cableperc/geometry.hpp"
#include "cableperc/gff.hpp"
#include "cableperc/iic.hpp"
#include "cableperc/mc.hpp"
#include "cableperc/percolation.hpp"
#include "cableperc/potential.hpp"
#include "cableperc/stats.hpp"
#include "cableperc/villain.hpp"

namespace cableperc {

namespace {

constexpr uint64_t kBaseSeed = 20240901;

struct Ctx {
    bool quick = false;
};

struct Record {
    std::ostringstream human;
    std::ostringstream exact;
    bool pass = true;

    void note(const char* label, double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        exact << label << "=" << buf << ";";
    }
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (human.tellp() > 0) human << "; ";
            human << "FAILED: " << what;
        }
    }
};

std::string summarize(Record& rec, const std::string& ok_text) {
    return rec.pass ? ok_text : rec.human.str();
}

// noise scale for Bernoulli estimates that stays honest at 0/1 counts: the
// larger of the Wald stderr and the Wilson half-width
double bernoulli_sigma(const Estimate& e) {
    return std::max(e.stderr_, (e.hi - e.lo) / 3.92);
}

// --- 1. green vs green_mc_oracle --------------------------------------------

CriterionResult crit_green_oracle(const Ctx& ctx) {
    CriterionResult out{1, "green-vs-walk-oracle"};
    const int pairs = ctx.quick ? 6 : 20;
    const int64_t walks = ctx.quick ? 40000 : 200000;
    auto dom = build_box(3, 2, Metric::LInf);  // 5^3 interior
    auto G = green(dom);
    Philox pick(kBaseSeed + 1, 0);
    Record rec;
    double worst_pull = 0.0;
    for (int p = 0; p < pairs; ++p) {
        Vertex u = static_cast<Vertex>(pick.next_double() * dom.interior_count);
        Vertex v = static_cast<Vertex>(pick.next_double() * dom.interior_count);
        auto est = green_mc_oracle(dom, u, v, walks, kBaseSeed + 100 + p);
        double se = est.stderr_ > 0 ? est.stderr_ : 1e-12;
        double pull = std::abs(est.value - G.G(u, v)) / se;
        worst_pull = std::max(worst_pull, pull);
        rec.note("est", est.value);
        rec.require(pull <= 3.0, "pair pull " + std::to_string(pull) + " > 3 sigma");
    }
    rec.note("worst_pull", worst_pull);
    out.pass = rec.pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d pairs, worst pull %.2f sigma", pairs, worst_pull);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 2. GFF covariance --------------------------------------------------------

CriterionResult crit_gff_covariance(const Ctx& ctx) {
    CriterionResult out{2, "gff-covariance"};
    const int64_t reps = ctx.quick ? 30000 : 100000;
    auto dom = build_box(2, 1, Metric::LInf);  // 3^2 interior
    auto G = green(dom);
    FieldSampler sampler = FieldSampler::dense(dom, G);
    const int n = dom.interior_count;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    Philox rng(kBaseSeed + 2, 0);
    for (int64_t r = 0; r < reps; ++r) {
        Eigen::VectorXd x = sampler.sample(rng);
        sum += x * x.transpose();
    }
    sum /= static_cast<double>(reps);
    Record rec;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double se =
                std::sqrt((G.G(i, i) * G.G(j, j) + G.G(i, j) * G.G(i, j)) / reps);
            double pull = std::abs(sum(i, j) - G.G(i, j)) / se;
            worst = std::max(worst, pull);
            rec.require(pull <= 5.0,
                        "covariance entry off by " + std::to_string(pull) + " se");
        }
    rec.note("worst_pull", worst);
    out.pass = rec.pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "entrywise worst pull %.2f se over %lld samples",
                  worst, static_cast<long long>(reps));
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 3. metric-graph Green formula ---------------------------------------------

CriterionResult crit_metric_green(const Ctx& ctx) {
    CriterionResult out{3, "metric-green-formula"};
    const int64_t reps = ctx.quick ? 50000 : 200000;
    auto dom = build_box(3, 1, Metric::LInf);
    auto G = green(dom);
    FieldSampler sampler = FieldSampler::dense(dom, G);
    const double sigma2 = 2.0 * dom.d;

    Philox pick(kBaseSeed + 3, 0);
    struct Pair {
        CablePoint a, b;
        double expect;
    };
    std::vector<Pair> pairs;
    for (int p = 0; p < 10; ++p) {
        size_t e1 = static_cast<size_t>(pick.next_double() * dom.edges.size());
        size_t e2 = pick.next_double() < 0.5
                        ? e1
                        : static_cast<size_t>(pick.next_double() * dom.edges.size());
        CablePoint a(dom.edges[e1][0], dom.edges[e1][1], pick.next_double());
        CablePoint b(dom.edges[e2][0], dom.edges[e2][1], pick.next_double());
        pairs.push_back({a, b, metric_green(dom, G, a, b)});
    }

    std::vector<double> sum(pairs.size(), 0.0), sum_sq(pairs.size(), 0.0);
    Philox rng(kBaseSeed + 3, 1);
    for (int64_t r = 0; r < reps; ++r) {
        Eigen::VectorXd x = sampler.sample(rng);
        for (size_t p = 0; p < pairs.size(); ++p) {
            const auto& pr = pairs[p];
            double b1, b2;
            if (pr.a.same_edge(pr.b)) {
                double r1 = std::min(pr.a.r, pr.b.r);
                double r2 = std::max(pr.a.r, pr.b.r);
                double v11 = sigma2 * r1 * (1 - r1);
                double c12 = sigma2 * r1 * (1 - r2);
                double v22 = sigma2 * r2 * (1 - r2);
                double w1 = v11 > 0 ? std::sqrt(v11) * rng.next_normal() : 0.0;
                double cmean = v11 > 0 ? c12 / v11 * w1 : 0.0;
                double cvar = v22 - (v11 > 0 ? c12 * c12 / v11 : 0.0);
                double w2 = cmean + std::sqrt(std::max(0.0, cvar)) * rng.next_normal();
                b1 = pr.a.r <= pr.b.r ? w1 : w2;
                b2 = pr.a.r <= pr.b.r ? w2 : w1;
            } else {
                b1 = std::sqrt(sigma2 * pr.a.r * (1 - pr.a.r)) * rng.next_normal();
                b2 = std::sqrt(sigma2 * pr.b.r * (1 - pr.b.r)) * rng.next_normal();
            }
            auto val = [&](const CablePoint& cp, double bridge) {
                double fu = dom.is_interior(cp.u) ? x(cp.u) : 0.0;
                double fv = dom.is_interior(cp.v) ? x(cp.v) : 0.0;
                return fu * (1 - cp.r) + fv * cp.r + bridge;
            };
            double prod = val(pr.a, b1) * val(pr.b, b2);
            sum[p] += prod;
            sum_sq[p] += prod * prod;
        }
    }
    Record rec;
    double worst = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
        double mean = sum[p] / reps;
        double var = sum_sq[p] / reps - mean * mean;
        double se = std::sqrt(std::max(var, 1e-12) / reps);
        double pull = std::abs(mean - pairs[p].expect) / se;
        worst = std::max(worst, pull);
        rec.note("cov", mean);
        rec.require(pull <= 5.0, "cable pair pull " + std::to_string(pull));
    }
    rec.note("worst", worst);
    out.pass = rec.pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "10 cable pairs, worst pull %.2f sigma", worst);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 4. bridge law gate ---------------------------------------------------------

CriterionResult crit_bridge_gate(const Ctx& ctx) {
    CriterionResult out{4, "bridge-law-gate"};
    const int steps = ctx.quick ? 512 : 2048;
    const int64_t reps = ctx.quick ? 30000 : 200000;
    Record rec;
    int cell = 0;
    for (int d : {2, 3})
        for (double A : {0.25, 1.0, 3.0})
            for (double B : {0.25, 1.0, 3.0}) {
                double exact = bridge_open_probability(A, B, 0.0, d);
                auto est =
                    bridge_oracle(A, B, 0.0, d, steps, reps, kBaseSeed + 400 + cell);
                double band = bridge_oracle_bias_band(A, B, 0.0, d, steps);
                double diff = est.value - exact;
                double sigma = bernoulli_sigma(est);
                rec.note("diff", diff);
                rec.require(diff >= -3.0 * sigma,
                            "oracle below closed form beyond 3 sigma");
                rec.require(diff <= 3.0 * sigma + band,
                            "oracle above closed form beyond 3 sigma + band");
                ++cell;
            }
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "18 cells (d in {2,3}, offsets {0.25,1,3}^2), steps=%d, reps=%lld",
                  steps, static_cast<long long>(reps));
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 5. harmonic-measure decomposition ------------------------------------------

CriterionResult crit_harmonic_decomposition(const Ctx& ctx) {
    CriterionResult out{5, "harmonic-decomposition"};
    const int pairs = ctx.quick ? 4 : 10;
    Record rec;
    std::vector<LatticeDomain> doms;
    doms.push_back(build_box(2, 2, Metric::LInf));  // 5x5
    {
        std::vector<Coord> block;  // 4^3 block
        for (int x = 0; x < 4; ++x)
            for (int y = 0; y < 4; ++y)
                for (int z = 0; z < 4; ++z) block.push_back({x, y, z});
        doms.push_back(build_explicit_domain(3, block));
    }
    double worst = 0.0;
    for (const auto& dom : doms) {
        auto base = green(dom);
        Philox pick(kBaseSeed + 5 + dom.d, 0);
        for (int p = 0; p < pairs; ++p) {
            std::vector<Vertex> It, Is;
            for (Vertex v = 0; v < dom.interior_count; ++v)
                if (pick.next_double() < 0.22) It.push_back(v);
            if (It.empty()) It.push_back(0);
            for (Vertex v : It)
                if (pick.next_double() < 0.5) Is.push_back(v);
            double res = harmonic_decomposition_residual(dom, base, Is, It);
            worst = std::max(worst, res);
            rec.note("residual", res);
            rec.require(res < 1e-10, "residual " + std::to_string(res));
        }
    }
    rec.note("worst", worst);
    out.pass = rec.pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst residual %.2e over 5x5 and 4^3 domains",
                  worst);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 6. quadratic variation -------------------------------------------------------

CriterionResult crit_quadratic_variation(const Ctx&) {
    CriterionResult out{6, "quadratic-variation"};
    auto dom = build_box(2, 2, Metric::LInf);
    std::vector<Vertex> A{dom.vertex_at({2, 2, 0}), dom.vertex_at({2, -2, 0})};
    std::vector<std::vector<Vertex>> stages;
    std::vector<Vertex> acc;
    stages.push_back(acc);
    for (int x = -2; x <= 0; ++x)
        for (int y = -2; y <= 2; ++y) {
            acc.push_back(dom.vertex_at({x, y, 0}));
            if (acc.size() % 2 == 0 && stages.size() < 10) stages.push_back(acc);
        }
    while (stages.size() < 10) stages.push_back(acc);
    Record rec;
    ExplorationSequence seq(dom, stages, A);
    std::vector<double> qv;
    try {
        qv = quadratic_variation(dom, seq, 1e-10);
    } catch (const std::exception& e) {
        rec.require(false, e.what());
        out.pass = false;
        out.detail = rec.human.str();
        return out;
    }
    double var0 = conditional_variance(dom, A, stages.front());
    double worst = 0.0;
    for (size_t t = 0; t < stages.size(); ++t) {
        double direct = var0 - conditional_variance(dom, A, stages[t]);
        worst = std::max(worst, std::abs(qv[t] - direct));
        rec.note("qv", qv[t]);
        rec.require(std::abs(qv[t] - direct) < 1e-10, "two-solve mismatch");
        if (t > 0) rec.require(qv[t] >= qv[t - 1] - 1e-12, "not nondecreasing");
    }
    out.pass = rec.pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "10-step exploration, max two-solve deviation %.2e",
                  worst);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 7. first passage ----------------------------------------------------------------

CriterionResult crit_first_passage(const Ctx& ctx) {
    CriterionResult out{7, "first-passage-law"};
    const int64_t paths = ctx.quick ? 20000 : 100000;
    const int steps = ctx.quick ? 2000 : 5000;
    Record rec;
    for (double b : {0.5, 1.0, 2.0}) {
        double cdf = first_passage_cdf({0.0, b, 1.0});
        double reflect = 2.0 * normal_sf(b);
        rec.note("m0", cdf);
        rec.require(std::abs(cdf - reflect) < 1e-12, "m=0 reflection mismatch");
    }
    int cell = 0;
    for (double m : {-0.5, 0.0, 0.5})
        for (double b : {0.5, 1.0, 2.0}) {
            FirstPassageParams p{m, b, 1.0};
            double exact = first_passage_cdf(p);
            auto est = first_passage_mc_oracle(p, paths, steps, kBaseSeed + 700 + cell);
            double band = first_passage_bias_band(p, steps);
            double diff = exact - est.value;  // oracle under-counts
            double sigma = bernoulli_sigma(est);
            rec.note("diff", diff);
            rec.require(diff >= -3.0 * sigma, "oracle above exact beyond 3 sigma");
            rec.require(diff <= 3.0 * sigma + band,
                        "oracle below exact beyond 3 sigma + band");
            ++cell;
        }
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "3x3 (m,b) grid at T=1, paths=%lld steps=%d; m=0 matches 2*sf(b)",
                  static_cast<long long>(paths), steps);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 8. crossing scaling ----------------------------------------------------------------

CriterionResult crit_crossing_scaling(const Ctx& ctx) {
    CriterionResult out{8, "crossing-scaling"};
    std::vector<int> Ns =
        ctx.quick ? std::vector<int>{4, 6, 8} : std::vector<int>{4, 6, 8, 12, 16};
    const int64_t reps = ctx.quick ? 6000 : 20000;
    Record rec;
    std::vector<double> logN, logP, scaled;
    for (size_t i = 0; i < Ns.size(); ++i) {
        auto dom = build_box(3, Ns[i], Metric::LInf);
        const Coord origin{0, 0, 0};
        CrossingQuery q{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, Ns[i]),
                        std::nullopt, 0.0};
        auto est = estimate_crossing(dom, q, reps, kBaseSeed + 800 + i);
        rec.note("p", est.value);
        rec.require(est.value > 0.0, "vanishing crossing estimate");
        if (est.value > 0.0) {
            logN.push_back(std::log(static_cast<double>(Ns[i])));
            logP.push_back(std::log(est.value));
            scaled.push_back(est.value * std::sqrt(static_cast<double>(Ns[i])));
        }
    }
    double slope = 0.0;
    if (logN.size() >= 2) {
        double mx = 0, my = 0;
        for (size_t i = 0; i < logN.size(); ++i) {
            mx += logN[i];
            my += logP[i];
        }
        mx /= logN.size();
        my /= logP.size();
        double sxx = 0, sxy = 0;
        for (size_t i = 0; i < logN.size(); ++i) {
            sxx += (logN[i] - mx) * (logN[i] - mx);
            sxy += (logN[i] - mx) * (logP[i] - my);
        }
        slope = sxy / sxx;
    }
    rec.note("slope", slope);
    rec.require(slope >= -0.65 && slope <= -0.35,
                "log-log slope " + std::to_string(slope) + " outside [-0.65,-0.35]");
    double smin = scaled.empty() ? 0 : scaled[0], smax = smin;
    for (double s : scaled) {
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }
    rec.note("scaled_ratio", smin > 0 ? smax / smin : 0.0);
    rec.require(smax <= 3.0 * smin, "p*sqrt(N) spread beyond factor 3");
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "slope %.3f in [-0.65,-0.35], p*sqrt(N) spread %.2f",
                  slope, smin > 0 ? smax / smin : 0.0);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 9. monotone coupling ----------------------------------------------------------------

CriterionResult crit_monotone_coupling(const Ctx&) {
    CriterionResult out{9, "monotone-coupling"};
    auto dom = build_box(3, 4, Metric::LInf);
    FieldSampler sampler = FieldSampler::spectral(dom);
    HeightSchedule schedule({0.4, 0.2, 0.0});
    Philox rng(kBaseSeed + 9, 0);
    int64_t violations = 0;
    for (int s = 0; s < 100; ++s) {
        auto values = sampler.sample(rng);
        auto samples = extend_level_set_coupled(dom, values, schedule, rng);
        for (size_t i = 1; i < samples.size(); ++i)
            for (size_t e = 0; e < dom.edges.size(); ++e)
                if (samples[i - 1].edge_open[e] && !samples[i].edge_open[e]) ++violations;
    }
    Record rec;
    rec.note("violations", static_cast<double>(violations));
    rec.require(violations == 0, std::to_string(violations) + " nesting violations");
    out.pass = rec.pass;
    out.detail = summarize(rec, "100 coupled samples, zero nesting violations");
    out.payload = rec.exact.str();
    return out;
}

// --- 10. FKG checks ------------------------------------------------------------------------

CriterionResult crit_fkg(const Ctx& ctx) {
    CriterionResult out{10, "fkg-positive-association"};
    Record rec;
    {
        const int64_t reps = ctx.quick ? 20000 : 50000;
        auto dom = build_box(2, 3, Metric::LInf);
        FieldSampler sampler = FieldSampler::spectral(dom);
        const Coord origin{0, 0, 0};
        CrossingQuery qa{RegionSpec::box(origin, 0), RegionSpec::boundary(origin, 3),
                         std::nullopt, 0.15};
        CrossingQuery qb{RegionSpec::box({1, 1, 0}, 0), RegionSpec::boundary(origin, 3),
                         std::nullopt, 0.15};
        ResolvedCrossing ra = resolve_crossing(dom, qa);
        ResolvedCrossing rb = resolve_crossing(dom, qb);
        int64_t na = 0, nb = 0, nab = 0;
        Philox rng(kBaseSeed + 10, 0);
        for (int64_t r = 0; r < reps; ++r) {
            auto values = sampler.sample(rng);
            auto s = extend_level_set(dom, values, 0.15, rng);
            bool a = crossing_occurs(s, ra);
            bool b = crossing_occurs(s, rb);
            na += a;
            nb += b;
            nab += a && b;
        }
        double pa = double(na) / reps, pb = double(nb) / reps, pab = double(nab) / reps;
        double margin = pab - pa * pb;
        double vaa = pa * (1 - pa), vbb = pb * (1 - pb), vab = pab * (1 - pab);
        double cab = pab - pa * pb;
        double ca_ab = pab * (1 - pa), cb_ab = pab * (1 - pb);
        double g[3] = {-pb, -pa, 1.0};
        double var = g[0] * g[0] * vaa + g[1] * g[1] * vbb + g[2] * g[2] * vab +
                     2 * g[0] * g[1] * cab + 2 * g[0] * g[2] * ca_ab +
                     2 * g[1] * g[2] * cb_ab;
        double sigma = std::sqrt(std::max(0.0, var) / reps);
        rec.note("gff_margin", margin);
        rec.require(margin >= -3.0 * sigma, "GFF events negatively associated");
    }
    {
        auto dom = build_box(2, 2, Metric::LInf);
        Eigen::VectorXd edge_t =
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dom.edges.size()), 1.0);
        ChainPlan plan;
        plan.replicas = 48;
        plan.equil = 40;
        plan.batch = ctx.quick ? 400 : 1100;
        plan.stride = 1;
        plan.seed = kBaseSeed + 1010;
        Vertex u = dom.vertex_at({1, 1, 0});
        Vertex v = dom.vertex_at({-1, -1, 0});
        ChainStats stats = run_villain_observables(
            dom, edge_t, plan, 3, [&](const VillainState& st, Philox&, double* o) {
                bool a = std::cos(st.theta(u)) >= 0.3;
                bool b = std::cos(st.theta(v)) >= 0.3;
                o[0] = a;
                o[1] = b;
                o[2] = a && b;
            });
        Eigen::VectorXd m = stats.mean();
        Eigen::MatrixXd cov = stats.covariance_of_mean();
        double margin = m(2) - m(0) * m(1);
        double g[3] = {-m(1), -m(0), 1.0};
        double var = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) var += g[i] * g[j] * cov(i, j);
        double sigma = std::sqrt(std::max(0.0, var));
        rec.note("villain_margin", margin);
        rec.require(margin >= -3.0 * sigma, "Villain events negatively associated");
    }
    out.pass = rec.pass;
    out.detail =
        summarize(rec, "GFF and Villain positive-association margins >= -3 sigma");
    out.payload = rec.exact.str();
    return out;
}

// --- 11. IIC convergence diagnostic ----------------------------------------------------------

CriterionResult crit_iic_diagnostic(const Ctx& ctx) {
    CriterionResult out{11, "iic-two-limit-diagnostic"};
    const int n_big = ctx.quick ? 4 : 8;
    const int64_t reps_radius = ctx.quick ? 4000 : 30000;
    const int64_t reps_height = ctx.quick ? 4000 : 20000;
    std::vector<int> radii =
        ctx.quick ? std::vector<int>{2, 3, 4} : std::vector<int>{3, 5, 8};
    auto event = CylinderEvent::degree_at_least({0, 0, 0}, 2);

    auto radius_table =
        iic_convergence_scan(3, radii, event, 0.0, reps_radius, kBaseSeed + 11);
    HeightSchedule schedule({0.4, 0.2, 0.1, 0.05, 0.0});
    auto height_table =
        iic_height_scan(3, n_big, event, schedule, n_big, reps_height, kBaseSeed + 1100);

    Record rec;
    const auto& ra = radius_table.terminal().ce;
    const auto& hb = height_table.terminal().ce;
    rec.require(ra.defined && hb.defined, "undefined terminal estimate");
    double diff = 0.0, sigma = 0.0;
    if (ra.defined && hb.defined) {
        diff = std::abs(ra.estimate.value - hb.estimate.value);
        sigma = std::sqrt(ra.estimate.stderr_ * ra.estimate.stderr_ +
                          hb.estimate.stderr_ * hb.estimate.stderr_);
        rec.note("radius_terminal", ra.estimate.value);
        rec.note("height_terminal", hb.estimate.value);
        rec.require(diff <= 3.0 * sigma, "terminal gap " + std::to_string(diff) +
                                             " beyond 3 sigma " + std::to_string(sigma));
    }
    for (const auto& row : radius_table.rows)
        rec.note("radius_p", row.ce.defined ? row.ce.estimate.value : -1.0);
    for (const auto& row : height_table.rows)
        rec.note("height_p", row.ce.defined ? row.ce.estimate.value : -1.0);
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "|radius-scan - height-scan| = %.4f vs 3 sigma = %.4f at n=%d", diff,
                  3.0 * sigma, n_big);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 12. quasi-multiplicativity harness ------------------------------------------------------

CriterionResult crit_qm(const Ctx& ctx) {
    CriterionResult out{12, "quasi-multiplicativity"};
    const int64_t reps = ctx.quick ? 6000 : 30000;
    auto dom = build_slab(2, 16);
    const Coord origin{0, 0, 0};
    struct Preset {
        int m, r, ry;
    };
    std::vector<Preset> presets{{1, 3, 7}, {2, 5, 9}, {2, 4, 11}};
    std::vector<double> heights{0.0, 0.05, 0.1, 0.2};
    Record rec;
    double min_lo = 1e300, min_ratio = 1e300;
    int cell = 0;
    for (const auto& ps : presets)
        for (double h : heights) {
            auto X = RegionSpec::boundary(origin, ps.m);
            auto Y = RegionSpec::boundary(origin, ps.ry);
            auto res = qm_ratio(dom, X, Y, std::nullopt, origin, ps.r, h, reps,
                                kBaseSeed + 1200 + cell);
            rec.note("ratio", res.ratio);
            rec.note("lo", res.lo);
            rec.require(res.defined, "qm cell undefined");
            rec.require(res.inclusion_violations == 0, "pathwise inclusion violated");
            if (res.defined) {
                min_lo = std::min(min_lo, res.lo);
                min_ratio = std::min(min_ratio, res.ratio);
            }
            ++cell;
        }
    rec.require(min_lo > 0.0, "some 95% interval touches 0");
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "min ratio %.3f, min CI lower bound %.3f over 12 cells",
                  min_ratio, min_lo);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 13. Villain kernel suite ----------------------------------------------------------------

CriterionResult crit_villain_kernels(const Ctx&) {
    CriterionResult out{13, "villain-kernel-suite"};
    Record rec;
    auto simpson = [](const std::function<double(double)>& f, double a, double b, int n) {
        double step = (b - a) / n;
        double acc = f(a) + f(b);
        for (int i = 1; i < n; ++i) acc += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
        return acc * step / 3.0;
    };
    for (double t : {0.3, 1.0, 2.5}) {
        double mass =
            simpson([&](double u) { return circle_kernel(t, 0.7, u); }, 0.0, kTwoPi, 8192);
        rec.note("mass", mass);
        rec.require(std::abs(mass - 1.0) < 1e-10, "normalization off");
    }
    Philox rng(kBaseSeed + 13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        double t = 0.2 + 3.0 * rng.next_double();
        double a = kTwoPi * rng.next_double();
        double b = kTwoPi * rng.next_double();
        rec.require(circle_kernel(t, a, b) == circle_kernel(t, b, a),
                    "symmetry not exact");
        double gap =
            std::abs(circle_kernel_image(t, a - b) - circle_kernel_dual(t, a - b));
        rec.note("series_gap", gap);
        rec.require(gap < 1e-12, "image vs dual series disagree");
    }
    for (double s : {0.3, 1.0})
        for (double t : {0.3, 1.0}) {
            double direct = circle_kernel(s + t, 0.9, 2.2);
            double conv = simpson(
                [&](double u) { return circle_kernel(s, 0.9, u) * circle_kernel(t, u, 2.2); },
                0.0, kTwoPi, 8192);
            rec.note("ck_residual", std::abs(direct - conv));
            rec.require(std::abs(direct - conv) < 1e-8, "Chapman-Kolmogorov residual");
        }
    out.pass = rec.pass;
    out.detail = summarize(
        rec, "normalization 1e-10, exact symmetry, CK < 1e-8, series gap < 1e-12");
    out.payload = rec.exact.str();
    return out;
}

// --- 14. Lemma 3.1 gate ------------------------------------------------------------------------

CriterionResult crit_avoid_gate(const Ctx& ctx) {
    CriterionResult out{14, "edge-avoid-gate"};
    const int steps = ctx.quick ? 256 : 1024;
    const int64_t reps = ctx.quick ? 4000 : 15000;
    auto S = AvoidSet::pm_i();
    std::vector<double> ts{0.15, 0.3, 0.6, 1.0, 2.0, 4.0};
    std::vector<double> thetas{0.0, 0.7, 1.4, M_PI / 2.0, 2.5, 3.8};
    Record rec;
    int cell = 0;
    int zero_cells = 0;
    for (double t : ts)
        for (double tx : thetas)
            for (double ty : thetas) {
                double exact = edge_avoid_probability(t, tx, ty, S);
                if (std::cos(tx) * std::cos(ty) <= 0.0) {
                    rec.require(exact == 0.0, "Lemma 3.1 zero case not exact");
                    ++zero_cells;
                }
                auto est = villain_avoid_oracle(t, tx, ty, S, steps, reps,
                                                kBaseSeed + 1400 + cell);
                double band = villain_avoid_bias_band(t, tx, ty, S, steps);
                double diff = est.value - exact;
                double sigma = bernoulli_sigma(est);
                rec.note("diff", diff);
                rec.require(diff >= -3.0 * sigma, "oracle below beyond 3 sigma");
                rec.require(diff <= 3.0 * sigma + band,
                            "oracle above beyond 3 sigma + band");
                ++cell;
            }
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d cells incl. %d exact-zero cases, steps=%d", cell,
                  zero_cells, steps);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 15. Gibbs correctness ----------------------------------------------------------------------

CriterionResult crit_gibbs(const Ctx& ctx) {
    CriterionResult out{15, "gibbs-correctness"};
    Record rec;
    auto simpson = [](const std::function<double(double)>& f, double a, double b, int n) {
        double step = (b - a) / n;
        double acc = f(a) + f(b);
        for (int i = 1; i < n; ++i) acc += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
        return acc * step / 3.0;
    };
    {
        const int updates = ctx.quick ? 30000 : 100000;
        const int hist_bins = 64;
        auto dom = build_explicit_domain(2, {{0, 0, 0}});
        VillainState state(dom, 1.0);
        Philox rng(kBaseSeed + 15, 0);
        std::vector<int64_t> hist(hist_bins, 0);
        for (int i = 0; i < updates; ++i) {
            state = gibbs_sample(state, 1, rng);
            int b = std::min(hist_bins - 1,
                             static_cast<int>(state.theta(0) / kTwoPi * hist_bins));
            ++hist[static_cast<size_t>(b)];
        }
        auto density = [&](double th) { return std::pow(circle_kernel(1.0, th, 0.0), 4); };
        double norm = simpson(density, 0.0, kTwoPi, 8192);
        double chi2 = 0.0;
        for (int b = 0; b < hist_bins; ++b) {
            double lo = b * kTwoPi / hist_bins, hi = (b + 1) * kTwoPi / hist_bins;
            double p = simpson(density, lo, hi, 64) / norm;
            double expect = p * updates;
            double d = hist[static_cast<size_t>(b)] - expect;
            chi2 += d * d / expect;
        }
        double pval = chi2_sf(chi2, hist_bins - 1);
        rec.note("single_site_p", pval);
        rec.require(pval > 0.01, "single-site chi-square p = " + std::to_string(pval));
    }
    {
        auto dom = build_explicit_domain(2, {{0, 0, 0}, {1, 0, 0}});
        Eigen::VectorXd edge_t =
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dom.edges.size()), 1.0);
        ChainPlan plan;
        plan.replicas = 8;
        plan.equil = 24;
        plan.batch = ctx.quick ? 1500 : 5000;
        plan.stride = 4;
        plan.seed = kBaseSeed + 1500;
        const int hb = 12;
        ChainStats stats = run_villain_observables(
            dom, edge_t, plan, hb * hb, [&](const VillainState& st, Philox&, double* o) {
                int i = std::min(hb - 1, static_cast<int>(st.theta(0) / kTwoPi * hb));
                int j = std::min(hb - 1, static_cast<int>(st.theta(1) / kTwoPi * hb));
                o[i * hb + j] = 1.0;
            });
        Eigen::VectorXd freq = stats.mean();
        int64_t total = plan.replicas * plan.batch;
        auto dens = [&](double t1, double t2) {
            return circle_kernel(1.0, t1, t2) * std::pow(circle_kernel(1.0, t1, 0.0), 3) *
                   std::pow(circle_kernel(1.0, t2, 0.0), 3);
        };
        const int sub = 16;
        std::vector<double> cellp(static_cast<size_t>(hb * hb), 0.0);
        double norm = 0.0;
        for (int i = 0; i < hb; ++i)
            for (int j = 0; j < hb; ++j) {
                double acc = 0.0;
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b) {
                        double t1 = (i + (a + 0.5) / sub) * kTwoPi / hb;
                        double t2 = (j + (b + 0.5) / sub) * kTwoPi / hb;
                        acc += dens(t1, t2);
                    }
                cellp[static_cast<size_t>(i * hb + j)] = acc;
                norm += acc;
            }
        double chi2 = 0.0;
        int used = 0;
        for (int c = 0; c < hb * hb; ++c) {
            double expect = cellp[static_cast<size_t>(c)] / norm * total;
            if (expect < 5.0) continue;
            double observed = freq(c) * total;
            chi2 += (observed - expect) * (observed - expect) / expect;
            ++used;
        }
        double pval = used > 1 ? chi2_sf(chi2, used - 1) : 0.0;
        rec.note("two_site_p", pval);
        rec.require(pval > 0.01, "two-site chi-square p = " + std::to_string(pval));
    }
    out.pass = rec.pass;
    out.detail = summarize(rec, "single-site and two-site chi-square p > 0.01");
    out.payload = rec.exact.str();
    return out;
}

// --- 16. correlation-ratio window ----------------------------------------------------------------

CriterionResult crit_ratio_window(const Ctx& ctx) {
    CriterionResult out{16, "villain-ratio-window"};
    auto dom = build_box(2, 4, Metric::LInf);  // 9x9 interior
    ChainPlan plan;
    plan.replicas = 64;
    plan.equil = 0;  // auto from the autocorrelation pilot
    plan.batch = ctx.quick ? 12 : 40;
    plan.stride = 2;
    plan.seed = kBaseSeed + 16;
    auto res = correlation_ratio(dom, 1.0, plan, RatioMode::Cos);
    Record rec;
    rec.note("ratio", res.ratio);
    rec.note("lo", res.lo);
    rec.note("hi", res.hi);
    rec.require(res.defined, "denominator interval touches 0");
    rec.require(res.ratio > 0.0 && res.ratio <= 1.0, "ratio outside (0,1]");
    rec.require(res.lo > 0.0, "lower CI does not exclude 0");
    rec.require(res.hi <= 1.0 + 3.0 * res.stderr_, "upper CI above 1 + 3 sigma");
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "ratio %.4f, CI [%.4f, %.4f], equil %d sweeps",
                  res.ratio, res.lo, res.hi, res.equil_sweeps);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

// --- 17. Villain IIC diagnostic ------------------------------------------------------------------

CriterionResult crit_villain_iic(const Ctx& ctx) {
    CriterionResult out{17, "villain-iic-diagnostic"};
    auto event = CylinderEvent::edge_open({0, 0, 0}, {1, 0, 0});
    ChainPlan plan;
    plan.replicas = 64;
    plan.equil = 0;
    plan.batch = ctx.quick ? 10 : 30;
    plan.stride = 2;
    plan.seed = kBaseSeed + 17;
    int n = ctx.quick ? 4 : 8;
    auto rows = villain_iic_scan({n}, event, {1.55}, 1.0, plan);
    Record rec;
    const auto& row = rows[0];
    rec.require(row.column_a.ce.defined && row.column_b[0].ce.defined,
                "undefined conditional estimate");
    rec.note("A", row.column_a.ce.estimate.value);
    rec.note("B", row.column_b[0].ce.estimate.value);
    rec.note("diff", row.diff_terminal);
    rec.require(row.diff_terminal <= 3.0 * row.diff_sigma,
                "|A - B| = " + std::to_string(row.diff_terminal) + " beyond 3 sigma = " +
                    std::to_string(3.0 * row.diff_sigma));
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "n=%d: |A - B(1.55)| = %.4f vs 3 sigma = %.4f", n,
                  row.diff_terminal, 3.0 * row.diff_sigma);
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

using CritFn = CriterionResult (*)(const Ctx&);

struct Entry {
    int index;
    CritFn fn;
};

const Entry kCriteria[] = {
    {1, crit_green_oracle},           {2, crit_gff_covariance},
    {3, crit_metric_green},           {4, crit_bridge_gate},
    {5, crit_harmonic_decomposition}, {6, crit_quadratic_variation},
    {7, crit_first_passage},          {8, crit_crossing_scaling},
    {9, crit_monotone_coupling},      {10, crit_fkg},
    {11, crit_iic_diagnostic},        {12, crit_qm},
    {13, crit_villain_kernels},       {14, crit_avoid_gate},
    {15, crit_gibbs},                 {16, crit_ratio_window},
    {17, crit_villain_iic},
};

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t quick_bundle_hash(int workers) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d", workers);
    setenv("CABLEPERC_WORKERS", buf, 1);
    Ctx ctx{true};
    std::string payload;
    for (const auto& entry : kCriteria) {
        CriterionResult r = entry.fn(ctx);
        payload += r.name + "|" + (r.pass ? "1" : "0") + "|" + r.payload + "\n";
    }
    unsetenv("CABLEPERC_WORKERS");
    return fnv1a(payload);
}

// --- 18. determinism across worker counts ---------------------------------------------------------

CriterionResult crit_determinism(const Ctx&) {
    CriterionResult out{18, "worker-determinism"};
    uint64_t h1 = quick_bundle_hash(1);
    uint64_t h2 = quick_bundle_hash(2);
    uint64_t h8 = quick_bundle_hash(8);
    Record rec;
    rec.note("h1_low", static_cast<double>(h1 & 0xfffffffull));
    rec.require(h1 == h2 && h2 == h8, "quick-suite outputs differ across worker counts");
    out.pass = rec.pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "quick-suite hash %016llx identical for 1/2/8 workers",
                  static_cast<unsigned long long>(h1));
    out.detail = summarize(rec, buf);
    out.payload = rec.exact.str();
    return out;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(bool quick, int only) {
    Ctx ctx{quick};
    std::vector<CriterionResult> results;
    auto run_one = [&](CritFn fn) {
        auto start = std::chrono::steady_clock::now();
        CriterionResult r = fn(ctx);
        r.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(std::move(r));
    };
    for (const auto& entry : kCriteria) {
        if (only > 0 && entry.index != only) continue;
        run_one(entry.fn);
    }
    if (only <= 0 || only == 18) run_one(crit_determinism);
    return results;
}

int report_acceptance(const std::vector<CriterionResult>& results) {
    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] %02d %-28s (%6.1fs) %s\n", r.pass ? "PASS" : "FAIL", r.index,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::fflush(stdout);
    return failures;
}

}  // namespace cableperc
