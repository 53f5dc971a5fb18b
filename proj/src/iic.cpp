#include "cableperc/iic.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cableperc {

namespace {

std::string coord_str(const Coord& c) {
    std::ostringstream os;
    os << "(" << c[0] << "," << c[1] << "," << c[2] << ")";
    return os.str();
}

int32_t edge_between(const LatticeDomain& dom, Vertex u, Vertex v) {
    if (u < 0 || v < 0) return -1;
    for (int32_t s = dom.adj_offset[u]; s < dom.adj_offset[u + 1]; ++s)
        if (dom.adj[s] == v) return dom.edge_index[s];
    return -1;
}

bool cluster_reaches(const FieldSample& sample, Vertex start,
                     const std::vector<char>& is_target) {
    if (start < 0 || !sample.vertex_open(start)) return false;
    return open_cluster_reaches(*sample.dom, sample.edge_open, start, is_target);
}

std::vector<char> sphere_mask(const LatticeDomain& dom, const Coord& center, int radius) {
    std::vector<char> mask(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v : region_vertices(dom, RegionSpec::boundary(center, radius)))
        mask[static_cast<size_t>(v)] = 1;
    return mask;
}

}  // namespace

std::string CylinderEvent::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::VertexOpen:
            os << "vertex-open" << coord_str(a);
            break;
        case Kind::EdgeOpen:
            os << "edge-open" << coord_str(a) << "-" << coord_str(b);
            break;
        case Kind::DegreeAtLeast:
            os << "degree-at-least(" << coord_str(a) << "," << k << ")";
            break;
        case Kind::LocalPattern:
            os << "local-pattern[" << pattern.size() << "]";
            break;
        case Kind::ReachRadius:
            os << "reach(" << coord_str(a) << "," << k << ")";
            break;
    }
    return os.str();
}

std::string Conditioning::describe() const {
    std::ostringstream os;
    os << "cluster" << coord_str(center) << "-reaches-" << radius;
    return os.str();
}

bool eval_cylinder_event(const FieldSample& sample, const CylinderEvent& event) {
    const LatticeDomain& dom = *sample.dom;
    switch (event.kind) {
        case CylinderEvent::Kind::VertexOpen: {
            Vertex v = dom.vertex_at(event.a);
            return v >= 0 && sample.vertex_open(v);
        }
        case CylinderEvent::Kind::EdgeOpen: {
            int32_t e = edge_between(dom, dom.vertex_at(event.a), dom.vertex_at(event.b));
            return e >= 0 && sample.edge_open[static_cast<size_t>(e)];
        }
        case CylinderEvent::Kind::DegreeAtLeast: {
            Vertex v = dom.vertex_at(event.a);
            if (v < 0 || !sample.vertex_open(v)) return false;
            int open_edges = 0;
            for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s)
                if (sample.edge_open[static_cast<size_t>(dom.edge_index[s])]) ++open_edges;
            return open_edges >= event.k;
        }
        case CylinderEvent::Kind::LocalPattern: {
            for (const auto& [c, want_open] : event.pattern) {
                Vertex v = dom.vertex_at(c);
                if (v < 0) return false;
                if (sample.vertex_open(v) != want_open) return false;
            }
            return true;
        }
        case CylinderEvent::Kind::ReachRadius: {
            auto mask = sphere_mask(dom, event.a, event.k);
            return cluster_reaches(sample, dom.vertex_at(event.a), mask);
        }
    }
    return false;
}

bool eval_cylinder_event_edges(const LatticeDomain& dom,
                               const std::vector<uint8_t>& edge_open,
                               const CylinderEvent& event) {
    auto has_open_edge = [&](Vertex v) {
        if (v < 0) return false;
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s)
            if (edge_open[static_cast<size_t>(dom.edge_index[s])]) return true;
        return false;
    };
    switch (event.kind) {
        case CylinderEvent::Kind::VertexOpen:
            return has_open_edge(dom.vertex_at(event.a));
        case CylinderEvent::Kind::EdgeOpen: {
            int32_t e = edge_between(dom, dom.vertex_at(event.a), dom.vertex_at(event.b));
            return e >= 0 && edge_open[static_cast<size_t>(e)];
        }
        case CylinderEvent::Kind::DegreeAtLeast: {
            Vertex v = dom.vertex_at(event.a);
            if (v < 0) return false;
            int open_edges = 0;
            for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s)
                if (edge_open[static_cast<size_t>(dom.edge_index[s])]) ++open_edges;
            return open_edges >= event.k;
        }
        case CylinderEvent::Kind::LocalPattern: {
            for (const auto& [c, want_open] : event.pattern)
                if (has_open_edge(dom.vertex_at(c)) != want_open) return false;
            return true;
        }
        case CylinderEvent::Kind::ReachRadius: {
            auto mask = sphere_mask(dom, event.a, event.k);
            return open_cluster_reaches(dom, edge_open, dom.vertex_at(event.a), mask);
        }
    }
    return false;
}

ConditionalEstimate estimate_conditional(const FieldSampler& sampler,
                                         const CylinderEvent& event,
                                         const Conditioning& conditioning, double h,
                                         int64_t reps, uint64_t seed) {
    if (reps < 1) throw std::invalid_argument("estimate_conditional: reps must be >= 1");
    const LatticeDomain& dom = sampler.domain();
    auto cond_mask = sphere_mask(dom, conditioning.center, conditioning.radius);
    Vertex cond_start = dom.vertex_at(conditioning.center);
    if (cond_start < 0)
        throw std::invalid_argument("estimate_conditional: conditioning center outside domain");

    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 512);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    struct Counts {
        int64_t accepted = 0, joint = 0;
    };
    auto per_replica = [&](int64_t, Philox& rng) -> Counts {
        Counts c;
        for (int64_t i = 0; i < plan.per_replica; ++i) {
            Eigen::VectorXd values = sampler.sample(rng);
            FieldSample s = extend_level_set(dom, values, h, rng);
            if (!cluster_reaches(s, cond_start, cond_mask)) continue;
            ++c.accepted;
            if (eval_cylinder_event(s, event)) ++c.joint;
        }
        return c;
    };
    Counts total = run_replicas<Counts>(plan, per_replica, Counts{},
                                        [](Counts a, Counts b) {
                                            a.accepted += b.accepted;
                                            a.joint += b.joint;
                                            return a;
                                        });
    ConditionalEstimate out;
    out.event = event.describe();
    out.conditioning = conditioning.describe();
    out.h = h;
    out.accepted = total.accepted;
    out.acceptance_rate = static_cast<double>(total.accepted) / plan.total();
    out.defined = total.accepted > 0;
    if (out.defined)
        out.estimate = bernoulli_estimate("conditional", total.joint, total.accepted, seed);
    return out;
}

namespace {

void push_row(ScanTable& table, double x, ConditionalEstimate ce) {
    ScanRow row;
    row.x = x;
    row.ce = std::move(ce);
    if (!table.rows.empty()) {
        const auto& prev = table.rows.back().ce;
        if (prev.defined && row.ce.defined) {
            row.diff_prev = std::abs(row.ce.estimate.value - prev.estimate.value);
            row.diff_sigma = std::sqrt(prev.estimate.stderr_ * prev.estimate.stderr_ +
                                       row.ce.estimate.stderr_ * row.ce.estimate.stderr_);
        }
    }
    table.rows.push_back(std::move(row));
}

}  // namespace

ScanTable iic_convergence_scan(int d, const std::vector<int>& radii,
                               const CylinderEvent& event, double h, int64_t reps,
                               uint64_t seed) {
    if (radii.empty()) throw std::invalid_argument("iic_convergence_scan: no radii");
    for (size_t i = 1; i < radii.size(); ++i)
        if (radii[i] <= radii[i - 1])
            throw std::invalid_argument("iic_convergence_scan: radii must increase");
    ScanTable table;
    for (size_t i = 0; i < radii.size(); ++i) {
        LatticeDomain dom = build_box(d, radii[i], Metric::LInf);
        FieldSampler sampler = FieldSampler::make(dom);
        Conditioning cond{{0, 0, 0}, radii[i]};
        push_row(table, radii[i],
                 estimate_conditional(sampler, event, cond, h, reps, seed + i));
    }
    return table;
}

ScanTable iic_height_scan(int d, int n, const CylinderEvent& event,
                          const HeightSchedule& schedule, int R_max, int64_t reps,
                          uint64_t seed) {
    if (R_max < 1 || R_max > n)
        throw std::invalid_argument("iic_height_scan: R_max must lie inside the box");
    LatticeDomain dom = build_box(d, n, Metric::LInf);
    FieldSampler sampler = FieldSampler::make(dom);
    Conditioning cond{{0, 0, 0}, R_max};
    ScanTable table;
    for (size_t i = 0; i < schedule.size(); ++i)
        push_row(table, schedule.heights[i],
                 estimate_conditional(sampler, event, cond, schedule.heights[i], reps,
                                      seed + i));
    return table;
}

EpsilonResult epsilon_i_estimate(const LatticeDomain& dom, int r_i, int r_next,
                                 double h0, int h_grid, int64_t reps, uint64_t seed) {
    if (r_i < 1 || r_next <= r_i)
        throw std::invalid_argument("epsilon_i_estimate: need 1 <= r_i < r_next");
    if (dom.kind != LatticeDomain::Kind::Box || r_next > dom.box_halfwidth)
        throw std::invalid_argument("epsilon_i_estimate: annulus outside domain");
    if (h_grid < 1) throw std::invalid_argument("epsilon_i_estimate: empty h grid");
    if (h0 < 0.0) throw std::invalid_argument("epsilon_i_estimate: h0 must be >= 0");

    const Coord origin{0, 0, 0};
    // annulus A_i = B(r_next) \ B(r_i)
    RegionSpec annulus = RegionSpec::annulus(origin, r_i + 1, r_next);
    auto annulus_set = region_vertices(dom, annulus);
    std::vector<char> in_annulus(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v : annulus_set) in_annulus[static_cast<size_t>(v)] = 1;

    // family: opposite outer faces of the annulus, one pair per axis
    EpsilonResult out;
    std::vector<std::pair<std::vector<Vertex>, std::vector<Vertex>>> family;
    for (int axis = 0; axis < dom.d; ++axis) {
        std::vector<Vertex> plus, minus;
        for (Vertex v : annulus_set) {
            if (dom.coord(v)[axis] == r_next) plus.push_back(v);
            if (dom.coord(v)[axis] == -r_next) minus.push_back(v);
        }
        if (plus.empty() || minus.empty()) continue;
        family.emplace_back(std::move(plus), std::move(minus));
        out.family.push_back("outer-face-pair-axis-" + std::to_string(axis));
    }

    std::vector<double> heights;
    for (int i = 0; i < h_grid; ++i)
        heights.push_back(h_grid == 1 ? h0 : h0 * i / (h_grid - 1));

    std::vector<ResolvedCrossing> family_rq;
    for (const auto& [plus, minus] : family) {
        ResolvedCrossing rq;
        rq.source = plus;
        rq.is_target.assign(static_cast<size_t>(dom.vertex_count()), 0);
        for (Vertex v : minus) rq.is_target[static_cast<size_t>(v)] = 1;
        rq.mask = std::vector<char>(in_annulus.begin(), in_annulus.end());
        family_rq.push_back(std::move(rq));
    }

    FieldSampler sampler = FieldSampler::make(dom);
    CrossingQuery cond{RegionSpec::boundary(origin, r_i),
                       RegionSpec::boundary(origin, r_next), std::nullopt, 0.0};

    for (double h : heights) {
        CrossingQuery ch = cond;
        ch.h = h;
        ResolvedCrossing cond_rq = resolve_crossing(dom, ch);
        RunPlan plan;
        plan.replicas = std::min<int64_t>(reps, 256);
        plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
        plan.seed = seed + static_cast<uint64_t>(h * 1000.0);
        struct Counts {
            int64_t accepted = 0;
            std::vector<int64_t> not_connected;
        };
        auto per_replica = [&](int64_t, Philox& rng) -> Counts {
            Counts c;
            c.not_connected.assign(family.size(), 0);
            for (int64_t i = 0; i < plan.per_replica; ++i) {
                Eigen::VectorXd values = sampler.sample(rng);
                FieldSample s = extend_level_set(dom, values, h, rng);
                if (!crossing_occurs(s, cond_rq)) continue;
                ++c.accepted;
                for (size_t f = 0; f < family.size(); ++f)
                    if (!crossing_occurs(s, family_rq[f])) ++c.not_connected[f];
            }
            return c;
        };
        Counts init;
        init.not_connected.assign(family.size(), 0);
        Counts total =
            run_replicas<Counts>(plan, per_replica, init, [](Counts a, Counts b) {
                a.accepted += b.accepted;
                for (size_t i = 0; i < a.not_connected.size(); ++i)
                    a.not_connected[i] += b.not_connected[i];
                return a;
            });
        for (size_t f = 0; f < family.size(); ++f) {
            EpsilonCell cell;
            cell.h = h;
            cell.pair_index = static_cast<int>(f);
            cell.defined = total.accepted > 0;
            if (cell.defined)
                cell.estimate = bernoulli_estimate("epsilon_i", total.not_connected[f],
                                                   total.accepted, plan.seed);
            out.cells.push_back(cell);
        }
    }
    for (const auto& cell : out.cells) {
        if (!cell.defined) continue;
        if (!out.defined || cell.estimate.value > out.sup) {
            out.sup = cell.estimate.value;
            out.sup_lo = cell.estimate.lo;
            out.sup_hi = cell.estimate.hi;
            out.defined = true;
        }
    }
    return out;
}

QmResult qm_ratio(const LatticeDomain& dom, const RegionSpec& X, const RegionSpec& Y,
                  const std::optional<RegionSpec>& Z, Coord center, int r, double h,
                  int64_t reps, uint64_t seed) {
    QmResult out;
    out.seed = seed;
    RegionSpec sphere = RegionSpec::boundary(center, r);
    CrossingQuery q_xy{X, Y, Z, h};
    CrossingQuery q_xs{X, sphere, Z, h};
    CrossingQuery q_ys{Y, sphere, Z, h};
    ResolvedCrossing rq_xy = resolve_crossing(dom, q_xy);
    ResolvedCrossing rq_xs = resolve_crossing(dom, q_xs);
    ResolvedCrossing rq_ys = resolve_crossing(dom, q_ys);

    // inclusion check applies when Y avoids the closed ball B(center, r)
    bool check_inclusion = true;
    for (Vertex v : region_vertices(dom, Y))
        if (dom.dist(center, dom.coord(v)) <= r) check_inclusion = false;

    FieldSampler sampler = FieldSampler::make(dom);
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 256);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    struct Counts {
        int64_t n = 0, s0 = 0, s1 = 0, s2 = 0, s01 = 0, s02 = 0, s12 = 0;
        int64_t violations = 0;
    };
    auto per_replica = [&](int64_t, Philox& rng) -> Counts {
        Counts c;
        for (int64_t i = 0; i < plan.per_replica; ++i) {
            Eigen::VectorXd values = sampler.sample(rng);
            FieldSample s = extend_level_set(dom, values, h, rng);
            bool i0 = crossing_occurs(s, rq_xy);
            bool i1 = crossing_occurs(s, rq_xs);
            bool i2 = crossing_occurs(s, rq_ys);
            ++c.n;
            c.s0 += i0;
            c.s1 += i1;
            c.s2 += i2;
            c.s01 += i0 && i1;
            c.s02 += i0 && i2;
            c.s12 += i1 && i2;
            if (check_inclusion && i0 && (!i1 || !i2)) ++c.violations;
        }
        return c;
    };
    Counts total = run_replicas<Counts>(plan, per_replica, Counts{},
                                        [](Counts a, Counts b) {
                                            a.n += b.n;
                                            a.s0 += b.s0;
                                            a.s1 += b.s1;
                                            a.s2 += b.s2;
                                            a.s01 += b.s01;
                                            a.s02 += b.s02;
                                            a.s12 += b.s12;
                                            a.violations += b.violations;
                                            return a;
                                        });
    out.inclusion_violations = total.violations;
    out.numerator = bernoulli_estimate("qm_num", total.s0, total.n, seed);
    out.denom_x = bernoulli_estimate("qm_den_x", total.s1, total.n, seed);
    out.denom_y = bernoulli_estimate("qm_den_y", total.s2, total.n, seed);
    if (total.s1 == 0 || total.s2 == 0) {
        out.defined = false;
        return out;
    }
    double n = static_cast<double>(total.n);
    double p0 = total.s0 / n, p1 = total.s1 / n, p2 = total.s2 / n;
    out.ratio = p0 / (p1 * p2);
    // delta method with the empirical covariance of the three indicators
    double c00 = p0 * (1 - p0);
    double c11 = p1 * (1 - p1);
    double c22 = p2 * (1 - p2);
    double c01 = total.s01 / n - p0 * p1;
    double c02 = total.s02 / n - p0 * p2;
    double c12 = total.s12 / n - p1 * p2;
    double g0 = 1.0 / (p1 * p2);
    double g1 = -p0 / (p1 * p1 * p2);
    double g2 = -p0 / (p1 * p2 * p2);
    double var = (g0 * g0 * c00 + g1 * g1 * c11 + g2 * g2 * c22 + 2 * g0 * g1 * c01 +
                  2 * g0 * g2 * c02 + 2 * g1 * g2 * c12) /
                 n;
    out.stderr_ = var > 0.0 ? std::sqrt(var) : 0.0;
    double z = normal_quantile(0.975);
    out.lo = out.ratio - z * out.stderr_;
    out.hi = out.ratio + z * out.stderr_;
    return out;
}

}  // namespace cableperc
