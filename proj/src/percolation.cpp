#include "cableperc/percolation.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace cableperc {

namespace {

std::vector<char> restriction_mask(const LatticeDomain& dom,
                                   const std::optional<RegionSpec>& restriction) {
    std::vector<char> mask(static_cast<size_t>(dom.vertex_count()), 1);
    if (restriction) {
        std::fill(mask.begin(), mask.end(), 0);
        for (Vertex v : region_vertices(dom, *restriction)) mask[static_cast<size_t>(v)] = 1;
    }
    return mask;
}

}  // namespace

ClusterLabeling label_clusters(const FieldSample& sample,
                               const std::optional<RegionSpec>& restriction) {
    const LatticeDomain& dom = *sample.dom;
    auto mask = restriction_mask(dom, restriction);
    const int32_t nv = dom.vertex_count();

    UnionFind uf(nv);
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        if (!sample.edge_open[e]) continue;
        auto [u, v] = dom.edges[e];
        if (mask[static_cast<size_t>(u)] && mask[static_cast<size_t>(v)]) uf.unite(u, v);
    }

    ClusterLabeling out;
    out.root.assign(static_cast<size_t>(nv), -1);
    out.size.assign(static_cast<size_t>(nv), 0);
    for (Vertex v = 0; v < nv; ++v) {
        if (!mask[static_cast<size_t>(v)] || !sample.vertex_open(v)) continue;
        out.root[static_cast<size_t>(v)] = uf.find(v);
        ++out.open_vertex_count;
    }
    for (Vertex v = 0; v < nv; ++v)
        if (out.root[static_cast<size_t>(v)] >= 0)
            ++out.size[static_cast<size_t>(out.root[static_cast<size_t>(v)])];
    for (Vertex v = 0; v < nv; ++v)
        if (out.root[static_cast<size_t>(v)] == v) ++out.cluster_count;
    return out;
}

bool open_cluster_reaches(const LatticeDomain& dom, const std::vector<uint8_t>& edge_open,
                          Vertex start, const std::vector<char>& is_target) {
    if (start < 0) return false;
    if (is_target[static_cast<size_t>(start)]) return true;
    std::vector<char> visited(static_cast<size_t>(dom.vertex_count()), 0);
    std::vector<Vertex> stack{start};
    visited[static_cast<size_t>(start)] = 1;
    while (!stack.empty()) {
        Vertex v = stack.back();
        stack.pop_back();
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
            if (!edge_open[static_cast<size_t>(dom.edge_index[s])]) continue;
            Vertex w = dom.adj[s];
            if (visited[static_cast<size_t>(w)]) continue;
            if (is_target[static_cast<size_t>(w)]) return true;
            visited[static_cast<size_t>(w)] = 1;
            stack.push_back(w);
        }
    }
    return false;
}

ResolvedCrossing resolve_crossing(const LatticeDomain& dom, const CrossingQuery& query) {
    ResolvedCrossing rq;
    rq.source = region_vertices(dom, query.source);
    rq.is_target.assign(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v : region_vertices(dom, query.target))
        rq.is_target[static_cast<size_t>(v)] = 1;
    rq.mask = restriction_mask(dom, query.restriction);
    rq.h = query.h;
    return rq;
}

// Multi-source BFS from the open source vertices through open edges inside
// the restriction; exits on the first target hit.
bool crossing_occurs(const FieldSample& sample, const ResolvedCrossing& rq) {
    const LatticeDomain& dom = *sample.dom;
    std::vector<char> visited(static_cast<size_t>(dom.vertex_count()), 0);
    std::vector<Vertex> stack;
    for (Vertex v : rq.source) {
        if (!rq.mask[static_cast<size_t>(v)] || !sample.vertex_open(v)) continue;
        if (rq.is_target[static_cast<size_t>(v)]) return true;
        visited[static_cast<size_t>(v)] = 1;
        stack.push_back(v);
    }
    while (!stack.empty()) {
        Vertex v = stack.back();
        stack.pop_back();
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
            if (!sample.edge_open[static_cast<size_t>(dom.edge_index[s])]) continue;
            Vertex w = dom.adj[s];
            if (visited[static_cast<size_t>(w)] || !rq.mask[static_cast<size_t>(w)]) continue;
            if (rq.is_target[static_cast<size_t>(w)]) return true;
            visited[static_cast<size_t>(w)] = 1;
            stack.push_back(w);
        }
    }
    return false;
}

bool crossing_occurs(const FieldSample& sample, const CrossingQuery& query) {
    return crossing_occurs(sample, resolve_crossing(*sample.dom, query));
}

Estimate estimate_crossing(const FieldSampler& sampler, const CrossingQuery& query,
                           int64_t reps, uint64_t seed) {
    if (reps < 1) throw std::invalid_argument("estimate_crossing: reps must be >= 1");
    const LatticeDomain& dom = sampler.domain();
    ResolvedCrossing rq = resolve_crossing(dom, query);
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 512);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    auto trial = [&](Philox& rng) -> bool {
        Eigen::VectorXd values = sampler.sample(rng);
        FieldSample s = extend_level_set(dom, values, query.h, rng);
        return crossing_occurs(s, rq);
    };
    Estimate e = run_bernoulli(plan, "crossing", trial);
    e.seed = seed;
    return e;
}

Estimate estimate_crossing(const LatticeDomain& dom, const CrossingQuery& query,
                           int64_t reps, uint64_t seed) {
    return estimate_crossing(FieldSampler::make(dom), query, reps, seed);
}

std::vector<Estimate> estimate_crossing_at_heights(const FieldSampler& sampler,
                                                   const CrossingQuery& query_template,
                                                   const HeightSchedule& schedule,
                                                   int64_t reps, uint64_t seed,
                                                   bool coupled) {
    if (!coupled) {
        std::vector<Estimate> out;
        for (size_t i = 0; i < schedule.size(); ++i) {
            CrossingQuery q = query_template;
            q.h = schedule.heights[i];
            out.push_back(estimate_crossing(sampler, q, reps, seed + i + 1));
        }
        return out;
    }
    const LatticeDomain& dom = sampler.domain();
    std::vector<ResolvedCrossing> rqs;
    for (double hh : schedule.heights) {
        CrossingQuery q = query_template;
        q.h = hh;
        rqs.push_back(resolve_crossing(dom, q));
    }
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 512);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    using Counts = std::vector<int64_t>;
    auto per_replica = [&](int64_t, Philox& rng) -> Counts {
        Counts hits(schedule.size(), 0);
        for (int64_t i = 0; i < plan.per_replica; ++i) {
            Eigen::VectorXd values = sampler.sample(rng);
            auto samples = extend_level_set_coupled(dom, values, schedule, rng);
            for (size_t k = 0; k < samples.size(); ++k)
                if (crossing_occurs(samples[k], rqs[k])) ++hits[k];
        }
        return hits;
    };
    Counts totals = run_replicas<Counts>(
        plan, per_replica, Counts(schedule.size(), 0), [](Counts a, Counts b) {
            for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
            return a;
        });
    std::vector<Estimate> out;
    for (size_t k = 0; k < schedule.size(); ++k)
        out.push_back(bernoulli_estimate("crossing", totals[k], plan.total(), seed));
    return out;
}

int64_t chemical_distance(const FieldSample& sample, const std::vector<Vertex>& from,
                          const std::vector<Vertex>& to) {
    const LatticeDomain& dom = *sample.dom;
    std::vector<char> is_target(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v : to)
        if (sample.vertex_open(v)) is_target[static_cast<size_t>(v)] = 1;
    std::vector<int64_t> dist(static_cast<size_t>(dom.vertex_count()), -1);
    std::deque<Vertex> queue;
    for (Vertex v : from)
        if (sample.vertex_open(v) && dist[static_cast<size_t>(v)] < 0) {
            dist[static_cast<size_t>(v)] = 0;
            queue.push_back(v);
        }
    while (!queue.empty()) {
        Vertex v = queue.front();
        queue.pop_front();
        if (is_target[static_cast<size_t>(v)]) return dist[static_cast<size_t>(v)];
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
            if (!sample.edge_open[static_cast<size_t>(dom.edge_index[s])]) continue;
            Vertex w = dom.adj[s];
            if (dist[static_cast<size_t>(w)] >= 0) continue;
            dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(v)] + 1;
            queue.push_back(w);
        }
    }
    return kDistanceInfinite;
}

int64_t chemical_distance(const FieldSample& sample, Vertex u, Vertex v) {
    return chemical_distance(sample, std::vector<Vertex>{u}, std::vector<Vertex>{v});
}

ChemScanResult conditional_chemical_scan(const LatticeDomain& dom, double alpha,
                                         double beta, double gamma, double h,
                                         int64_t reps, uint64_t seed,
                                         const std::vector<double>& C_grid) {
    if (!(0.0 < alpha && alpha < beta && beta < gamma && gamma < 1.0))
        throw std::invalid_argument("conditional_chemical_scan: need 0 < alpha < beta < gamma < 1");
    if (dom.kind != LatticeDomain::Kind::Box)
        throw std::invalid_argument("conditional_chemical_scan: box domain required");

    const int N = dom.box_halfwidth;
    const int ra = std::max(1, static_cast<int>(std::floor(alpha * N)));
    const int rb = std::max(ra + 1, static_cast<int>(std::floor(beta * N)));
    const int rg = std::max(rb + 1, static_cast<int>(std::floor(gamma * N)));
    if (rg > N)
        throw std::invalid_argument("conditional_chemical_scan: gamma sphere outside domain");

    const Coord origin{0, 0, 0};
    auto inner = region_vertices(dom, RegionSpec::box(origin, ra));
    auto beta_sphere = region_vertices(dom, RegionSpec::boundary(origin, rb));
    auto gamma_sphere = region_vertices(dom, RegionSpec::boundary(origin, rg));
    CrossingQuery conditioning{RegionSpec::box(origin, ra),
                               RegionSpec::boundary(origin, rg), std::nullopt, h};
    ResolvedCrossing rq = resolve_crossing(dom, conditioning);

    FieldSampler sampler = FieldSampler::make(dom);
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 512);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;

    struct Acc {
        int64_t accepted = 0;
        std::vector<int64_t> exceed;
    };
    auto per_replica = [&](int64_t, Philox& rng) -> Acc {
        Acc acc;
        acc.exceed.assign(C_grid.size(), 0);
        for (int64_t i = 0; i < plan.per_replica; ++i) {
            Eigen::VectorXd values = sampler.sample(rng);
            FieldSample s = extend_level_set(dom, values, h, rng);
            if (!crossing_occurs(s, rq)) continue;
            ++acc.accepted;
            int64_t dist = chemical_distance(s, inner, beta_sphere);
            double scale = N * std::pow(std::log(std::max(2.0, double(N))), 0.25);
            for (size_t c = 0; c < C_grid.size(); ++c) {
                double threshold = C_grid[c] * scale;
                bool exceeds = dist == kDistanceInfinite ||
                               static_cast<double>(dist) > threshold;
                if (exceeds) ++acc.exceed[c];
            }
        }
        return acc;
    };
    Acc init;
    init.exceed.assign(C_grid.size(), 0);
    Acc total = run_replicas<Acc>(plan, per_replica, init, [](Acc a, Acc b) {
        a.accepted += b.accepted;
        for (size_t i = 0; i < a.exceed.size(); ++i) a.exceed[i] += b.exceed[i];
        return a;
    });

    ChemScanResult out;
    out.reps = plan.total();
    out.accepted = total.accepted;
    out.acceptance_rate = static_cast<double>(total.accepted) / out.reps;
    out.defined = total.accepted > 0;
    double scale = N * std::pow(std::log(std::max(2.0, double(N))), 0.25);
    for (size_t c = 0; c < C_grid.size(); ++c) {
        ChemScanRow row;
        row.C = C_grid[c];
        row.threshold = C_grid[c] * scale;
        if (out.defined)
            row.conditional =
                bernoulli_estimate("chem_exceed", total.exceed[c], total.accepted, seed);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace cableperc
