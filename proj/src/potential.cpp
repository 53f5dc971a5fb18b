#include "cableperc/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cableperc {

namespace {

// Dirichlet Laplacian D - A over the given interior subset (columns/rows in
// `live` order). Degrees count all incident domain edges, so free slab faces
// keep their reduced degree instead of leaking mass.
Eigen::MatrixXd laplacian(const LatticeDomain& dom, const std::vector<Vertex>& live) {
    Eigen::Index n = static_cast<Eigen::Index>(live.size());
    std::vector<Eigen::Index> pos(static_cast<size_t>(dom.vertex_count()), -1);
    for (Eigen::Index i = 0; i < n; ++i) pos[static_cast<size_t>(live[i])] = i;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vertex v = live[static_cast<size_t>(i)];
        L(i, i) = dom.degree(v);
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
            Vertex w = dom.adj[s];
            Eigen::Index j = pos[static_cast<size_t>(w)];
            if (j >= 0) L(i, j) -= 1.0;
        }
    }
    return L;
}

std::vector<Vertex> all_interior(const LatticeDomain& dom) {
    std::vector<Vertex> v(static_cast<size_t>(dom.interior_count));
    for (Vertex i = 0; i < dom.interior_count; ++i) v[static_cast<size_t>(i)] = i;
    return v;
}

}  // namespace

GreenMatrix green(const LatticeDomain& dom) {
    if (dom.interior_count < 1) throw std::invalid_argument("green: empty interior");
    if (dom.interior_count > kDenseDomainCap)
        throw std::invalid_argument("green: domain exceeds the dense exact-mode cap");
    Eigen::MatrixXd L = laplacian(dom, all_interior(dom));
    Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("green: Laplacian factorization failed (internal error)");
    Eigen::Index n = L.rows();
    GreenMatrix out;
    out.G = 2.0 * dom.d * llt.solve(Eigen::MatrixXd::Identity(n, n));
    out.G = 0.5 * (out.G + out.G.transpose()).eval();  // symmetrize roundoff
    Eigen::LLT<Eigen::MatrixXd> gllt(out.G);
    if (gllt.info() != Eigen::Success)
        throw std::runtime_error("green: covariance factorization failed (internal error)");
    out.chol_lower = gllt.matrixL();
    return out;
}

GreenMatrix green_after_exploration(const LatticeDomain& dom,
                                    const std::vector<Vertex>& explored) {
    for (Vertex v : explored)
        if (v < 0 || !dom.is_interior(v))
            throw std::invalid_argument("green_after_exploration: explored set must be interior");
    std::vector<char> in_I(static_cast<size_t>(dom.interior_count), 0);
    for (Vertex v : explored) in_I[static_cast<size_t>(v)] = 1;
    std::vector<Vertex> live;
    for (Vertex v = 0; v < dom.interior_count; ++v)
        if (!in_I[static_cast<size_t>(v)]) live.push_back(v);

    GreenMatrix out;
    out.absorbed = explored;
    std::sort(out.absorbed.begin(), out.absorbed.end());
    out.absorbed.erase(std::unique(out.absorbed.begin(), out.absorbed.end()),
                       out.absorbed.end());
    out.G = Eigen::MatrixXd::Zero(dom.interior_count, dom.interior_count);
    if (live.empty()) return out;

    Eigen::MatrixXd L = laplacian(dom, live);
    Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("green_after_exploration: factorization failed");
    Eigen::MatrixXd Gs =
        2.0 * dom.d * llt.solve(Eigen::MatrixXd::Identity(L.rows(), L.rows()));
    for (size_t i = 0; i < live.size(); ++i)
        for (size_t j = 0; j < live.size(); ++j)
            out.G(live[i], live[j]) = Gs(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j));
    return out;
}

Estimate green_mc_oracle(const LatticeDomain& dom, Vertex u, Vertex v,
                         int64_t walks, uint64_t seed) {
    if (walks < 1) throw std::invalid_argument("green_mc_oracle: walks must be >= 1");
    if (u < 0 || v < 0 || !dom.is_interior(u) || !dom.is_interior(v))
        throw std::invalid_argument("green_mc_oracle: vertices must be interior");

    RunPlan plan;
    plan.replicas = std::min<int64_t>(walks, 256);
    plan.per_replica = (walks + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    auto trial = [&](Philox& rng) -> double {
        Vertex x = u;
        double visits = 0.0;
        while (dom.is_interior(x)) {
            if (x == v) visits += 1.0;
            int deg = dom.degree(x);
            int pick = static_cast<int>(rng.next_double() * deg);
            if (pick >= deg) pick = deg - 1;
            x = dom.adj[dom.adj_offset[x] + pick];
        }
        return visits;
    };
    return run_mean(plan, "green_mc_oracle", trial);
}

Eigen::MatrixXd harmonic_measure_matrix(const LatticeDomain& dom,
                                        const std::vector<Vertex>& K) {
    if (K.empty()) throw std::invalid_argument("harmonic_measure: K must be nonempty");
    std::vector<char> in_K(static_cast<size_t>(dom.vertex_count()), 0);
    std::vector<Eigen::Index> col_of(static_cast<size_t>(dom.vertex_count()), -1);
    for (size_t j = 0; j < K.size(); ++j) {
        Vertex u = K[j];
        if (u < 0 || u >= dom.vertex_count())
            throw std::invalid_argument("harmonic_measure: K outside domain");
        in_K[static_cast<size_t>(u)] = 1;
        col_of[static_cast<size_t>(u)] = static_cast<Eigen::Index>(j);
    }
    Eigen::MatrixXd out =
        Eigen::MatrixXd::Zero(dom.interior_count, static_cast<Eigen::Index>(K.size()));
    for (Vertex v = 0; v < dom.interior_count; ++v)
        if (in_K[static_cast<size_t>(v)]) out(v, col_of[static_cast<size_t>(v)]) = 1.0;

    std::vector<Vertex> free_set;
    for (Vertex u = 0; u < dom.interior_count; ++u)
        if (!in_K[static_cast<size_t>(u)]) free_set.push_back(u);
    if (free_set.empty()) return out;

    Eigen::MatrixXd L = laplacian(dom, free_set);
    // right-hand sides: one column per K vertex, entries = adjacency counts
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(L.rows(), static_cast<Eigen::Index>(K.size()));
    for (size_t i = 0; i < free_set.size(); ++i) {
        Vertex u = free_set[i];
        for (int32_t s = dom.adj_offset[u]; s < dom.adj_offset[u + 1]; ++s) {
            Eigen::Index j = col_of[static_cast<size_t>(dom.adj[s])];
            if (j >= 0) B(static_cast<Eigen::Index>(i), j) += 1.0;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("harmonic_measure: factorization failed");
    Eigen::MatrixXd H = llt.solve(B);
    for (size_t i = 0; i < free_set.size(); ++i)
        for (Eigen::Index j = 0; j < H.cols(); ++j) {
            double w = H(static_cast<Eigen::Index>(i), j);
            out(free_set[i], j) = (w < 0.0 && w > -1e-14) ? 0.0 : w;
        }
    return out;
}

HarmonicMeasure harmonic_measure(const LatticeDomain& dom, Vertex v,
                                 const std::vector<Vertex>& K) {
    if (v < 0 || v >= dom.vertex_count())
        throw std::invalid_argument("harmonic_measure: start outside domain");
    HarmonicMeasure hm;
    hm.start = v;
    hm.support = K;
    hm.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.size()));
    if (!dom.is_interior(v)) {
        // boundary start: killed at time 0 unless it belongs to K
        for (size_t j = 0; j < K.size(); ++j)
            if (K[j] == v) hm.weights(static_cast<Eigen::Index>(j)) = 1.0;
        return hm;
    }
    hm.weights = harmonic_measure_matrix(dom, K).row(v).transpose();
    return hm;
}

namespace {

// Diagonally preconditioned CG on the Dirichlet Laplacian restricted to
// `live` (marked by mask), matrix-free through the CSR adjacency.
Eigen::VectorXd cg_solve(const LatticeDomain& dom, const std::vector<char>& live,
                         const Eigen::VectorXd& rhs, double tol) {
    const Vertex n = dom.interior_count;
    auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        for (Vertex v = 0; v < n; ++v) {
            if (!live[static_cast<size_t>(v)]) {
                y(v) = 0.0;
                continue;
            }
            double acc = dom.degree(v) * x(v);
            for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
                Vertex w = dom.adj[s];
                if (w < n && live[static_cast<size_t>(w)]) acc -= x(w);
            }
            y(v) = acc;
        }
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n), r = rhs, z(n), p(n), Ap(n);
    for (Vertex v = 0; v < n; ++v)
        if (!live[static_cast<size_t>(v)]) r(v) = 0.0;
    double rhs_norm = r.norm();
    if (rhs_norm == 0.0) return x;
    auto precond = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        for (Vertex v = 0; v < n; ++v)
            out(v) = live[static_cast<size_t>(v)] ? in(v) / dom.degree(v) : 0.0;
    };
    precond(r, z);
    p = z;
    double rz = r.dot(z);
    const int max_iter = 20000;
    for (int it = 0; it < max_iter; ++it) {
        apply(p, Ap);
        double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= tol * rhs_norm) return x;
        precond(r, z);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw std::runtime_error("cg_solve: no convergence");
}

}  // namespace

double hitting_probability(const LatticeDomain& dom, Vertex from,
                           const std::vector<Vertex>& S, double tol) {
    if (from < 0 || from >= dom.vertex_count())
        throw std::invalid_argument("hitting_probability: start outside domain");
    std::vector<char> in_S(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex u : S) {
        if (u < 0 || u >= dom.vertex_count())
            throw std::invalid_argument("hitting_probability: S outside domain");
        in_S[static_cast<size_t>(u)] = 1;
    }
    if (in_S[static_cast<size_t>(from)]) return 1.0;
    if (!dom.is_interior(from)) return 0.0;
    std::vector<char> live(static_cast<size_t>(dom.interior_count), 0);
    for (Vertex v = 0; v < dom.interior_count; ++v)
        live[static_cast<size_t>(v)] = !in_S[static_cast<size_t>(v)];
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dom.interior_count);
    for (Vertex v = 0; v < dom.interior_count; ++v) {
        if (!live[static_cast<size_t>(v)]) continue;
        double c = 0.0;
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s)
            if (in_S[static_cast<size_t>(dom.adj[s])]) c += 1.0;
        rhs(v) = c;
    }
    Eigen::VectorXd u = cg_solve(dom, live, rhs, tol);
    double p = u(from);
    return std::min(1.0, std::max(0.0, p));
}

double green_entry(const LatticeDomain& dom, Vertex u, Vertex v, double tol) {
    if (u < 0 || v < 0 || !dom.is_interior(u) || !dom.is_interior(v))
        throw std::invalid_argument("green_entry: vertices must be interior");
    std::vector<char> live(static_cast<size_t>(dom.interior_count), 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dom.interior_count);
    rhs(v) = 1.0;
    Eigen::VectorXd col = cg_solve(dom, live, rhs, tol);
    return 2.0 * dom.d * col(u);
}

CablePoint::CablePoint(Vertex u_, Vertex v_, double r_) : u(u_), v(v_), r(r_) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("CablePoint: offset outside [0,1]");
    if (u > v) {  // canonical orientation: smaller index first
        std::swap(u, v);
        r = 1.0 - r;
    }
}

double metric_green(const LatticeDomain& dom, const GreenMatrix& G,
                    const CablePoint& w1, const CablePoint& w2) {
    auto check_edge = [&](const CablePoint& w) {
        for (int32_t s = dom.adj_offset[w.u]; s < dom.adj_offset[w.u + 1]; ++s)
            if (dom.adj[s] == w.v) return;
        throw std::invalid_argument("metric_green: cable point not on a domain edge");
    };
    check_edge(w1);
    check_edge(w2);
    double r1 = w1.r, r2 = w2.r;
    double val = (1.0 - r1) * (1.0 - r2) * G.at(dom, w1.u, w2.u) +
                 r1 * r2 * G.at(dom, w1.v, w2.v) +
                 (1.0 - r1) * r2 * G.at(dom, w1.u, w2.v) +
                 r1 * (1.0 - r2) * G.at(dom, w1.v, w2.u);
    if (w1.same_edge(w2))
        val += 2.0 * dom.d * (std::min(r1, r2) - r1 * r2);
    return val;
}

void dump_green_csv(const LatticeDomain& dom, const GreenMatrix& G,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_green_csv: cannot open " + path);
    out << "row,col,value\n";
    for (Eigen::Index i = 0; i < G.G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.G.cols(); ++j) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", static_cast<int>(i),
                          static_cast<int>(j), G.G(i, j));
            out << buf;
        }
}

}  // namespace cableperc
