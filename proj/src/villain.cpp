#include "cableperc/villain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace cableperc {

namespace {

double wrap_angle(double theta) {
    double w = std::fmod(theta, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

double gauss_density(double z, double t) {
    return std::exp(-z * z / (2.0 * t)) / std::sqrt(kTwoPi * t);
}

}  // namespace

double circle_kernel_image(double t, double delta) {
    if (t <= 0.0) throw std::invalid_argument("circle_kernel: t must be > 0");
    double acc = gauss_density(delta, t);
    for (int n = 1;; ++n) {
        double plus = gauss_density(delta + kTwoPi * n, t);
        double minus = gauss_density(delta - kTwoPi * n, t);
        acc += plus + minus;
        if (plus < 1e-18 && minus < 1e-18) break;
        if (n > 1000) break;
    }
    return acc;
}

double circle_kernel_dual(double t, double delta) {
    if (t <= 0.0) throw std::invalid_argument("circle_kernel: t must be > 0");
    double acc = 1.0;
    for (int k = 1;; ++k) {
        double term = 2.0 * std::exp(-0.5 * k * k * t) * std::cos(k * delta);
        acc += term;
        if (std::exp(-0.5 * k * k * t) < 1e-18) break;
        if (k > 4000) break;
    }
    return acc / kTwoPi;
}

double circle_kernel(double t, double theta1, double theta2) {
    double delta = theta1 - theta2;
    return t >= 1.0 ? circle_kernel_dual(t, delta) : circle_kernel_image(t, delta);
}

double arc_kernel(double t, double theta1, double theta2, const Arc& arc) {
    if (t <= 0.0) throw std::invalid_argument("arc_kernel: t must be > 0");
    double L = arc.b - arc.a;
    if (!(L > 0.0) || L > kTwoPi + 1e-12)
        throw std::invalid_argument("arc_kernel: invalid arc");
    double x = theta1 - arc.a;
    double y = theta2 - arc.a;
    const double eps = 1e-15;
    if (x < -eps || x > L + eps || y < -eps || y > L + eps)
        throw std::invalid_argument("arc_kernel: argument outside arc");
    if (x < eps || x > L - eps || y < eps || y > L - eps) return 0.0;  // absorbed
    double acc = gauss_density(x - y, t) - gauss_density(x + y, t);
    for (int n = 1;; ++n) {
        double shift = 2.0 * n * L;
        double ring = gauss_density(x - y + shift, t) + gauss_density(x - y - shift, t) -
                      gauss_density(x + y + shift, t) - gauss_density(x + y - shift, t);
        acc += ring;
        double scale = std::max(gauss_density(x - y + shift, t),
                                gauss_density(x - y - shift, t));
        if (scale < 1e-18) break;
        if (n > 4000) break;
    }
    return std::max(0.0, acc);
}

AvoidSet::AvoidSet(std::vector<double> raw) {
    if (raw.empty()) throw std::invalid_argument("AvoidSet: needs at least one point");
    for (double a : raw) angles.push_back(wrap_angle(a));
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                 angles.end());
}

AvoidSet AvoidSet::pm_i() { return AvoidSet({M_PI / 2.0, 3.0 * M_PI / 2.0}); }
AvoidSet AvoidSet::pm_xi(double alpha) { return AvoidSet({alpha, alpha + M_PI}); }
AvoidSet AvoidSet::pm_xi_bar(double alpha) { return AvoidSet({-alpha, M_PI - alpha}); }

AvoidSet AvoidSet::united(const AvoidSet& other) const {
    std::vector<double> all = angles;
    all.insert(all.end(), other.angles.begin(), other.angles.end());
    return AvoidSet(std::move(all));
}

std::optional<Arc> AvoidSet::arc_containing(double theta) const {
    double w = wrap_angle(theta);
    const double eps = 1e-13;
    for (double a : angles)
        if (std::abs(w - a) < eps || std::abs(w - a - kTwoPi) < eps ||
            std::abs(w - a + kTwoPi) < eps)
            return std::nullopt;  // on the absorbed set
    auto it = std::upper_bound(angles.begin(), angles.end(), w);
    double lo, hi;
    if (it == angles.begin()) {  // below the smallest point: wrap backwards
        lo = angles.back() - kTwoPi;
        hi = angles.front();
    } else if (it == angles.end()) {
        lo = angles.back();
        hi = angles.front() + kTwoPi;
    } else {
        lo = *(it - 1);
        hi = *it;
    }
    return Arc{lo, hi};
}

double edge_avoid_probability(double t, double theta_x, double theta_y,
                              const AvoidSet& S) {
    if (t <= 0.0) throw std::invalid_argument("edge_avoid_probability: t must be > 0");
    auto arc = S.arc_containing(theta_x);
    if (!arc) return 0.0;
    double x = wrap_angle(theta_x);
    // place x inside the unwrapped arc
    while (x <= arc->a) x += kTwoPi;
    while (x >= arc->b) x -= kTwoPi;
    // shift y into the same unwrapped window; failure means a different arc
    double y = wrap_angle(theta_y);
    while (y < arc->a) y += kTwoPi;
    while (y > arc->b) y -= kTwoPi;
    const double eps = 1e-13;
    if (y <= arc->a + eps || y >= arc->b - eps) return 0.0;
    double num = arc_kernel(t, x, y, *arc);
    double den = circle_kernel(t, theta_x, theta_y);
    double p = num / den;
    return std::min(1.0, std::max(0.0, p));
}

uint32_t joint_edge_indicator_mask(double t, double theta_x, double theta_y,
                                   const std::vector<const AvoidSet*>& sets,
                                   Philox& rng, int64_t* clamped) {
    size_t m = sets.size();
    if (m == 0 || m > 8) throw std::invalid_argument("joint indicators: 1..8 sets");
    size_t combos = size_t{1} << m;
    // q[W] = P(avoid the union of the sets in W); q[0] = 1
    std::vector<double> q(combos, 1.0);
    for (size_t W = 1; W < combos; ++W) {
        AvoidSet u = *sets[0];
        bool first = true;
        for (size_t i = 0; i < m; ++i) {
            if (!(W & (size_t{1} << i))) continue;
            if (first) {
                u = *sets[i];
                first = false;
            } else {
                u = u.united(*sets[i]);
            }
        }
        q[W] = edge_avoid_probability(t, theta_x, theta_y, u);
    }
    // atom[T] = P(avoided exactly the sets in T) by inclusion-exclusion
    std::vector<double> atom(combos, 0.0);
    double total = 0.0;
    for (size_t T = 0; T < combos; ++T) {
        double a = 0.0;
        size_t rest = (~T) & (combos - 1);
        // iterate supersets W of T
        for (size_t sub = rest;; sub = (sub - 1) & rest) {
            size_t W = T | sub;
            int extra = __builtin_popcountll(sub);
            a += (extra % 2 ? -1.0 : 1.0) * q[W];
            if (sub == 0) break;
        }
        if (a < 0.0) {
            if (clamped && a < -1e-12) ++*clamped;
            a = 0.0;
        }
        atom[T] = a;
        total += a;
    }
    if (total <= 0.0) return 0;
    double u = rng.next_double() * total;
    double acc = 0.0;
    for (size_t T = 0; T < combos; ++T) {
        acc += atom[T];
        if (u < acc) return static_cast<uint32_t>(T);
    }
    return static_cast<uint32_t>(combos - 1);
}

std::pair<bool, bool> joint_edge_indicators(double t, double theta_x, double theta_y,
                                            const AvoidSet& S1, const AvoidSet& S2,
                                            Philox& rng) {
    std::vector<const AvoidSet*> sets{&S1, &S2};
    uint32_t mask = joint_edge_indicator_mask(t, theta_x, theta_y, sets, rng);
    return {(mask & 1u) != 0, (mask & 2u) != 0};
}

double villain_avoid_bias_band(double t, double theta_x, double theta_y,
                               const AvoidSet& S, int steps) {
    auto arc = S.arc_containing(theta_x);
    if (!arc) return 0.0;  // on the set: both sides are exactly 0
    double x = wrap_angle(theta_x);
    while (x <= arc->a) x += kTwoPi;
    while (x >= arc->b) x -= kTwoPi;
    double y = wrap_angle(theta_y);
    while (y < arc->a) y += kTwoPi;
    while (y > arc->b) y -= kTwoPi;
    const double eps = 1e-13;
    if (y <= arc->a + eps || y >= arc->b - eps) return 0.0;  // different arc: exact 0
    double shift = 0.5826 * std::sqrt(t / static_cast<double>(steps));
    double width = arc->b - arc->a + 2.0 * shift;
    double grow = width > kTwoPi ? 0.5 * (kTwoPi - (arc->b - arc->a)) : shift;
    Arc widened{arc->a - grow, arc->b + grow};
    double den = circle_kernel(t, theta_x, theta_y);
    double p0 = arc_kernel(t, x, y, *arc) / den;
    double p1 = std::min(1.0, arc_kernel(t, x, y, widened) / den);
    return 1.4 * std::max(0.0, p1 - p0);
}

Estimate villain_avoid_oracle(double t, double theta_x, double theta_y,
                              const AvoidSet& S, int steps, int64_t reps,
                              uint64_t seed) {
    if (steps < 64) throw std::invalid_argument("villain_avoid_oracle: steps >= 64");
    auto arc = S.arc_containing(theta_x);
    if (!arc) return bernoulli_estimate("villain_avoid_oracle", 0, reps, seed);
    double x0 = wrap_angle(theta_x);
    while (x0 <= arc->a) x0 += kTwoPi;
    while (x0 >= arc->b) x0 -= kTwoPi;

    // winding weights for the lifted endpoint
    double ybase = wrap_angle(theta_y);
    int W = static_cast<int>(std::ceil(std::sqrt(90.0 * t) / kTwoPi)) + 2;
    std::vector<double> endpoints, weights;
    double wsum = 0.0;
    for (int n = -W; n <= W; ++n) {
        double y = ybase + kTwoPi * n;
        double w = gauss_density(y - x0, t);
        endpoints.push_back(y);
        weights.push_back(w);
        wsum += w;
    }
    const double dt = t / steps;
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 256);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    auto trial = [&](Philox& rng) -> bool {
        double u = rng.next_double() * wsum;
        size_t pick = 0;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        double y1 = endpoints[pick];
        if (y1 <= arc->a || y1 >= arc->b) return false;  // endpoint beyond the arc
        double b = x0;
        for (int i = 1; i < steps; ++i) {
            double remain = t - (i - 1) * dt;
            double drift = (y1 - b) * dt / remain;
            double var = dt * (remain - dt) / remain;
            b += drift + std::sqrt(std::max(0.0, var)) * rng.next_normal();
            if (b <= arc->a || b >= arc->b) return false;
        }
        return true;
    };
    return run_bernoulli(plan, "villain_avoid_oracle", trial);
}

VillainState::VillainState(const LatticeDomain& d, double t) : dom(&d) {
    if (t <= 0.0) throw std::invalid_argument("VillainState: edge time must be > 0");
    theta = Eigen::VectorXd::Zero(d.interior_count);
    edge_t = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d.edges.size()), t);
}

VillainState::VillainState(const LatticeDomain& d, Eigen::VectorXd edge_times)
    : dom(&d), edge_t(std::move(edge_times)) {
    if (edge_t.size() != static_cast<Eigen::Index>(d.edges.size()))
        throw std::invalid_argument("VillainState: one time per edge required");
    if ((edge_t.array() <= 0.0).any())
        throw std::invalid_argument("VillainState: edge times must be > 0");
    theta = Eigen::VectorXd::Zero(d.interior_count);
}

namespace {

// Tabulated circle kernel on a power-of-two grid for fast periodic lookup.
class KernelTable {
public:
    static constexpr int kSize = 16384;  // power of two

    explicit KernelTable(double t) {
        values_.resize(kSize + 1);
        for (int i = 0; i < kSize; ++i) {
            double delta = kTwoPi * i / kSize;
            values_[i] = t >= 1.0 ? circle_kernel_dual(t, delta)
                                  : circle_kernel_image(t, delta);
        }
        values_[kSize] = values_[0];
    }

    double at(double delta) const {
        double pos = delta * (kSize / kTwoPi);
        pos -= std::floor(pos / kSize) * kSize;
        int i = static_cast<int>(pos);
        double frac = pos - i;
        return values_[i] * (1.0 - frac) + values_[i + 1] * frac;
    }

    const double* data() const { return values_.data(); }

private:
    std::vector<double> values_;
};

const KernelTable& shared_kernel_table(double t) {
    static std::mutex mutex;
    static std::map<double, std::unique_ptr<KernelTable>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto [it, inserted] = cache.try_emplace(t, nullptr);
    if (inserted) it->second = std::make_unique<KernelTable>(t);
    return *it->second;
}

class KernelTableSet {
public:
    explicit KernelTableSet(const Eigen::VectorXd& edge_t) {
        for (Eigen::Index e = 0; e < edge_t.size(); ++e)
            per_edge_.push_back(&shared_kernel_table(edge_t(e)));
    }
    const KernelTable& for_edge(size_t e) const { return *per_edge_[e]; }

private:
    std::vector<const KernelTable*> per_edge_;
};

void heat_bath_sweep(VillainState& state, Philox& rng, const KernelTableSet& tables,
                     int bins, std::vector<double>& density,
                     std::vector<double>& cumulative) {
    const LatticeDomain& dom = *state.dom;
    const int M = bins;
    const double bin_width = kTwoPi / M;
    const bool fast = KernelTable::kSize % M == 0;
    const int stride = fast ? KernelTable::kSize / M : 0;
    density.assign(static_cast<size_t>(M), 1.0);
    cumulative.assign(static_cast<size_t>(M), 0.0);
    for (Vertex v = 0; v < dom.interior_count; ++v) {
        std::fill(density.begin(), density.end(), 1.0);
        for (int32_t s = dom.adj_offset[v]; s < dom.adj_offset[v + 1]; ++s) {
            Vertex w = dom.adj[s];
            double theta_w = state.angle_at(w);
            const KernelTable& tab = tables.for_edge(
                static_cast<size_t>(dom.edge_index[s]));
            if (fast) {
                // bin centers advance by an integer table stride
                double start = (0.5 * bin_width - theta_w) * (KernelTable::kSize / kTwoPi);
                start -= std::floor(start / KernelTable::kSize) * KernelTable::kSize;
                int base = static_cast<int>(start);
                double frac = start - base;
                const double* tabv = tab.data();
                const int mask = KernelTable::kSize - 1;
                int idx = base;
                for (int j = 0; j < M; ++j) {
                    int i0 = idx & mask;
                    density[static_cast<size_t>(j)] *=
                        tabv[i0] * (1.0 - frac) + tabv[i0 + 1] * frac;
                    idx += stride;
                }
            } else {
                for (int j = 0; j < M; ++j)
                    density[static_cast<size_t>(j)] *=
                        tab.at((j + 0.5) * bin_width - theta_w);
            }
        }
        double acc = 0.0;
        for (int j = 0; j < M; ++j) {
            acc += density[static_cast<size_t>(j)];
            cumulative[static_cast<size_t>(j)] = acc;
        }
        double u = rng.next_double() * acc;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        int j = static_cast<int>(it - cumulative.begin());
        if (j >= M) j = M - 1;
        double inner = rng.next_double();
        state.theta(v) = wrap_angle((j + inner) * bin_width);
    }
}

}  // namespace

VillainState gibbs_sample(const VillainState& state, int sweeps, Philox& rng, int bins) {
    if (sweeps < 0) throw std::invalid_argument("gibbs_sample: sweeps must be >= 0");
    if (bins < 8) throw std::invalid_argument("gibbs_sample: bins must be >= 8");
    VillainState out = state;
    if (sweeps == 0) return out;
    KernelTableSet tables(state.edge_t);
    std::vector<double> density, cumulative;
    for (int s = 0; s < sweeps; ++s)
        heat_bath_sweep(out, rng, tables, bins, density, cumulative);
    return out;
}

VillainClusters villain_clusters(const VillainState& state, const AvoidSet& S,
                                 Philox& rng) {
    const LatticeDomain& dom = *state.dom;
    VillainClusters out;
    out.edge_open.resize(dom.edges.size());
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        double p = edge_avoid_probability(state.edge_t(static_cast<Eigen::Index>(e)),
                                          state.angle_at(u), state.angle_at(v), S);
        out.edge_open[e] = rng.next_double() < p ? 1 : 0;
    }
    UnionFind uf(dom.vertex_count());
    for (size_t e = 0; e < dom.edges.size(); ++e)
        if (out.edge_open[e]) uf.unite(dom.edges[e][0], dom.edges[e][1]);
    out.labels.root.assign(static_cast<size_t>(dom.vertex_count()), -1);
    out.labels.size.assign(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v = 0; v < dom.vertex_count(); ++v) {
        out.labels.root[static_cast<size_t>(v)] = uf.find(v);
        ++out.labels.open_vertex_count;
    }
    for (Vertex v = 0; v < dom.vertex_count(); ++v)
        ++out.labels.size[static_cast<size_t>(out.labels.root[static_cast<size_t>(v)])];
    for (Vertex v = 0; v < dom.vertex_count(); ++v)
        if (out.labels.root[static_cast<size_t>(v)] == v) ++out.labels.cluster_count;
    return out;
}

Eigen::VectorXd ChainStats::mean() const {
    return replica_means.colwise().mean().transpose();
}

Eigen::MatrixXd ChainStats::covariance_of_mean() const {
    Eigen::Index r = replica_means.rows();
    Eigen::MatrixXd centered =
        replica_means.rowwise() - replica_means.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / double(r - 1);
    return cov / double(r);
}

double villain_autocorr_tau(const LatticeDomain& dom, const Eigen::VectorXd& edge_t,
                            int bins, uint64_t seed) {
    const int pilot = 1024;
    VillainState state(dom, edge_t);
    KernelTableSet tables(edge_t);
    Philox rng(seed, 0x7au);
    std::vector<double> density, cumulative, series;
    series.reserve(pilot);
    for (int s = 0; s < pilot; ++s) {
        heat_bath_sweep(state, rng, tables, bins, density, cumulative);
        series.push_back(state.theta.array().cos().mean());
    }
    int n = pilot / 2;  // discard the first half as burn-in
    double mean = 0.0;
    for (int i = n; i < pilot; ++i) mean += series[static_cast<size_t>(i)];
    mean /= n;
    double var = 0.0;
    for (int i = n; i < pilot; ++i) {
        double d = series[static_cast<size_t>(i)] - mean;
        var += d * d;
    }
    var /= n;
    if (var <= 0.0) return 1.0;
    double tau = 1.0;
    for (int lag = 1; lag < n / 4; ++lag) {
        double c = 0.0;
        for (int i = n; i < pilot - lag; ++i)
            c += (series[static_cast<size_t>(i)] - mean) *
                 (series[static_cast<size_t>(i + lag)] - mean);
        c /= (n - lag);
        double rho = c / var;
        if (rho < 0.05) break;
        tau += 2.0 * rho;
    }
    return tau;
}

ChainStats run_villain_observables(
    const LatticeDomain& dom, const Eigen::VectorXd& edge_t, const ChainPlan& plan,
    int obs_dim,
    const std::function<void(const VillainState&, Philox&, double*)>& observe) {
    if (plan.replicas < 2) throw std::invalid_argument("ChainPlan: replicas must be >= 2");
    if (plan.batch < 1 || plan.stride < 1)
        throw std::invalid_argument("ChainPlan: batch and stride must be >= 1");
    ChainStats stats;
    stats.tau_int = 0.0;
    int equil = plan.equil;
    if (equil <= 0) {
        stats.tau_int = villain_autocorr_tau(dom, edge_t, plan.bins, plan.seed);
        equil = static_cast<int>(std::ceil(10.0 * stats.tau_int));
    }
    stats.equil_sweeps = equil;

    RunPlan rp;
    rp.replicas = plan.replicas;
    rp.per_replica = 1;
    rp.seed = plan.seed;
    using Row = std::vector<double>;
    KernelTableSet tables(edge_t);
    auto per_replica = [&](int64_t, Philox& rng) -> Row {
        VillainState state(dom, edge_t);
        std::vector<double> density, cumulative;
        for (int s = 0; s < equil; ++s)
            heat_bath_sweep(state, rng, tables, plan.bins, density, cumulative);
        Row sums(static_cast<size_t>(obs_dim), 0.0);
        Row scratch(static_cast<size_t>(obs_dim), 0.0);
        for (int b = 0; b < plan.batch; ++b) {
            for (int s = 0; s < plan.stride; ++s)
                heat_bath_sweep(state, rng, tables, plan.bins, density, cumulative);
            std::fill(scratch.begin(), scratch.end(), 0.0);
            observe(state, rng, scratch.data());
            for (int i = 0; i < obs_dim; ++i)
                sums[static_cast<size_t>(i)] += scratch[static_cast<size_t>(i)];
        }
        for (double& v : sums) v /= plan.batch;
        return sums;
    };
    std::vector<Row> all(static_cast<size_t>(plan.replicas));
    detail::parallel_for_replicas(plan.replicas, [&](int64_t r) {
        Philox rng(plan.seed, static_cast<uint64_t>(r) + 1);
        all[static_cast<size_t>(r)] = per_replica(r, rng);
    });
    stats.replica_means.resize(plan.replicas, obs_dim);
    for (int64_t r = 0; r < plan.replicas; ++r)
        for (int i = 0; i < obs_dim; ++i)
            stats.replica_means(r, i) = all[static_cast<size_t>(r)][static_cast<size_t>(i)];
    return stats;
}

RatioEstimate correlation_ratio(const LatticeDomain& dom, double t, ChainPlan plan,
                                RatioMode mode, double alpha) {
    Eigen::VectorXd edge_t =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dom.edges.size()), t);
    Vertex x = dom.vertex_at({0, 0, 0});
    if (x < 0) throw std::invalid_argument("correlation_ratio: no center vertex");
    std::vector<char> layer(static_cast<size_t>(dom.vertex_count()), 0);
    for (Vertex v = dom.interior_count; v < dom.vertex_count(); ++v)
        layer[static_cast<size_t>(v)] = 1;

    AvoidSet s_i = AvoidSet::pm_i();
    AvoidSet s_xi = AvoidSet::pm_xi(alpha);
    AvoidSet s_xi_bar = AvoidSet::pm_xi_bar(alpha);

    auto observe = [&](const VillainState& state, Philox& rng, double* out) {
        if (mode == RatioMode::Cos) {
            out[0] = std::cos(state.theta(x));
            VillainClusters cl = villain_clusters(state, s_i, rng);
            out[1] = open_cluster_reaches(dom, cl.edge_open, x, layer) ? 1.0 : 0.0;
        } else {
            out[0] = std::cos(2.0 * state.theta(x));
            const LatticeDomain& d = *state.dom;
            std::vector<uint8_t> open1(d.edges.size()), open2(d.edges.size());
            std::vector<const AvoidSet*> sets{&s_xi, &s_xi_bar};
            for (size_t e = 0; e < d.edges.size(); ++e) {
                auto [u, v] = d.edges[e];
                uint32_t mask = joint_edge_indicator_mask(
                    state.edge_t(static_cast<Eigen::Index>(e)), state.angle_at(u),
                    state.angle_at(v), sets, rng);
                open1[e] = (mask & 1u) ? 1 : 0;
                open2[e] = (mask & 2u) ? 1 : 0;
            }
            bool c1 = open_cluster_reaches(dom, open1, x, layer);
            bool c2 = open_cluster_reaches(dom, open2, x, layer);
            out[1] = (c1 && c2) ? 1.0 : 0.0;
        }
    };
    ChainStats stats = run_villain_observables(dom, edge_t, plan, 2, observe);
    Eigen::VectorXd m = stats.mean();
    Eigen::MatrixXd cov = stats.covariance_of_mean();

    RatioEstimate out;
    out.seed = plan.seed;
    out.equil_sweeps = stats.equil_sweeps;
    out.tau_int = stats.tau_int;
    out.numerator = m(0);
    out.denominator = m(1);
    out.numerator_se = std::sqrt(std::max(0.0, cov(0, 0)));
    out.denominator_se = std::sqrt(std::max(0.0, cov(1, 1)));
    if (m(1) <= 3.0 * out.denominator_se) {
        out.defined = false;
        return out;
    }
    out.ratio = m(0) / m(1);
    double g0 = 1.0 / m(1);
    double g1 = -m(0) / (m(1) * m(1));
    double var = g0 * g0 * cov(0, 0) + 2.0 * g0 * g1 * cov(0, 1) + g1 * g1 * cov(1, 1);
    out.stderr_ = std::sqrt(std::max(0.0, var));
    double z = normal_quantile(0.975);
    out.lo = out.ratio - z * out.stderr_;
    out.hi = out.ratio + z * out.stderr_;
    return out;
}

std::vector<VillainScanRow> villain_iic_scan(const std::vector<int>& ns,
                                             const CylinderEvent& event,
                                             const std::vector<double>& alphas,
                                             double t, ChainPlan plan, int R_max) {
    if (ns.empty()) throw std::invalid_argument("villain_iic_scan: no box sizes");
    if (alphas.empty()) throw std::invalid_argument("villain_iic_scan: no alpha schedule");
    std::vector<VillainScanRow> rows;
    AvoidSet s_i = AvoidSet::pm_i();
    for (size_t ni = 0; ni < ns.size(); ++ni) {
        int n = ns[ni];
        LatticeDomain dom = build_box(2, n, Metric::LInf);
        Eigen::VectorXd edge_t =
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dom.edges.size()), t);
        Vertex x = dom.vertex_at({0, 0, 0});
        int reach = R_max > 0 ? std::min(R_max, n) : n;
        std::vector<char> target(static_cast<size_t>(dom.vertex_count()), 0);
        for (Vertex v : region_vertices(dom, RegionSpec::boundary({0, 0, 0}, reach)))
            target[static_cast<size_t>(v)] = 1;

        std::vector<AvoidSet> s1s, s2s;
        for (double a : alphas) {
            s1s.push_back(AvoidSet::pm_xi(a));
            s2s.push_back(AvoidSet::pm_xi_bar(a));
        }
        // observables: per sample we record, for column A, (accept, accept&event)
        // and for each alpha the same pair under the joint conditioning.
        int dim = 2 + 2 * static_cast<int>(alphas.size());
        ChainPlan local = plan;
        local.seed = plan.seed + ni * 1000003;
        auto observe = [&](const VillainState& state, Philox& rng, double* out) {
            const LatticeDomain& d = *state.dom;
            std::vector<std::vector<uint8_t>> open(1 + 2 * alphas.size());
            for (auto& o : open) o.resize(d.edges.size());
            std::vector<const AvoidSet*> sets;
            sets.push_back(&s_i);
            for (size_t a = 0; a < alphas.size(); ++a) {
                sets.push_back(&s1s[a]);
                sets.push_back(&s2s[a]);
            }
            for (size_t e = 0; e < d.edges.size(); ++e) {
                auto [u, v] = d.edges[e];
                uint32_t mask = joint_edge_indicator_mask(
                    state.edge_t(static_cast<Eigen::Index>(e)), state.angle_at(u),
                    state.angle_at(v), sets, rng);
                for (size_t k = 0; k < open.size(); ++k)
                    open[k][e] = (mask & (1u << k)) ? 1 : 0;
            }
            bool ev = eval_cylinder_event_edges(d, open[0], event);
            bool acc_a = open_cluster_reaches(d, open[0], x, target);
            out[0] = acc_a ? 1.0 : 0.0;
            out[1] = (acc_a && ev) ? 1.0 : 0.0;
            for (size_t a = 0; a < alphas.size(); ++a) {
                bool c1 = open_cluster_reaches(d, open[1 + 2 * a], x, target);
                bool c2 = open_cluster_reaches(d, open[2 + 2 * a], x, target);
                bool acc_b = c1 && c2;
                out[2 + 2 * a] = acc_b ? 1.0 : 0.0;
                out[3 + 2 * a] = (acc_b && ev) ? 1.0 : 0.0;
            }
        };
        ChainStats stats = run_villain_observables(dom, edge_t, local, dim, observe);
        Eigen::VectorXd m = stats.mean();
        Eigen::MatrixXd cov = stats.covariance_of_mean();

        auto conditional = [&](int acc_idx, int joint_idx, double alpha_tag) {
            VillainScanColumn col;
            col.alpha = alpha_tag;
            col.ce.h = t;
            col.ce.event = event.describe();
            col.ce.conditioning = "reach-" + std::to_string(reach);
            double pa = m(acc_idx);
            double pj = m(joint_idx);
            col.ce.acceptance_rate = pa;
            col.ce.defined = pa > 0.0;
            if (!col.ce.defined) return col;
            double ratio = pj / pa;
            // delta method on the ratio of means with replica-level covariance
            double g0 = 1.0 / pa;
            double g1 = -pj / (pa * pa);
            double var = g0 * g0 * cov(joint_idx, joint_idx) +
                         2.0 * g0 * g1 * cov(joint_idx, acc_idx) +
                         g1 * g1 * cov(acc_idx, acc_idx);
            Estimate est;
            est.id = "villain_conditional";
            est.value = ratio;
            est.stderr_ = std::sqrt(std::max(0.0, var));
            est.n = plan.replicas * plan.batch;
            est.seed = local.seed;
            double z = normal_quantile(0.975);
            est.lo = std::max(0.0, ratio - z * est.stderr_);
            est.hi = std::min(1.0, ratio + z * est.stderr_);
            col.ce.estimate = est;
            return col;
        };

        VillainScanRow row;
        row.n = n;
        row.column_a = conditional(0, 1, 0.0);
        for (size_t a = 0; a < alphas.size(); ++a)
            row.column_b.push_back(conditional(2 + 2 * static_cast<int>(a),
                                               3 + 2 * static_cast<int>(a), alphas[a]));
        if (row.column_a.ce.defined && row.column_b.back().ce.defined) {
            const auto& ea = row.column_a.ce.estimate;
            const auto& eb = row.column_b.back().ce.estimate;
            row.diff_terminal = std::abs(ea.value - eb.value);
            row.diff_sigma =
                std::sqrt(ea.stderr_ * ea.stderr_ + eb.stderr_ * eb.stderr_);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace cableperc
