#include "cableperc/gff.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cableperc {

HeightSchedule::HeightSchedule(std::vector<double> hs) : heights(std::move(hs)) {
    if (heights.empty()) throw std::invalid_argument("HeightSchedule: empty");
    for (size_t i = 0; i < heights.size(); ++i) {
        if (heights[i] < 0.0)
            throw std::invalid_argument("HeightSchedule: heights must be nonnegative");
        if (i > 0 && heights[i] >= heights[i - 1])
            throw std::invalid_argument("HeightSchedule: heights must be strictly decreasing");
    }
}

FieldSampler FieldSampler::make(const LatticeDomain& dom) {
    if (dom.kind == LatticeDomain::Kind::Box && dom.metric == Metric::LInf)
        return spectral(dom);
    return dense(dom, green(dom));
}

FieldSampler FieldSampler::dense(const LatticeDomain& dom, const GreenMatrix& G) {
    FieldSampler s;
    s.dom_ = &dom;
    s.spectral_ = false;
    s.chol_lower_ = G.chol_lower;
    return s;
}

FieldSampler FieldSampler::spectral(const LatticeDomain& dom) {
    if (dom.kind != LatticeDomain::Kind::Box || dom.metric != Metric::LInf)
        throw std::invalid_argument("spectral sampler requires an ell-infinity box");
    FieldSampler s;
    s.dom_ = &dom;
    s.spectral_ = true;
    int M = 2 * dom.box_halfwidth + 1;
    s.grid_ = M;
    s.sine_.resize(M, M);
    double norm = std::sqrt(2.0 / (M + 1));
    for (int x = 0; x < M; ++x)
        for (int k = 0; k < M; ++k)
            s.sine_(x, k) = norm * std::sin(M_PI * (x + 1.0) * (k + 1.0) / (M + 1));
    auto axis_eig = [&](int k) { return 2.0 - 2.0 * std::cos(M_PI * (k + 1.0) / (M + 1)); };
    int d = dom.d;
    if (d == 2) {
        s.mode_scale_.resize(static_cast<Eigen::Index>(M) * M);
        for (int k1 = 0; k1 < M; ++k1)
            for (int k2 = 0; k2 < M; ++k2)
                s.mode_scale_(static_cast<Eigen::Index>(k1) * M + k2) =
                    std::sqrt(2.0 * d / (axis_eig(k1) + axis_eig(k2)));
    } else {
        s.mode_scale_.resize(static_cast<Eigen::Index>(M) * M * M);
        for (int k1 = 0; k1 < M; ++k1)
            for (int k2 = 0; k2 < M; ++k2)
                for (int k3 = 0; k3 < M; ++k3)
                    s.mode_scale_((static_cast<Eigen::Index>(k1) * M + k2) * M + k3) =
                        std::sqrt(2.0 * d /
                                  (axis_eig(k1) + axis_eig(k2) + axis_eig(k3)));
    }
    return s;
}

Eigen::VectorXd FieldSampler::sample(Philox& rng) const {
    if (!spectral_) {
        Eigen::VectorXd z(chol_lower_.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
        return chol_lower_ * z;
    }
    const int M = grid_;
    Eigen::VectorXd coef(mode_scale_.size());
    for (Eigen::Index i = 0; i < coef.size(); ++i)
        coef(i) = mode_scale_(i) * rng.next_normal();
    using RowMat =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (dom_->d == 2) {
        Eigen::Map<RowMat> C(coef.data(), M, M);
        Eigen::VectorXd out(static_cast<Eigen::Index>(M) * M);
        Eigen::Map<RowMat> V(out.data(), M, M);
        V = sine_ * C * sine_.transpose();
        return out;
    }
    // d = 3: contract one axis at a time on the flattened tensor
    Eigen::VectorXd buf1(coef.size()), buf2(coef.size());
    {   // axis 3 (fastest index)
        Eigen::Map<RowMat> in(coef.data(), static_cast<Eigen::Index>(M) * M, M);
        Eigen::Map<RowMat> out(buf1.data(), static_cast<Eigen::Index>(M) * M, M);
        out = in * sine_.transpose();
    }
    {   // axis 2: per leading slab
        for (int i = 0; i < M; ++i) {
            Eigen::Map<RowMat> in(buf1.data() + static_cast<Eigen::Index>(i) * M * M, M, M);
            Eigen::Map<RowMat> out(buf2.data() + static_cast<Eigen::Index>(i) * M * M, M, M);
            out = sine_ * in;
        }
    }
    {   // axis 1 (slowest index)
        Eigen::Map<RowMat> in(buf2.data(), M, static_cast<Eigen::Index>(M) * M);
        Eigen::Map<RowMat> out(buf1.data(), M, static_cast<Eigen::Index>(M) * M);
        out = sine_ * in;
    }
    return buf1;
}

Eigen::MatrixXd FieldSampler::spectral_covariance() const {
    if (!spectral_) throw std::logic_error("spectral_covariance: dense backend");
    const int M = grid_;
    const int d = dom_->d;
    Eigen::Index n = dom_->interior_count;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd mode(n);
    for (Eigen::Index k = 0; k < mode_scale_.size(); ++k) {
        int k3 = static_cast<int>(k) % M;
        int k2 = (static_cast<int>(k) / M) % M;
        int k1 = static_cast<int>(k) / (M * M);
        for (Eigen::Index x = 0; x < n; ++x) {
            int x3 = static_cast<int>(x) % M;
            int x2 = (static_cast<int>(x) / M) % M;
            int x1 = static_cast<int>(x) / (M * M);
            double b = d == 2 ? sine_(x2, k2) * sine_(x3, k3)
                              : sine_(x1, k1) * sine_(x2, k2) * sine_(x3, k3);
            mode(x) = mode_scale_(k) * b;
        }
        cov += mode * mode.transpose();
    }
    return cov;
}

Eigen::VectorXd sample_field(const LatticeDomain& dom, const GreenMatrix& G,
                             uint64_t seed) {
    Philox rng(seed, 0);
    Eigen::VectorXd z(G.chol_lower.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
    return G.chol_lower * z;
}

double bridge_open_probability(double a, double b, double h, int d) {
    if (d < 2) throw std::invalid_argument("bridge_open_probability: d must be >= 2");
    if (a < h || b < h) return 0.0;
    return 1.0 - std::exp(-(a - h) * (b - h) / d);
}

double bridge_oracle_bias_band(double a, double b, double h, int d, int steps) {
    if (a < h || b < h) return 0.0;
    // density of the bridge minimum at the level, from the closed-form law
    double fmin = std::exp(-(a - h) * (b - h) / d) * ((a - h) + (b - h)) / d;
    const double beta = 0.5826;  // -zeta(1/2)/sqrt(2 pi)
    return 1.3 * beta * std::sqrt(2.0 * d / static_cast<double>(steps)) * fmin;
}

Estimate bridge_oracle(double a, double b, double h, int d, int steps,
                       int64_t reps, uint64_t seed) {
    if (steps < 64) throw std::invalid_argument("bridge_oracle: steps must be >= 64");
    if (reps < 1) throw std::invalid_argument("bridge_oracle: reps must be >= 1");
    if (a < h || b < h) return bernoulli_estimate("bridge_oracle", 0, reps, seed);

    const double sigma2 = 2.0 * d;
    const double dt = 1.0 / steps;
    RunPlan plan;
    plan.replicas = std::min<int64_t>(reps, 256);
    plan.per_replica = (reps + plan.replicas - 1) / plan.replicas;
    plan.seed = seed;
    auto trial = [&](Philox& rng) -> bool {
        // centered bridge W on the grid, W(0) = W(1) = 0
        double w = 0.0;
        for (int i = 1; i < steps; ++i) {
            double r_prev = (i - 1) * dt;
            double r = i * dt;
            double shrink = (1.0 - r) / (1.0 - r_prev);
            double var = sigma2 * dt * shrink;
            w = w * shrink + std::sqrt(var) * rng.next_normal();
            double path = a * (1.0 - r) + b * r + w;
            if (path < h) return false;
        }
        return true;
    };
    return run_bernoulli(plan, "bridge_oracle", trial);
}

FieldSample extend_level_set(const LatticeDomain& dom, const Eigen::VectorXd& values,
                             double h, Philox& rng) {
    if (values.size() != dom.interior_count)
        throw std::invalid_argument("extend_level_set: values not drawn on this domain");
    FieldSample s;
    s.dom = &dom;
    s.values = values;
    s.h = h;
    s.edge_open.resize(dom.edges.size());
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        double p = bridge_open_probability(s.value_at(u), s.value_at(v), h, dom.d);
        s.edge_open[e] = rng.next_double() < p ? 1 : 0;
    }
    return s;
}

FieldSample extend_level_set(const LatticeDomain& dom, const Eigen::VectorXd& values,
                             double h, uint64_t seed) {
    Philox rng(seed, 0);
    FieldSample s = extend_level_set(dom, values, h, rng);
    s.seed = seed;
    return s;
}

std::vector<FieldSample> extend_level_set_coupled(const LatticeDomain& dom,
                                                  const Eigen::VectorXd& values,
                                                  const HeightSchedule& schedule,
                                                  Philox& rng) {
    if (values.size() != dom.interior_count)
        throw std::invalid_argument("extend_level_set_coupled: values not on this domain");
    std::vector<FieldSample> out(schedule.size());
    for (size_t i = 0; i < schedule.size(); ++i) {
        out[i].dom = &dom;
        out[i].values = values;
        out[i].h = schedule.heights[i];
        out[i].edge_open.resize(dom.edges.size());
    }
    for (size_t e = 0; e < dom.edges.size(); ++e) {
        auto [u, v] = dom.edges[e];
        double uni = rng.next_double();
        for (size_t i = 0; i < schedule.size(); ++i) {
            double p = bridge_open_probability(out[i].value_at(u), out[i].value_at(v),
                                               schedule.heights[i], dom.d);
            out[i].edge_open[e] = uni < p ? 1 : 0;
        }
    }
    return out;
}

void dump_field_csv(const FieldSample& sample, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_field_csv: cannot open " + path);
    out << "# seed=" << sample.seed << " h=" << sample.h << "\n";
    out << "vertex,value\n";
    for (Vertex v = 0; v < sample.dom->vertex_count(); ++v)
        out << v << "," << sample.value_at(v) << "\n";
    out << "edge_u,edge_v,open\n";
    for (size_t e = 0; e < sample.dom->edges.size(); ++e)
        out << sample.dom->edges[e][0] << "," << sample.dom->edges[e][1] << ","
            << static_cast<int>(sample.edge_open[e]) << "\n";
}

}  // namespace cableperc
