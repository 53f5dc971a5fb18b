#include "cableperc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cableperc {

namespace {

uint64_t pack(const Coord& c) {
    auto u = [](int x) { return static_cast<uint64_t>(static_cast<uint32_t>(x + (1 << 20))); };
    return (u(c[0]) << 42) ^ (u(c[1]) << 21) ^ u(c[2]);
}

int linf(const Coord& a, const Coord& b) {
    int m = 0;
    for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

int l1(const Coord& a, const Coord& b) {
    int s = 0;
    for (int i = 0; i < 3; ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace

Metric metric_from_string(const std::string& s) {
    if (s == "ell-infinity" || s == "linf") return Metric::LInf;
    if (s == "ell-one" || s == "l1") return Metric::L1;
    throw std::invalid_argument("unknown metric: " + s);
}

std::string metric_to_string(Metric m) {
    return m == Metric::LInf ? "ell-infinity" : "ell-one";
}

Vertex LatticeDomain::vertex_at(const Coord& c) const {
    auto it = index_.find(pack(c));
    return it == index_.end() ? -1 : it->second;
}

int LatticeDomain::dist(const Coord& a, const Coord& b) const {
    if (kind == Kind::Slab) return l1(a, b);
    return metric == Metric::LInf ? linf(a, b) : l1(a, b);
}

void LatticeDomain::finalize() {
    index_.reserve(coords.size() * 2);
    for (Vertex v = 0; v < vertex_count(); ++v) index_.emplace(pack(coords[v]), v);

    // collect edges: every lattice-adjacent pair with at least one interior
    // endpoint (the Dirichlet layer is not interconnected)
    edges.clear();
    for (Vertex v = 0; v < interior_count; ++v) {
        Coord c = coords[v];
        for (int axis = 0; axis < d; ++axis) {
            for (int dir : {-1, 1}) {
                Coord nb = c;
                nb[axis] += dir;
                Vertex w = vertex_at(nb);
                if (w < 0) continue;
                if (w > v || !is_interior(w)) edges.push_back({v, w});
            }
        }
    }
    for (auto& e : edges)
        if (e[0] > e[1]) std::swap(e[0], e[1]);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    Vertex nv = vertex_count();
    adj_offset.assign(static_cast<size_t>(nv) + 1, 0);
    for (const auto& e : edges) {
        ++adj_offset[e[0] + 1];
        ++adj_offset[e[1] + 1];
    }
    for (Vertex v = 0; v < nv; ++v) adj_offset[v + 1] += adj_offset[v];
    adj.assign(static_cast<size_t>(adj_offset[nv]), -1);
    edge_index.assign(adj.size(), -1);
    std::vector<int32_t> cursor(adj_offset.begin(), adj_offset.end() - 1);
    for (size_t i = 0; i < edges.size(); ++i) {
        auto [u, v] = edges[i];
        adj[cursor[u]] = v;
        edge_index[cursor[u]++] = static_cast<int32_t>(i);
        adj[cursor[v]] = u;
        edge_index[cursor[v]++] = static_cast<int32_t>(i);
    }
}

LatticeDomain build_box(int d, int n, Metric metric) {
    if (d < 2 || d > 3) throw std::invalid_argument("build_box: d must be 2 or 3");
    if (n < 1) throw std::invalid_argument("build_box: n must be >= 1");

    LatticeDomain dom;
    dom.d = d;
    dom.metric = metric;
    dom.kind = LatticeDomain::Kind::Box;
    dom.box_halfwidth = n;

    const Coord origin{0, 0, 0};
    const int zlo = d == 3 ? -(n + 1) : 0;
    const int zhi = d == 3 ? n + 1 : 0;
    std::vector<Coord> interior, boundary;
    for (int x = -(n + 1); x <= n + 1; ++x)
        for (int y = -(n + 1); y <= n + 1; ++y)
            for (int z = zlo; z <= zhi; ++z) {
                Coord c{x, y, z};
                int r = metric == Metric::LInf ? linf(c, origin) : l1(c, origin);
                if (r <= n) {
                    interior.push_back(c);
                } else if (r == n + 1) {
                    // keep only layer vertices adjacent to the interior
                    bool touches = false;
                    for (int axis = 0; axis < d && !touches; ++axis)
                        for (int dir : {-1, 1}) {
                            Coord nb = c;
                            nb[axis] += dir;
                            int rn = metric == Metric::LInf ? linf(nb, origin) : l1(nb, origin);
                            if (rn <= n) {
                                touches = true;
                                break;
                            }
                        }
                    if (touches) boundary.push_back(c);
                }
            }
    dom.coords = interior;
    dom.interior_count = static_cast<Vertex>(interior.size());
    dom.coords.insert(dom.coords.end(), boundary.begin(), boundary.end());
    dom.finalize();
    return dom;
}

LatticeDomain build_slab(int k, int L) {
    if (k < 0) throw std::invalid_argument("build_slab: k must be >= 0");
    if (L < 1) throw std::invalid_argument("build_slab: L must be >= 1");

    LatticeDomain dom;
    dom.d = 3;
    dom.metric = Metric::L1;
    dom.kind = LatticeDomain::Kind::Slab;
    dom.slab_thickness = k;
    dom.slab_halflength = L;

    // Longitudinal ends are Dirichlet; transverse faces are free. The slab
    // graph uses only the two live axes, so interior degree varies.
    std::vector<Coord> interior, boundary;
    for (int x = -(L + 1); x <= L + 1; ++x)
        for (int y = 0; y <= k; ++y) {
            Coord c{x, y, 0};
            if (std::abs(x) <= L)
                interior.push_back(c);
            else
                boundary.push_back(c);
        }
    dom.coords = interior;
    dom.interior_count = static_cast<Vertex>(interior.size());
    dom.coords.insert(dom.coords.end(), boundary.begin(), boundary.end());
    // edge collection walks axes 0..d-1; the slab only has axes 0,1 live and
    // the y-neighbors of boundary-end vertices are absent anyway, so reuse
    // the generic pass with d = 2 axes
    int saved = dom.d;
    dom.d = 2;
    dom.finalize();
    dom.d = saved;
    return dom;
}

LatticeDomain build_explicit_domain(int d, const std::vector<Coord>& interior,
                                    Metric metric) {
    if (d < 2 || d > 3) throw std::invalid_argument("build_explicit_domain: d must be 2 or 3");
    if (interior.empty())
        throw std::invalid_argument("build_explicit_domain: empty interior");
    LatticeDomain dom;
    dom.d = d;
    dom.metric = metric;
    dom.kind = LatticeDomain::Kind::Explicit;
    std::unordered_map<uint64_t, char> seen;
    for (const Coord& c : interior) {
        if (d == 2 && c[2] != 0)
            throw std::invalid_argument("build_explicit_domain: d=2 needs zero third axis");
        if (!seen.emplace(pack(c), 1).second)
            throw std::invalid_argument("build_explicit_domain: duplicate vertex");
    }
    dom.coords = interior;
    dom.interior_count = static_cast<Vertex>(interior.size());
    std::vector<Coord> layer;
    for (const Coord& c : interior)
        for (int axis = 0; axis < d; ++axis)
            for (int dir : {-1, 1}) {
                Coord nb = c;
                nb[axis] += dir;
                if (seen.emplace(pack(nb), 1).second) layer.push_back(nb);
            }
    std::sort(layer.begin(), layer.end());
    dom.coords.insert(dom.coords.end(), layer.begin(), layer.end());
    dom.finalize();
    return dom;
}

nlohmann::json LatticeDomain::descriptor() const {
    nlohmann::json j;
    j["d"] = d;
    j["metric"] = metric_to_string(metric);
    if (kind == Kind::Box) {
        j["n"] = box_halfwidth;
    } else if (kind == Kind::Slab) {
        j["k"] = slab_thickness;
        j["L"] = slab_halflength;
    } else {
        nlohmann::json vs = nlohmann::json::array();
        for (Vertex v = 0; v < interior_count; ++v)
            vs.push_back({coords[v][0], coords[v][1], coords[v][2]});
        j["interior"] = vs;
    }
    return j;
}

LatticeDomain domain_from_descriptor(const nlohmann::json& j) {
    if (j.contains("n")) {
        Metric m = j.contains("metric") ? metric_from_string(j["metric"].get<std::string>())
                                        : Metric::LInf;
        return build_box(j["d"].get<int>(), j["n"].get<int>(), m);
    }
    if (j.contains("k") && j.contains("L"))
        return build_slab(j["k"].get<int>(), j["L"].get<int>());
    if (j.contains("interior")) {
        std::vector<Coord> interior;
        for (const auto& v : j["interior"])
            interior.push_back({v[0].get<int>(), v[1].get<int>(), v[2].get<int>()});
        Metric m = j.contains("metric") ? metric_from_string(j["metric"].get<std::string>())
                                        : Metric::LInf;
        return build_explicit_domain(j["d"].get<int>(), interior, m);
    }
    throw std::invalid_argument("domain descriptor needs n, (k, L), or interior");
}

void RegionSpec::validate(const LatticeDomain& dom) const {
    switch (tag) {
        case Tag::Box:
        case Tag::Boundary:
            if (n < 0) throw std::invalid_argument("region: radius must be nonnegative");
            if (dom.vertex_at(center) < 0)
                throw std::invalid_argument("region: center outside domain");
            break;
        case Tag::Annulus:
            if (m < 0 || n < 0 || m > n)
                throw std::invalid_argument("region: need 0 <= m <= n");
            if (dom.vertex_at(center) < 0)
                throw std::invalid_argument("region: center outside domain");
            break;
        case Tag::Explicit:
            for (Vertex v : vertices)
                if (v < 0 || v >= dom.vertex_count())
                    throw std::invalid_argument("region: vertex outside domain");
            break;
        case Tag::DirichletLayer:
            break;
    }
}

std::vector<Vertex> region_vertices(const LatticeDomain& dom, const RegionSpec& spec) {
    spec.validate(dom);
    std::vector<Vertex> out;
    switch (spec.tag) {
        case RegionSpec::Tag::Explicit:
            out = spec.vertices;
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        case RegionSpec::Tag::DirichletLayer:
            for (Vertex v = dom.interior_count; v < dom.vertex_count(); ++v) out.push_back(v);
            return out;
        default:
            break;
    }
    for (Vertex v = 0; v < dom.vertex_count(); ++v) {
        int r = dom.dist(spec.center, dom.coord(v));
        bool in = false;
        if (spec.tag == RegionSpec::Tag::Box) in = r <= spec.n;
        if (spec.tag == RegionSpec::Tag::Boundary) in = r == spec.n;
        if (spec.tag == RegionSpec::Tag::Annulus) in = r >= spec.m && r <= spec.n;
        if (in) out.push_back(v);
    }
    return out;
}

}  // namespace cableperc
