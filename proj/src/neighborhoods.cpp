#include "dcm/neighborhoods.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcm/kd_tree.hpp"
#include "dcm/rng.hpp"

namespace dcm {

EdgeSet knn_graph(const Points& points, Index k) {
    const auto n = static_cast<Index>(points.rows());
    if (k < 1 || k >= n)
        throw ConfigError("knn_graph: k=" + std::to_string(k) + " needs 1 <= k < point count (" + std::to_string(n) + ")");
    const KdTree<double> tree(points);
    std::vector<Index> offsets(n + 1);
    std::vector<Index> targets;
    targets.reserve(static_cast<std::size_t>(n) * k);
    for (Index i = 0; i < n; ++i) {
        for (const auto& [d2, j] : tree.knn(points.row(i).data(), k, i)) targets.push_back(j);
        offsets[i + 1] = static_cast<Index>(targets.size());
    }
    return EdgeSet(std::move(offsets), std::move(targets));
}

EdgeSet radius_graph(const Points& points, double r) {
    if (!(r > 0.0)) throw ConfigError("radius_graph: radius must be positive");
    const auto n = static_cast<Index>(points.rows());
    const KdTree<double> tree(points);
    std::vector<Index> offsets(n + 1);
    std::vector<Index> targets;
    for (Index i = 0; i < n; ++i) {
        bool any = false;
        for (Index j : tree.radius(points.row(i).data(), r)) {
            if (j == i) continue;
            targets.push_back(j);
            any = true;
        }
        if (!any) targets.push_back(i);
        offsets[i + 1] = static_cast<Index>(targets.size());
    }
    return EdgeSet(std::move(offsets), std::move(targets));
}

double sampling_probability(Index n, Index threshold) {
    if (threshold < 1) throw ConfigError("sampling threshold T must be >= 1");
    if (n <= threshold) return 1.0;
    const double exponent = -1.0 / std::log2(static_cast<double>(threshold) + 1.0);
    return std::pow(static_cast<double>(n - (threshold - 1)), exponent);
}

EdgeSet res_sample(const EdgeSet& edges, Index threshold, std::uint64_t seed, ResFallback fallback) {
    if (threshold < 1) throw ConfigError("sampling threshold T must be >= 1");
    const Index n = edges.vertex_count();
    std::vector<Index> offsets(n + 1);
    std::vector<Index> targets;
    targets.reserve(edges.edge_count());
    for (Index i = 0; i < n; ++i) {
        const auto nb = edges.neighbors(i);
        const auto size = static_cast<Index>(nb.size());
        if (size <= threshold) {
            targets.insert(targets.end(), nb.begin(), nb.end());
        } else {
            const double p = sampling_probability(size, threshold);
            CounterRng rng(seed, static_cast<std::uint64_t>(i));
            const auto before = targets.size();
            for (Index j : nb) {
                if (rng.uniform() < p) targets.push_back(j);
            }
            if (targets.size() == before) {
                targets.push_back(fallback == ResFallback::SelfLoop ? i : nb[rng.below(nb.size())]);
            }
        }
        offsets[i + 1] = static_cast<Index>(targets.size());
    }
    return EdgeSet(std::move(offsets), std::move(targets));
}

void NeighborhoodConfig::validate() const {
    if (kind == Kind::Knn && k < 1) throw ConfigError("knn neighborhood needs k >= 1");
    if (kind == Kind::Radius && !(radius > 0.0)) throw ConfigError("radius neighborhood needs r > 0");
    if (res_threshold && *res_threshold < 1) throw ConfigError("RES threshold T must be >= 1");
}

std::string NeighborhoodConfig::describe() const {
    std::ostringstream out;
    switch (kind) {
        case Kind::Geodesic: out << "geodesic"; break;
        case Kind::Knn: out << "knn(" << k << ")"; break;
        case Kind::Radius: out << "radius(" << radius << ")"; break;
    }
    if (res_threshold) out << " T=" << *res_threshold;
    return out.str();
}

std::vector<double> default_radii(Index level_count) {
    std::vector<double> radii;
    double r = 0.05;
    for (Index l = 0; l < level_count; ++l, r *= 2.0) radii.push_back(r);
    return radii;
}

void attach_euclidean_edges(Hierarchy& hierarchy, const std::vector<NeighborhoodConfig>& per_level) {
    if (per_level.empty()) throw ConfigError("no Euclidean neighborhood configured");
    hierarchy.euclidean_edges.clear();
    for (Index l = 0; l < hierarchy.level_count(); ++l) {
        NeighborhoodConfig cfg = per_level[std::min<std::size_t>(l, per_level.size() - 1)];
        if (static_cast<std::size_t>(l) >= per_level.size() && cfg.kind == NeighborhoodConfig::Kind::Radius)
            cfg.radius *= std::pow(2.0, static_cast<double>(l - static_cast<Index>(per_level.size()) + 1));
        cfg.validate();
        const Points& pts = hierarchy.levels[l].positions;
        switch (cfg.kind) {
            case NeighborhoodConfig::Kind::Geodesic:
                hierarchy.euclidean_edges.push_back(hierarchy.geodesic_edges[l]);
                break;
            case NeighborhoodConfig::Kind::Knn: {
                const Index k = std::min<Index>(cfg.k, static_cast<Index>(pts.rows()) - 1);
                hierarchy.euclidean_edges.push_back(
                    k >= 1 ? knn_graph(pts, k) : with_self_loop_fallback(EdgeSet(std::vector<std::vector<Index>>(pts.rows()))));
                break;
            }
            case NeighborhoodConfig::Kind::Radius:
                hierarchy.euclidean_edges.push_back(radius_graph(pts, cfg.radius));
                break;
        }
    }
}

DegreeStats degree_stats(const EdgeSet& edges) {
    DegreeStats s;
    s.vertices = edges.vertex_count();
    s.edges = edges.edge_count();
    if (s.vertices == 0) return s;
    s.min_degree = edges.degree(0);
    for (Index i = 0; i < s.vertices; ++i) {
        s.min_degree = std::min(s.min_degree, edges.degree(i));
        s.max_degree = std::max(s.max_degree, edges.degree(i));
        for (Index j : edges.neighbors(i)) s.self_loops += (i == j);
    }
    s.mean_degree = static_cast<double>(s.edges) / s.vertices;
    return s;
}

}  // namespace dcm
