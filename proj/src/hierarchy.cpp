#include "dcm/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <unordered_map>

#include <Eigen/Geometry>

#include "dcm/kd_tree.hpp"
#include "dcm/quadric.hpp"

namespace dcm {

void PoolingTraceMap::validate() const {
    std::vector<bool> hit(std::max<Index>(coarse_count, 0), false);
    for (Index i = 0; i < fine_count(); ++i) {
        const Index c = assignment[i];
        if (c < 0 || c >= coarse_count)
            throw ValidationError("trace maps fine vertex " + std::to_string(i) + " to coarse index " +
                                  std::to_string(c) + " outside [0," + std::to_string(coarse_count) + ")");
        hit[c] = true;
    }
    for (Index c = 0; c < coarse_count; ++c) {
        if (!hit[c]) throw ValidationError("trace is not surjective: coarse vertex " + std::to_string(c) + " has no preimage");
    }
}

std::vector<std::vector<Index>> PoolingTraceMap::preimages() const {
    std::vector<std::vector<Index>> groups(coarse_count);
    for (Index i = 0; i < fine_count(); ++i) groups[assignment[i]].push_back(i);
    return groups;
}

PoolingTraceMap PoolingTraceMap::identity(Index n) {
    PoolingTraceMap t;
    t.assignment.resize(n);
    for (Index i = 0; i < n; ++i) t.assignment[i] = i;
    t.coarse_count = n;
    return t;
}

EdgeSet induced_edges(const EdgeSet& fine, const PoolingTraceMap& trace) {
    std::vector<std::vector<Index>> lists(trace.coarse_count);
    for (Index i = 0; i < fine.vertex_count(); ++i) {
        const Index a = trace.assignment[i];
        for (Index j : fine.neighbors(i)) {
            const Index b = trace.assignment[j];
            if (a == b) continue;
            lists[a].push_back(b);
            lists[b].push_back(a);
        }
    }
    for (auto& list : lists) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return EdgeSet(lists);
}

Index majority_label(std::span<const Index> labels) {
    std::map<Index, Index> votes;
    for (Index l : labels) {
        if (l != kUnlabeled) ++votes[l];
    }
    Index best = kUnlabeled;
    Index best_count = 0;
    for (const auto& [label, count] : votes) {  // ascending label: ties keep the lower class
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    }
    return best;
}

void aggregate_attributes(const Mesh& fine, const PoolingTraceMap& trace, Mesh& coarse) {
    const Index m = trace.coarse_count;
    if (fine.colors) {
        FeatureMatrix c = pool_features<double>(*fine.colors, trace, PoolMode::Mean);
        coarse.colors = Points(c);
    } else {
        coarse.colors.reset();
    }
    if (fine.normals) {
        Points nrm = pool_features<double>(*fine.normals, trace, PoolMode::Mean);
        for (Index c = 0; c < m; ++c) {
            const double len = nrm.row(c).norm();
            if (len > 1e-12) {
                nrm.row(c) /= len;
            } else {
                nrm.row(c) << 0.0, 0.0, 1.0;
            }
        }
        coarse.normals = nrm;
    } else {
        coarse.normals.reset();
    }
    if (fine.labels) {
        std::vector<std::vector<Index>> group_labels(m);
        for (Index i = 0; i < trace.fine_count(); ++i) group_labels[trace.assignment[i]].push_back((*fine.labels)(i));
        Labels out(m);
        for (Index c = 0; c < m; ++c) out(c) = majority_label(group_labels[c]);
        coarse.labels = out;
    } else {
        coarse.labels.reset();
    }
}

namespace {

/// Faces mapped through the trace; degenerate faces are dropped and repeated
/// faces (same vertex set) keep only their first occurrence.
Faces map_faces(const Faces& faces, const std::vector<Index>& map) {
    std::set<std::array<Index, 3>> seen;
    std::vector<Index> out;
    for (Index f = 0; f < faces.rows(); ++f) {
        const Index a = map[faces(f, 0)], b = map[faces(f, 1)], c = map[faces(f, 2)];
        if (a == b || b == c || a == c) continue;
        std::array<Index, 3> key{a, b, c};
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) continue;
        out.insert(out.end(), {a, b, c});
    }
    return Eigen::Map<const Faces>(out.data(), static_cast<Index>(out.size() / 3), 3);
}

PoolResult finish_pool(const Mesh& mesh, const EdgeSet& fine_geodesic, PoolingTraceMap trace, Points positions,
                       bool keep_faces) {
    PoolResult result;
    result.mesh.positions = std::move(positions);
    if (keep_faces) {
        result.mesh.faces = map_faces(mesh.faces, trace.assignment);
        result.geodesic = induced_edges(fine_geodesic, trace);
    } else {
        result.mesh.faces.resize(0, 3);
        result.geodesic = EdgeSet(std::vector<std::vector<Index>>(trace.coarse_count));
    }
    aggregate_attributes(mesh, trace, result.mesh);
    result.trace = std::move(trace);
    return result;
}

}  // namespace

PoolResult vertex_clustering_pool(const Mesh& mesh, const EdgeSet& fine_geodesic, double cell_size) {
    if (!(cell_size > 0.0)) throw ConfigError("vertex clustering cell size must be positive");
    if (fine_geodesic.vertex_count() != mesh.vertex_count())
        throw ValidationError("geodesic edge set does not match the mesh vertex count");
    const Index n = mesh.vertex_count();
    PoolingTraceMap trace;
    trace.assignment.resize(n);
    if (n == 0) return finish_pool(mesh, fine_geodesic, trace, Points(0, 3), true);

    const Eigen::RowVector3d origin = mesh.positions.colwise().minCoeff();
    std::map<std::array<std::int64_t, 3>, Index> cell_index;  // coarse ids in order of first member
    for (Index i = 0; i < n; ++i) {
        std::array<std::int64_t, 3> cell{};
        for (int k = 0; k < 3; ++k)
            cell[k] = static_cast<std::int64_t>(std::floor((mesh.positions(i, k) - origin(k)) / cell_size));
        auto [it, inserted] = cell_index.emplace(cell, static_cast<Index>(cell_index.size()));
        trace.assignment[i] = it->second;
    }
    trace.coarse_count = static_cast<Index>(cell_index.size());

    Points centroids = pool_features<double>(mesh.positions, trace, PoolMode::Mean);
    return finish_pool(mesh, fine_geodesic, std::move(trace), std::move(centroids), true);
}

PoolResult vertex_clustering_pool(const Mesh& mesh, double cell_size) {
    return vertex_clustering_pool(mesh, geodesic_edge_set(mesh), cell_size);
}

namespace {

struct PairEntry {
    double cost;
    Index a, b;  // a < b
    std::uint32_t version_a, version_b;
    Vec3 target;

    // std::priority_queue is a max-heap; invert for lowest cost first.
    bool operator<(const PairEntry& o) const {
        if (cost != o.cost) return cost > o.cost;
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

}  // namespace

PoolResult qem_pool(const Mesh& mesh, const EdgeSet& fine_geodesic, double target_ratio,
                    double pair_distance_threshold, QemStats* stats) {
    if (!(target_ratio > 0.0 && target_ratio < 1.0)) throw ConfigError("QEM target ratio must lie in (0,1)");
    if (fine_geodesic.vertex_count() != mesh.vertex_count())
        throw ValidationError("geodesic edge set does not match the mesh vertex count");
    const Index n = mesh.vertex_count();
    const auto target = static_cast<Index>(std::ceil(target_ratio * static_cast<double>(n)));

    std::vector<Quadric<double>> quadric(n);
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.positions.row(mesh.faces(f, 0));
        const Vec3 b = mesh.positions.row(mesh.faces(f, 1));
        const Vec3 c = mesh.positions.row(mesh.faces(f, 2));
        const Vec3 normal = (b - a).cross(c - a);
        const double len = normal.norm();
        if (!(len > 0.0)) continue;
        const auto q = Quadric<double>::from_plane(normal / len, a);
        for (int k = 0; k < 3; ++k) quadric[mesh.faces(f, k)] += q;
    }

    std::vector<std::set<Index>> partners(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j : fine_geodesic.neighbors(i)) {
            if (i == j) continue;
            partners[i].insert(j);
            partners[j].insert(i);
        }
    }
    if (pair_distance_threshold > 0.0 && n > 1) {
        const KdTree<double> tree(mesh.positions);
        for (Index i = 0; i < n; ++i) {
            const Vec3 p = mesh.positions.row(i);
            for (Index j : tree.radius(p.data(), pair_distance_threshold)) {
                if (j == i) continue;
                partners[i].insert(j);
                partners[j].insert(i);
            }
        }
    }

    std::vector<Vec3> position(n);
    for (Index i = 0; i < n; ++i) position[i] = mesh.positions.row(i);
    std::vector<std::uint32_t> version(n, 0);
    std::vector<bool> alive(n, true);
    std::vector<Index> parent(n);
    for (Index i = 0; i < n; ++i) parent[i] = i;

    std::priority_queue<PairEntry> heap;
    auto push_pair = [&](Index u, Index v) {
        const Index a = std::min(u, v), b = std::max(u, v);
        const Quadric<double> q = quadric[a] + quadric[b];
        const auto best = q.minimize({position[a], position[b], 0.5 * (position[a] + position[b])});
        heap.push(PairEntry{best.cost, a, b, version[a], version[b], best.point});
    };
    for (Index i = 0; i < n; ++i) {
        for (Index j : partners[i]) {
            if (i < j) push_pair(i, j);
        }
    }

    Index alive_count = n;
    while (alive_count > target && !heap.empty()) {
        const PairEntry e = heap.top();
        heap.pop();
        if (!alive[e.a] || !alive[e.b] || version[e.a] != e.version_a || version[e.b] != e.version_b) continue;
        if (stats) stats->popped_costs.push_back(e.cost);

        // b collapses into a.
        position[e.a] = e.target;
        quadric[e.a] += quadric[e.b];
        alive[e.b] = false;
        parent[e.b] = e.a;
        ++version[e.a];
        --alive_count;
        for (Index p : partners[e.b]) {
            if (p == e.a) continue;
            partners[p].erase(e.b);
            partners[p].insert(e.a);
            partners[e.a].insert(p);
        }
        partners[e.a].erase(e.b);
        partners[e.b].clear();
        for (Index p : partners[e.a]) push_pair(e.a, p);
    }

    auto root = [&](Index i) {
        Index r = i;
        while (parent[r] != r) r = parent[r];
        while (parent[i] != r) {
            const Index next = parent[i];
            parent[i] = r;
            i = next;
        }
        return r;
    };

    std::vector<Index> compact(n, -1);
    PoolingTraceMap trace;
    trace.assignment.resize(n);
    Points coarse_positions(alive_count, 3);
    Index next = 0;
    for (Index i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        compact[i] = next;
        coarse_positions.row(next) = position[i].transpose();
        ++next;
    }
    for (Index i = 0; i < n; ++i) trace.assignment[i] = compact[root(i)];
    trace.coarse_count = alive_count;

    PoolResult result = finish_pool(mesh, fine_geodesic, std::move(trace), std::move(coarse_positions), true);
    result.target_reached = alive_count <= target;
    return result;
}

PoolResult qem_pool(const Mesh& mesh, double target_ratio, double pair_distance_threshold) {
    return qem_pool(mesh, geodesic_edge_set(mesh), target_ratio, pair_distance_threshold);
}

std::vector<Index> farthest_point_selection(const Points& points, Index target_count, Index start) {
    const Index n = static_cast<Index>(points.rows());
    if (target_count <= 0 || target_count > n)
        throw ConfigError("FPS target count " + std::to_string(target_count) + " outside [1," + std::to_string(n) + "]");
    if (start < 0 || start >= n) throw ConfigError("FPS start vertex out of range");
    std::vector<Index> selected{start};
    selected.reserve(target_count);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    Index last = start;
    while (static_cast<Index>(selected.size()) < target_count) {
        Index best = -1;
        double best_dist = -1.0;
        for (Index i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], squared_distance(points.row(i).data(), points.row(last).data()));
            if (dist[i] > best_dist) {
                best_dist = dist[i];
                best = i;
            }
        }
        selected.push_back(best);
        last = best;
    }
    return selected;
}

PoolResult fps_pool_from(const Mesh& mesh, Index target_count, Index start) {
    std::vector<Index> selected = farthest_point_selection(mesh.positions, target_count, start);
    std::sort(selected.begin(), selected.end());

    Points coarse_positions(target_count, 3);
    for (Index k = 0; k < target_count; ++k) coarse_positions.row(k) = mesh.positions.row(selected[k]);
    const KdTree<double> tree(coarse_positions);

    PoolingTraceMap trace;
    trace.coarse_count = target_count;
    trace.assignment.resize(mesh.vertex_count());
    for (Index i = 0; i < mesh.vertex_count(); ++i)
        trace.assignment[i] = tree.nearest(mesh.positions.row(i).data()).first;
    // Coincident duplicates could otherwise steal a selected vertex.
    for (Index k = 0; k < target_count; ++k) trace.assignment[selected[k]] = k;

    return finish_pool(mesh, EdgeSet{}, std::move(trace), std::move(coarse_positions), false);
}

PoolResult fps_pool(const Mesh& mesh, Index target_count, std::uint64_t seed) {
    if (mesh.vertex_count() == 0) throw ConfigError("FPS on an empty mesh");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, mesh.vertex_count() - 1);
    return fps_pool_from(mesh, target_count, pick(rng));
}

std::string to_string(PoolingStrategy s) {
    switch (s) {
        case PoolingStrategy::VertexClustering: return "vc";
        case PoolingStrategy::VcThenQem: return "vc+qem";
        case PoolingStrategy::Fps: return "fps";
    }
    return "?";
}

PoolingStrategy parse_strategy(const std::string& s) {
    if (s == "vc") return PoolingStrategy::VertexClustering;
    if (s == "vc+qem" || s == "qem") return PoolingStrategy::VcThenQem;
    if (s == "fps") return PoolingStrategy::Fps;
    throw ConfigError("unknown pooling strategy '" + s + "' (expected vc, vc+qem or fps)");
}

int HierarchyConfig::pooling_steps() const {
    switch (strategy) {
        case PoolingStrategy::VertexClustering: return static_cast<int>(cells.size());
        case PoolingStrategy::VcThenQem: return 1 + qem_levels;
        case PoolingStrategy::Fps: return static_cast<int>(fps_counts.size());
    }
    return 0;
}

double HierarchyConfig::effective_pair_threshold() const {
    if (pair_distance_threshold >= 0.0) return pair_distance_threshold;
    return cells.empty() ? 0.0 : cells.front();
}

void Hierarchy::validate() const {
    const Index count = level_count();
    if (count == 0) throw ValidationError("hierarchy has no levels");
    if (static_cast<Index>(traces.size()) != count - 1)
        throw ValidationError("hierarchy has " + std::to_string(traces.size()) + " traces for " +
                              std::to_string(count) + " levels");
    if (static_cast<Index>(geodesic_edges.size()) != count)
        throw ValidationError("hierarchy geodesic edge sets do not match the level count");
    if (!euclidean_edges.empty() && static_cast<Index>(euclidean_edges.size()) != count)
        throw ValidationError("hierarchy Euclidean edge sets do not match the level count");
    for (Index l = 0; l < count; ++l) {
        const Mesh& mesh = levels[l];
        require_valid(mesh);
        const auto& geo = geodesic_edges[l];
        if (geo.vertex_count() != mesh.vertex_count())
            throw ValidationError("geodesic edges of level " + std::to_string(l) + " do not match its vertex count");
        if (!geo.is_symmetric()) throw ValidationError("geodesic edges of level " + std::to_string(l) + " are not symmetric");
        for (Index f = 0; f < mesh.face_count(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const Index a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
                auto nb = geo.neighbors(a);
                if (!std::binary_search(nb.begin(), nb.end(), b))
                    throw ValidationError("face edge missing from geodesic edges of level " + std::to_string(l));
            }
        }
        if (!euclidean_edges.empty() && euclidean_edges[l].vertex_count() != mesh.vertex_count())
            throw ValidationError("Euclidean edges of level " + std::to_string(l) + " do not match its vertex count");
        if (l + 1 < count) {
            const auto& trace = traces[l];
            trace.validate();
            if (trace.fine_count() != mesh.vertex_count() || trace.coarse_count != levels[l + 1].vertex_count())
                throw ValidationError("trace " + std::to_string(l) + " does not link the sizes of levels " +
                                      std::to_string(l) + " and " + std::to_string(l + 1));
            if (levels[l + 1].vertex_count() >= mesh.vertex_count())
                throw ValidationError("level " + std::to_string(l + 1) + " does not reduce the vertex count");
        }
    }
}

Hierarchy build_hierarchy(const Mesh& mesh, const HierarchyConfig& config) {
    require_valid(mesh);
    Hierarchy h;
    h.config = config;
    h.levels.push_back(mesh);
    h.geodesic_edges.push_back(geodesic_edge_set(mesh));

    auto push = [&](PoolResult r) {
        const Index before = h.levels.back().vertex_count();
        if (r.mesh.vertex_count() >= before)
            throw ValidationError("pooling level " + std::to_string(h.levels.size()) + " did not reduce the vertex count (" +
                                  std::to_string(before) + " -> " + std::to_string(r.mesh.vertex_count()) + ")");
        h.levels.push_back(std::move(r.mesh));
        h.traces.push_back(std::move(r.trace));
        h.geodesic_edges.push_back(std::move(r.geodesic));
    };

    switch (config.strategy) {
        case PoolingStrategy::VertexClustering:
            if (config.cells.empty()) throw ConfigError("vc strategy needs at least one cell size");
            for (double cell : config.cells) push(vertex_clustering_pool(h.levels.back(), h.geodesic_edges.back(), cell));
            break;
        case PoolingStrategy::VcThenQem: {
            if (config.cells.empty()) throw ConfigError("vc+qem strategy needs the VC pre-pass cell size");
            push(vertex_clustering_pool(h.levels.back(), h.geodesic_edges.back(), config.cells.front()));
            const double threshold = config.effective_pair_threshold();
            for (int l = 0; l < config.qem_levels; ++l)
                push(qem_pool(h.levels.back(), h.geodesic_edges.back(), config.qem_ratio, threshold));
            break;
        }
        case PoolingStrategy::Fps:
            if (config.fps_counts.empty()) throw ConfigError("fps strategy needs per-level target counts");
            for (std::size_t l = 0; l < config.fps_counts.size(); ++l)
                push(fps_pool(h.levels.back(), config.fps_counts[l], config.seed + l));
            break;
    }
    return h;
}

}  // namespace dcm
