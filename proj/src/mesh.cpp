#include "dcm/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

#include "dcm/kd_tree.hpp"

namespace dcm {

namespace {

std::uint64_t edge_key(Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

template <typename Derived>
Eigen::Matrix<double, 1, 3> midpoint_row(const Eigen::MatrixBase<Derived>& m, Index a, Index b) {
    return 0.5 * (m.row(a) + m.row(b));
}

}  // namespace

std::string Violation::describe() const {
    std::ostringstream os;
    os << invariant << " at " << element << " " << index;
    return os.str();
}

std::vector<Violation> validate_mesh(const Mesh& mesh) {
    std::vector<Violation> out;
    const Index n = mesh.vertex_count();
    for (Index i = 0; i < n; ++i) {
        if (!mesh.positions.row(i).allFinite()) out.push_back({"non-finite coordinate", "vertex", i});
    }
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const auto face = mesh.faces.row(f);
        bool in_range = true;
        for (int k = 0; k < 3; ++k) in_range = in_range && face(k) >= 0 && face(k) < n;
        if (!in_range) {
            out.push_back({"face index out of range", "face", f});
        } else if (face(0) == face(1) || face(1) == face(2) || face(0) == face(2)) {
            out.push_back({"degenerate face with repeated index", "face", f});
        }
    }
    if (mesh.colors) {
        if (mesh.colors->rows() != n) {
            out.push_back({"color count differs from vertex count", "mesh", 0});
        } else {
            for (Index i = 0; i < n; ++i) {
                const auto c = mesh.colors->row(i);
                if (!c.allFinite() || c.minCoeff() < 0.0 || c.maxCoeff() > 1.0)
                    out.push_back({"color outside [0,1]", "vertex", i});
            }
        }
    }
    if (mesh.normals) {
        if (mesh.normals->rows() != n) {
            out.push_back({"normal count differs from vertex count", "mesh", 0});
        } else {
            for (Index i = 0; i < n; ++i) {
                const double len = mesh.normals->row(i).norm();
                if (!std::isfinite(len) || std::abs(len - 1.0) > 1e-6)
                    out.push_back({"normal not unit length", "vertex", i});
            }
        }
    }
    if (mesh.labels) {
        if (mesh.labels->size() != n) {
            out.push_back({"label count differs from vertex count", "mesh", 0});
        } else {
            for (Index i = 0; i < n; ++i) {
                if ((*mesh.labels)(i) < kUnlabeled) out.push_back({"negative label", "vertex", i});
            }
        }
    }
    return out;
}

void require_valid(const Mesh& mesh) {
    const auto violations = validate_mesh(mesh);
    if (!violations.empty()) throw ValidationError(violations.front().describe());
}

EdgeSet geodesic_edge_set(const Mesh& mesh) {
    std::vector<std::vector<Index>> lists(mesh.vertex_count());
    for (Index f = 0; f < mesh.face_count(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const Index a = mesh.faces(f, k);
            const Index b = mesh.faces(f, (k + 1) % 3);
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

Mesh compute_vertex_normals(const Mesh& mesh) {
    Points accum = Points::Zero(mesh.vertex_count(), 3);
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.positions.row(mesh.faces(f, 0));
        const Vec3 b = mesh.positions.row(mesh.faces(f, 1));
        const Vec3 c = mesh.positions.row(mesh.faces(f, 2));
        // |cross| is twice the face area, so summing it weights by area.
        const Vec3 weighted = (b - a).cross(c - a);
        for (int k = 0; k < 3; ++k) accum.row(mesh.faces(f, k)) += weighted.transpose();
    }
    Mesh out = mesh;
    out.normals = Points(mesh.vertex_count(), 3);
    for (Index i = 0; i < mesh.vertex_count(); ++i) {
        const double len = accum.row(i).norm();
        if (len > 0.0 && std::isfinite(len)) {
            out.normals->row(i) = accum.row(i) / len;
        } else {
            out.normals->row(i) << 0.0, 0.0, 1.0;
        }
    }
    return out;
}

Mesh midpoint_subdivide(const Mesh& mesh, double min_edge_len) {
    if (!(min_edge_len > 0.0)) throw ConfigError("min_edge_len must be positive");
    const Index n = mesh.vertex_count();

    // Midpoint vertex per split edge, numbered after the original vertices in
    // order of first encounter.
    std::unordered_map<std::uint64_t, Index> midpoint;
    std::vector<std::pair<Index, Index>> split_edges;
    for (Index f = 0; f < mesh.face_count(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const Index a = mesh.faces(f, k);
            const Index b = mesh.faces(f, (k + 1) % 3);
            const auto key = edge_key(a, b);
            if (midpoint.count(key)) continue;
            if ((mesh.positions.row(a) - mesh.positions.row(b)).norm() >= min_edge_len) {
                midpoint.emplace(key, n + static_cast<Index>(split_edges.size()));
                split_edges.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
    }

    const Index total = n + static_cast<Index>(split_edges.size());
    Mesh out;
    out.positions.resize(total, 3);
    out.positions.topRows(n) = mesh.positions;
    if (mesh.colors) {
        out.colors = Points(total, 3);
        out.colors->topRows(n) = *mesh.colors;
    }
    if (mesh.normals) {
        out.normals = Points(total, 3);
        out.normals->topRows(n) = *mesh.normals;
    }
    if (mesh.labels) {
        // Midpoint labels are left for interpolate_from_point_cloud.
        out.labels = Labels::Constant(total, kUnlabeled);
        out.labels->head(n) = *mesh.labels;
    }
    for (std::size_t e = 0; e < split_edges.size(); ++e) {
        const auto [a, b] = split_edges[e];
        const Index m = n + static_cast<Index>(e);
        out.positions.row(m) = midpoint_row(mesh.positions, a, b);
        if (mesh.colors) out.colors->row(m) = midpoint_row(*mesh.colors, a, b);
        if (mesh.normals) {
            Eigen::Matrix<double, 1, 3> nrm = midpoint_row(*mesh.normals, a, b);
            const double len = nrm.norm();
            if (len > 0.0) {
                nrm /= len;
            } else {
                nrm = mesh.normals->row(a);
            }
            out.normals->row(m) = nrm;
        }
    }

    std::vector<std::array<Index, 3>> faces;
    faces.reserve(mesh.face_count() * 4);
    auto dist2 = [&](Index a, Index b) { return (out.positions.row(a) - out.positions.row(b)).squaredNorm(); };
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const std::array<Index, 3> v{mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
        std::array<Index, 3> mid{};  // mid[k] sits on edge (v[k], v[k+1])
        int splits = 0;
        for (int k = 0; k < 3; ++k) {
            auto it = midpoint.find(edge_key(v[k], v[(k + 1) % 3]));
            mid[k] = it == midpoint.end() ? -1 : it->second;
            splits += it == midpoint.end() ? 0 : 1;
        }
        if (splits == 0) {
            faces.push_back(v);
        } else if (splits == 3) {
            faces.push_back({v[0], mid[0], mid[2]});
            faces.push_back({mid[0], v[1], mid[1]});
            faces.push_back({mid[2], mid[1], v[2]});
            faces.push_back({mid[0], mid[1], mid[2]});
        } else if (splits == 1) {
            int k = 0;
            while (mid[k] < 0) ++k;
            const Index a = v[k], b = v[(k + 1) % 3], c = v[(k + 2) % 3];
            faces.push_back({a, mid[k], c});
            faces.push_back({mid[k], b, c});
        } else {
            // Rotate so the unsplit edge is (c, a): split edges are (a,b) and (b,c).
            int k = 0;
            while (mid[(k + 2) % 3] >= 0) ++k;
            const Index a = v[k], b = v[(k + 1) % 3], c = v[(k + 2) % 3];
            const Index mab = mid[k], mbc = mid[(k + 1) % 3];
            faces.push_back({mab, b, mbc});
            // Split the remaining quad (a, mab, mbc, c) along its shorter diagonal.
            if (dist2(a, mbc) <= dist2(mab, c)) {
                faces.push_back({a, mab, mbc});
                faces.push_back({a, mbc, c});
            } else {
                faces.push_back({a, mab, c});
                faces.push_back({mab, mbc, c});
            }
        }
    }
    out.faces.resize(static_cast<Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
        out.faces.row(static_cast<Index>(f)) << faces[f][0], faces[f][1], faces[f][2];
    return out;
}

Mesh interpolate_from_point_cloud(const Mesh& mesh, const LabeledPointCloud& cloud) {
    if (cloud.points.rows() == 0) throw ValidationError("cannot interpolate from an empty point cloud");
    if (cloud.colors.rows() != cloud.points.rows() || cloud.labels.size() != cloud.points.rows())
        throw ValidationError("point cloud attribute counts differ");
    const KdTree<double> tree(cloud.points);
    Mesh out = mesh;
    out.colors = Points(mesh.vertex_count(), 3);
    out.labels = Labels(mesh.vertex_count());
    for (Index i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3 q = mesh.positions.row(i);
        const Index j = tree.nearest(q.data()).first;
        out.colors->row(i) = cloud.colors.row(j);
        (*out.labels)(i) = cloud.labels(j);
    }
    return out;
}

double surface_area(const Mesh& mesh) {
    double area = 0.0;
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const Vec3 a = mesh.positions.row(mesh.faces(f, 0));
        const Vec3 b = mesh.positions.row(mesh.faces(f, 1));
        const Vec3 c = mesh.positions.row(mesh.faces(f, 2));
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

Mesh extract_submesh(const Mesh& mesh, const std::vector<bool>& keep, std::vector<Index>* old_to_new) {
    std::vector<Index> remap(mesh.vertex_count(), -1);
    std::vector<Index> kept;
    for (Index i = 0; i < mesh.vertex_count(); ++i) {
        if (keep[i]) {
            remap[i] = static_cast<Index>(kept.size());
            kept.push_back(i);
        }
    }
    const auto count = static_cast<Index>(kept.size());
    Mesh out;
    out.positions.resize(count, 3);
    if (mesh.colors) out.colors = Points(count, 3);
    if (mesh.normals) out.normals = Points(count, 3);
    if (mesh.labels) out.labels = Labels(count);
    for (Index k = 0; k < count; ++k) {
        out.positions.row(k) = mesh.positions.row(kept[k]);
        if (mesh.colors) out.colors->row(k) = mesh.colors->row(kept[k]);
        if (mesh.normals) out.normals->row(k) = mesh.normals->row(kept[k]);
        if (mesh.labels) (*out.labels)(k) = (*mesh.labels)(kept[k]);
    }
    std::vector<Index> faces;
    for (Index f = 0; f < mesh.face_count(); ++f) {
        const Index a = remap[mesh.faces(f, 0)], b = remap[mesh.faces(f, 1)], c = remap[mesh.faces(f, 2)];
        if (a >= 0 && b >= 0 && c >= 0) faces.insert(faces.end(), {a, b, c});
    }
    out.faces = Eigen::Map<const Faces>(faces.data(), static_cast<Index>(faces.size() / 3), 3);
    if (old_to_new) *old_to_new = std::move(remap);
    return out;
}

}  // namespace dcm
