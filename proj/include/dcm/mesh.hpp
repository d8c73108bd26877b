#ifndef DCM_MESH_HPP
#define DCM_MESH_HPP

#include <optional>
#include <string>
#include <vector>

#include "dcm/edge_set.hpp"
#include "dcm/types.hpp"

namespace dcm {

/// Triangle mesh with optional per-vertex attributes. Positions are meters,
/// colors RGB in [0,1], normals unit vectors, labels class indices or
/// kUnlabeled.
struct Mesh {
    Points positions;
    Faces faces;
    std::optional<Points> colors;
    std::optional<Points> normals;
    std::optional<Labels> labels;

    Index vertex_count() const { return static_cast<Index>(positions.rows()); }
    Index face_count() const { return static_cast<Index>(faces.rows()); }
};

struct LabeledPointCloud {
    Points points;
    Points colors;
    Labels labels;
};

struct Violation {
    std::string invariant;
    std::string element;  // "vertex", "face"
    Index index = -1;

    std::string describe() const;
};

/// Empty iff every mesh invariant holds.
std::vector<Violation> validate_mesh(const Mesh& mesh);

/// Throws ValidationError naming the first violation.
void require_valid(const Mesh& mesh);

/// Undirected 1-hop adjacency induced by the faces.
EdgeSet geodesic_edge_set(const Mesh& mesh);

/// Area-weighted incident face normals; isolated vertices get +z.
Mesh compute_vertex_normals(const Mesh& mesh);

/// One pass of midpoint subdivision. Every edge with length >= min_edge_len
/// gets a midpoint vertex whose attributes are the endpoint means; triangles
/// are re-triangulated by their number of split edges.
Mesh midpoint_subdivide(const Mesh& mesh, double min_edge_len);

/// Copies color and label of the nearest cloud point onto every vertex
/// (ties resolved toward the lower point index).
Mesh interpolate_from_point_cloud(const Mesh& mesh, const LabeledPointCloud& cloud);

/// Total triangle area.
double surface_area(const Mesh& mesh);

/// Keeps the vertices flagged in `keep` and the faces whose three corners are
/// kept; returns the submesh and, through `old_to_new`, the reindexing (-1 for
/// dropped vertices).
Mesh extract_submesh(const Mesh& mesh, const std::vector<bool>& keep, std::vector<Index>* old_to_new = nullptr);

}  // namespace dcm

#endif  // DCM_MESH_HPP
