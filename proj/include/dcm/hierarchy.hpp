#ifndef DCM_HIERARCHY_HPP
#define DCM_HIERARCHY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dcm/edge_set.hpp"
#include "dcm/mesh.hpp"

namespace dcm {

/// Surjective fine -> coarse vertex assignment between adjacent levels.
struct PoolingTraceMap {
    std::vector<Index> assignment;  // one coarse index per fine vertex
    Index coarse_count = 0;

    Index fine_count() const { return static_cast<Index>(assignment.size()); }

    /// Throws ValidationError unless the map is total and surjective.
    void validate() const;

    /// Fine vertices of every coarse vertex, each list ascending.
    std::vector<std::vector<Index>> preimages() const;

    static PoolingTraceMap identity(Index n);
};

enum class PoolMode { Mean, Max, Sum };

template <typename Scalar>
FeatureMatrixT<Scalar> pool_features(const FeatureMatrixT<Scalar>& features, const PoolingTraceMap& trace,
                                     PoolMode mode = PoolMode::Mean) {
    if (features.rows() != trace.fine_count())
        throw ValidationError("pool_features: " + std::to_string(features.rows()) + " rows for a trace of " +
                              std::to_string(trace.fine_count()) + " fine vertices");
    FeatureMatrixT<Scalar> out = FeatureMatrixT<Scalar>::Zero(trace.coarse_count, features.cols());
    std::vector<Index> count(trace.coarse_count, 0);
    for (Index i = 0; i < trace.fine_count(); ++i) {
        const Index c = trace.assignment[i];
        if (mode == PoolMode::Max && count[c] > 0) {
            out.row(c) = out.row(c).cwiseMax(features.row(i));
        } else if (mode == PoolMode::Max) {
            out.row(c) = features.row(i);
        } else {
            out.row(c) += features.row(i);
        }
        ++count[c];
    }
    if (mode == PoolMode::Mean) {
        for (Index c = 0; c < trace.coarse_count; ++c) {
            if (count[c] > 0) out.row(c) /= static_cast<Scalar>(count[c]);
        }
    }
    return out;
}

/// Copies every coarse row back onto its fine vertices.
template <typename Scalar>
FeatureMatrixT<Scalar> unpool_features(const FeatureMatrixT<Scalar>& coarse, const PoolingTraceMap& trace) {
    if (coarse.rows() != trace.coarse_count)
        throw ValidationError("unpool_features: " + std::to_string(coarse.rows()) + " rows for " +
                              std::to_string(trace.coarse_count) + " coarse vertices");
    FeatureMatrixT<Scalar> out(trace.fine_count(), coarse.cols());
    for (Index i = 0; i < trace.fine_count(); ++i) out.row(i) = coarse.row(trace.assignment[i]);
    return out;
}

/// Output of one pooling step.
struct PoolResult {
    Mesh mesh;
    PoolingTraceMap trace;
    EdgeSet geodesic;            // coarse geodesic edges
    bool target_reached = true;  // QEM only: false if candidate pairs ran out
};

/// Geodesic edges induced on the coarse level: two coarse vertices are joined
/// iff some fine edge connects their preimages.
EdgeSet induced_edges(const EdgeSet& fine, const PoolingTraceMap& trace);

/// Coarse colors/normals as group means (normals renormalized), coarse labels
/// by majority vote with lowest-class tie-break; kUnlabeled wins only for
/// fully unlabeled groups. Positions and faces are not touched.
void aggregate_attributes(const Mesh& fine, const PoolingTraceMap& trace, Mesh& coarse);

/// Majority label of a group (see aggregate_attributes).
Index majority_label(std::span<const Index> labels);

/// Uniform grid with cubical cells anchored at the bounding-box minimum;
/// every occupied cell becomes the centroid of its vertices.
PoolResult vertex_clustering_pool(const Mesh& mesh, const EdgeSet& fine_geodesic, double cell_size);
PoolResult vertex_clustering_pool(const Mesh& mesh, double cell_size);

struct QemStats {
    std::vector<double> popped_costs;  // cost of every performed contraction, in order
};

/// Greedy lowest-cost pair contraction with additive plane quadrics until
/// ceil(target_ratio * |V|) vertices remain. Candidate pairs are fine
/// geodesic edges plus all vertex pairs within pair_distance_threshold.
PoolResult qem_pool(const Mesh& mesh, const EdgeSet& fine_geodesic, double target_ratio,
                    double pair_distance_threshold, QemStats* stats = nullptr);
PoolResult qem_pool(const Mesh& mesh, double target_ratio, double pair_distance_threshold);

/// Farthest point sampling from `start`; returns the selected vertex indices
/// in selection order.
std::vector<Index> farthest_point_selection(const Points& points, Index target_count, Index start);

/// FPS pooling: seed picks the start vertex; coarse vertices are the selected
/// ones (ascending original index) and every vertex joins its nearest
/// selected vertex. The coarse level has no faces and no geodesic edges.
PoolResult fps_pool(const Mesh& mesh, Index target_count, std::uint64_t seed);
PoolResult fps_pool_from(const Mesh& mesh, Index target_count, Index start);

enum class PoolingStrategy { VertexClustering, VcThenQem, Fps };

std::string to_string(PoolingStrategy s);
PoolingStrategy parse_strategy(const std::string& s);

struct HierarchyConfig {
    PoolingStrategy strategy = PoolingStrategy::VcThenQem;
    std::vector<double> cells{0.04, 0.08, 0.16, 0.32};  // VC; VcThenQem uses cells[0]
    double qem_ratio = 0.3;
    int qem_levels = 3;
    double pair_distance_threshold = -1.0;  // < 0: use cells[0]
    std::vector<Index> fps_counts;
    std::uint64_t seed = 0;

    /// Number of pooling steps this config performs.
    int pooling_steps() const;
    double effective_pair_threshold() const;
};

/// Levels M^0..M^L with traces T^0..T^{L-1}. Euclidean edge sets are filled
/// by the neighborhoods module and may be empty.
struct Hierarchy {
    HierarchyConfig config;
    std::vector<Mesh> levels;
    std::vector<PoolingTraceMap> traces;
    std::vector<EdgeSet> geodesic_edges;
    std::vector<EdgeSet> euclidean_edges;

    Index level_count() const { return static_cast<Index>(levels.size()); }

    /// Throws ValidationError when a structural invariant fails.
    void validate() const;
};

/// Level 0 is the input mesh; one further level per pooling step.
Hierarchy build_hierarchy(const Mesh& mesh, const HierarchyConfig& config);

}  // namespace dcm

#endif  // DCM_HIERARCHY_HPP
