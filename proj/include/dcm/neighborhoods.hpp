#ifndef DCM_NEIGHBORHOODS_HPP
#define DCM_NEIGHBORHOODS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcm/edge_set.hpp"
#include "dcm/hierarchy.hpp"
#include "dcm/types.hpp"

namespace dcm {

/// k nearest points of every vertex, itself excluded; ties go to the lower
/// index. Throws ConfigError unless 1 <= k < point count.
EdgeSet knn_graph(const Points& points, Index k);

/// N(i) = {j != i : |p_i - p_j| <= r}. Symmetric; isolated vertices get a
/// single self-loop.
EdgeSet radius_graph(const Points& points, double r);

/// Keep probability of one edge of a neighborhood of size n under threshold
/// T: 1 for n <= T, else (n - (T - 1))^(-1 / log2(T + 1)).
double sampling_probability(Index n, Index threshold);

/// What replaces a neighborhood whose edges were all dropped.
enum class ResFallback {
    SelfLoop,  // a single self-loop; original edges keep exactly the nominal rate
    KeepOne,   // one uniformly chosen original edge
};

/// Random edge sampling: lists with more than T entries keep each edge
/// independently with sampling_probability(|N(i)|, T). Vertex i draws from
/// the stream (seed, i), so the result depends only on the inputs.
EdgeSet res_sample(const EdgeSet& edges, Index threshold, std::uint64_t seed,
                   ResFallback fallback = ResFallback::SelfLoop);

struct NeighborhoodConfig {
    enum class Kind { Geodesic, Knn, Radius };
    Kind kind = Kind::Radius;
    Index k = 16;
    double radius = 0.05;
    std::optional<Index> res_threshold;

    void validate() const;
    std::string describe() const;
};

/// Euclidean radii used when none are configured.
std::vector<double> default_radii(Index level_count);

/// Builds the Euclidean edge set of every level (knn or radius; a geodesic
/// kind copies the level's geodesic edges). `per_level` may be shorter than
/// the hierarchy, in which case radius configs keep doubling and knn configs
/// repeat.
void attach_euclidean_edges(Hierarchy& hierarchy, const std::vector<NeighborhoodConfig>& per_level);

struct DegreeStats {
    Index vertices = 0;
    Index edges = 0;
    Index min_degree = 0;
    Index max_degree = 0;
    double mean_degree = 0.0;
    Index self_loops = 0;
};

DegreeStats degree_stats(const EdgeSet& edges);

}  // namespace dcm

#endif  // DCM_NEIGHBORHOODS_HPP
