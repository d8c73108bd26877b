#ifndef DCM_NN_NETWORK_HPP
#define DCM_NN_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dcm/hierarchy.hpp"
#include "dcm/neighborhoods.hpp"
#include "dcm/nn/edge_conv.hpp"

namespace dcm::nn {

/// Hidden and output widths of the two branches at one mesh level. A branch
/// with zero output width is absent.
struct LevelWidths {
    Index geo_hidden = 64;
    Index geo_out = 32;
    Index euc_hidden = 64;
    Index euc_out = 32;

    Index out() const { return geo_out + euc_out; }
    bool operator==(const LevelWidths&) const = default;
};

struct NetworkConfig {
    Index levels = 4;
    Index blocks_per_level = 3;
    Index input_width = 9;
    Index classes = 21;
    std::vector<LevelWidths> widths = std::vector<LevelWidths>(4);
    Index head_hidden = 32;
    bool relative_first_layer = true;
    BnPlacement bn_placement = BnPlacement::PerEdge;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    std::uint64_t seed = 0;
    /// Euclidean neighborhood per level; shorter lists extend as in
    /// attach_euclidean_edges.
    std::vector<NeighborhoodConfig> euclidean = {NeighborhoodConfig{}};

    /// Dual geodesic/Euclidean network with 64 channels per level.
    static NetworkConfig dcm_default(Index classes = 21);
    /// Single-branch network (geodesic or Euclidean) with 128/64 filters.
    static NetworkConfig scm_default(Index classes = 21, bool geodesic = true);

    void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// Edge sets and traces the network runs on. Levels beyond the network depth
/// are ignored.
struct NetworkGraph {
    std::vector<EdgeSet> geodesic;
    std::vector<EdgeSet> euclidean;
    std::vector<PoolingTraceMap> traces;
    std::vector<Index> graph_offsets{0};  // level-0 vertex ranges of batched graphs

    Index level_count() const { return static_cast<Index>(geodesic.size()); }
    Index vertex_count(Index level) const { return geodesic[level].vertex_count(); }
    Index graph_count() const { return static_cast<Index>(graph_offsets.size()) - 1; }
};

/// Takes the first `levels` levels of a hierarchy with Euclidean edges
/// attached. Empty neighborhoods get self-loops; with a threshold, Euclidean
/// edges are thinned by random edge sampling using streams keyed by `seed`
/// and the level index.
NetworkGraph make_graph(const Hierarchy& hierarchy, Index levels, std::optional<Index> res_threshold = std::nullopt,
                        std::uint64_t seed = 0);

/// Disjoint union of graphs; feature rows must be stacked in the same order.
NetworkGraph batch_graphs(std::span<const NetworkGraph> graphs);

/// Encoder: `blocks_per_level` dual blocks per level, mean pooling between
/// levels. Decoder: unpool, concatenate the skip features of the level, dual
/// blocks. Head: Linear+BN+ReLU, Linear.
class Network {
public:
    explicit Network(const NetworkConfig& config);

    const NetworkConfig& config() const { return config_; }

    /// Per-vertex class logits at level 0. Graph and features must stay alive
    /// until backward().
    FeatureMatrix forward(const NetworkGraph& graph, const FeatureMatrix& features, Mode mode);

    /// Accumulates parameter gradients and returns d loss / d features.
    FeatureMatrix backward(const FeatureMatrix& dlogits);

    Registry registry();
    Index parameter_count();
    void zero_grad();
    void set_track_running_stats(bool track);

    /// Hash of every ReLU mask in the last forward pass. Two passes with equal
    /// signatures ran on the same smooth piece of the network.
    std::uint64_t activation_signature() const;

    /// Output of the first block in the last forward pass.
    const FeatureMatrix& first_block_output() const { return first_block_output_; }

    std::vector<std::vector<DualBlock>> encoder;  // [level][block]
    std::vector<std::vector<DualBlock>> decoder;  // [level][block], levels 0..L-2
    Linear head_linear;
    BatchNorm head_norm;
    Linear classifier;

private:
    NetworkConfig config_;
    const NetworkGraph* graph_ = nullptr;
    Relu head_relu_;
    FeatureMatrix first_block_output_;
};

}  // namespace dcm::nn

#endif  // DCM_NN_NETWORK_HPP
