#ifndef DCM_NN_EDGE_CONV_HPP
#define DCM_NN_EDGE_CONV_HPP

#include <optional>
#include <string>
#include <vector>

#include "dcm/edge_set.hpp"
#include "dcm/nn/layers.hpp"

namespace dcm::nn {

/// Where batch norm sees the last layer of phi: on every edge before the
/// neighborhood mean, or on every vertex after it.
enum class BnPlacement { PerEdge, PerVertex };

struct EdgeConvSpec {
    Index in = 0;                // F, the vertex feature width
    std::vector<Index> widths;   // phi layer widths; the last one is the output width
    bool relative = false;       // phi(x_j - x_i) instead of phi([x_i, x_j - x_i])
    bool batch_norm = true;
    bool relu = true;
    BnPlacement placement = BnPlacement::PerEdge;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    Index phi_input() const { return relative ? in : 2 * in; }
    Index out() const { return widths.empty() ? 0 : widths.back(); }
};

/// y_i = 1/|N_i| sum_{j in N_i} phi([x_i, x_j - x_i]), phi = (Linear, BN, ReLU)*.
/// The first linear layer splits its weight into center and difference halves
/// so it runs per vertex instead of per edge.
class EdgeConv {
public:
    EdgeConv() = default;
    EdgeConv(const EdgeConvSpec& spec, const std::string& name);

    void init(std::mt19937_64& rng);

    FeatureMatrix forward(const FeatureMatrix& x, const EdgeSet& edges, Mode mode);
    FeatureMatrix backward(const FeatureMatrix& dy);

    void collect(Registry& r);
    void mix_masks(std::uint64_t& hash) const;
    const EdgeConvSpec& spec() const { return spec_; }

    std::vector<Linear> linears;
    std::vector<BatchNorm> norms;

private:
    struct Stage {
        Relu relu;
    };

    FeatureMatrix run_layer(std::size_t k, FeatureMatrix z, Mode mode);
    FeatureMatrix back_layer(std::size_t k, FeatureMatrix dz);
    FeatureMatrix first_linear(const FeatureMatrix& x);
    FeatureMatrix first_linear_backward(const FeatureMatrix& dz);

    EdgeConvSpec spec_;
    std::vector<Stage> stages_;
    const EdgeSet* edges_ = nullptr;
    std::vector<Index> centers_;
    FeatureMatrix x_;
    Index vertex_count_ = 0;
};

/// Parallel geodesic and Euclidean edge convolutions, concatenated along
/// channels (geodesic first). A branch of width 0 is absent. When the input
/// width equals the output width the input is added as a residual.
class DualBlock {
public:
    DualBlock() = default;
    DualBlock(std::optional<EdgeConvSpec> geodesic, std::optional<EdgeConvSpec> euclidean, const std::string& name);

    void init(std::mt19937_64& rng);

    FeatureMatrix forward(const FeatureMatrix& x, const EdgeSet& geo, const EdgeSet& euc, Mode mode);
    FeatureMatrix backward(const FeatureMatrix& dy);

    void collect(Registry& r);
    void mix_masks(std::uint64_t& hash) const;
    Index in() const { return in_; }
    Index out() const;
    bool residual() const { return in() == out(); }

    std::optional<EdgeConv> geodesic;
    std::optional<EdgeConv> euclidean;

private:
    Index in_ = 0;
};

}  // namespace dcm::nn

#endif  // DCM_NN_EDGE_CONV_HPP
