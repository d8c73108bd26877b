#include "dcm/nn/network.hpp"

#include <random>
#include <utility>

namespace dcm::nn {

NetworkConfig NetworkConfig::dcm_default(Index classes) {
    NetworkConfig c;
    c.classes = classes;
    return c;
}

NetworkConfig NetworkConfig::scm_default(Index classes, bool geodesic) {
    NetworkConfig c;
    c.classes = classes;
    const LevelWidths w = geodesic ? LevelWidths{128, 64, 0, 0} : LevelWidths{0, 0, 128, 64};
    c.widths.assign(c.levels, w);
    return c;
}

void NetworkConfig::validate() const {
    if (levels < 1) throw ConfigError("network needs at least one level");
    if (blocks_per_level < 1) throw ConfigError("network needs at least one block per level");
    if (static_cast<Index>(widths.size()) != levels)
        throw ConfigError("network has " + std::to_string(widths.size()) + " width entries for " + std::to_string(levels) +
                          " levels");
    for (const auto& w : widths) {
        if (w.out() <= 0) throw ConfigError("every level needs a branch with positive output width");
        if ((w.geo_out > 0) != (w.geo_hidden > 0) || (w.euc_out > 0) != (w.euc_hidden > 0))
            throw ConfigError("a branch needs both hidden and output widths, or neither");
        if (w.geo_out < 0 || w.euc_out < 0) throw ConfigError("negative branch width");
    }
    if (input_width < 1 || classes < 1 || head_hidden < 1) throw ConfigError("input width, classes and head width must be positive");
    if (!(bn_eps > 0.0) || bn_momentum < 0.0 || bn_momentum > 1.0) throw ConfigError("batch-norm constants out of range");
    for (const auto& n : euclidean) n.validate();
}

namespace {

nlohmann::json neighborhood_json(const NeighborhoodConfig& n) {
    nlohmann::json j;
    switch (n.kind) {
        case NeighborhoodConfig::Kind::Geodesic: j["kind"] = "geodesic"; break;
        case NeighborhoodConfig::Kind::Knn: j["kind"] = "knn"; j["k"] = n.k; break;
        case NeighborhoodConfig::Kind::Radius: j["kind"] = "radius"; j["radius"] = n.radius; break;
    }
    if (n.res_threshold) j["res_threshold"] = *n.res_threshold;
    return j;
}

NeighborhoodConfig neighborhood_from_json(const nlohmann::json& j) {
    NeighborhoodConfig n;
    const std::string kind = j.at("kind");
    if (kind == "geodesic") {
        n.kind = NeighborhoodConfig::Kind::Geodesic;
    } else if (kind == "knn") {
        n.kind = NeighborhoodConfig::Kind::Knn;
        n.k = j.at("k");
    } else if (kind == "radius") {
        n.kind = NeighborhoodConfig::Kind::Radius;
        n.radius = j.at("radius");
    } else {
        throw ConfigError("unknown neighborhood kind '" + kind + "'");
    }
    if (j.contains("res_threshold")) n.res_threshold = j["res_threshold"].get<Index>();
    return n;
}

}  // namespace

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"levels", c.levels},
                       {"blocks_per_level", c.blocks_per_level},
                       {"input_width", c.input_width},
                       {"classes", c.classes},
                       {"head_hidden", c.head_hidden},
                       {"relative_first_layer", c.relative_first_layer},
                       {"bn_placement", c.bn_placement == BnPlacement::PerEdge ? "edge" : "vertex"},
                       {"bn_momentum", c.bn_momentum},
                       {"bn_eps", c.bn_eps},
                       {"seed", c.seed}};
    for (const auto& w : c.widths) {
        j["widths"].push_back({{"geo_hidden", w.geo_hidden}, {"geo_out", w.geo_out}, {"euc_hidden", w.euc_hidden}, {"euc_out", w.euc_out}});
    }
    j["euclidean"] = nlohmann::json::array();
    for (const auto& n : c.euclidean) j["euclidean"].push_back(neighborhood_json(n));
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    try {
        c.levels = j.at("levels");
        c.blocks_per_level = j.at("blocks_per_level");
        c.input_width = j.at("input_width");
        c.classes = j.at("classes");
        c.head_hidden = j.at("head_hidden");
        c.relative_first_layer = j.at("relative_first_layer");
        c.bn_placement = j.at("bn_placement") == "vertex" ? BnPlacement::PerVertex : BnPlacement::PerEdge;
        c.bn_momentum = j.at("bn_momentum");
        c.bn_eps = j.at("bn_eps");
        c.seed = j.at("seed");
        c.widths.clear();
        for (const auto& w : j.at("widths")) {
            c.widths.push_back({w.at("geo_hidden"), w.at("geo_out"), w.at("euc_hidden"), w.at("euc_out")});
        }
        c.euclidean.clear();
        for (const auto& n : j.at("euclidean")) c.euclidean.push_back(neighborhood_from_json(n));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed network config: ") + e.what());
    }
}

NetworkGraph make_graph(const Hierarchy& hierarchy, Index levels, std::optional<Index> res_threshold, std::uint64_t seed) {
    if (hierarchy.level_count() < levels)
        throw ConfigError("network needs " + std::to_string(levels) + " mesh levels, hierarchy has " +
                          std::to_string(hierarchy.level_count()));
    if (static_cast<Index>(hierarchy.euclidean_edges.size()) < levels)
        throw ConfigError("hierarchy has no Euclidean edges for the network levels");
    NetworkGraph g;
    for (Index l = 0; l < levels; ++l) {
        g.geodesic.push_back(with_self_loop_fallback(hierarchy.geodesic_edges[l]));
        const EdgeSet& euc = hierarchy.euclidean_edges[l];
        g.euclidean.push_back(with_self_loop_fallback(
            res_threshold ? res_sample(euc, *res_threshold, seed * 0x100000001b3ULL + static_cast<std::uint64_t>(l)) : euc));
        if (l + 1 < levels) g.traces.push_back(hierarchy.traces[l]);
    }
    g.graph_offsets = {0, g.vertex_count(0)};
    return g;
}

NetworkGraph batch_graphs(std::span<const NetworkGraph> graphs) {
    if (graphs.empty()) throw ValidationError("cannot batch zero graphs");
    const Index levels = graphs.front().level_count();
    NetworkGraph out;
    for (const auto& g : graphs) {
        if (g.level_count() != levels) throw ValidationError("batched graphs differ in level count");
    }
    std::vector<EdgeSet> parts(graphs.size());
    for (Index l = 0; l < levels; ++l) {
        for (std::size_t k = 0; k < graphs.size(); ++k) parts[k] = graphs[k].geodesic[l];
        out.geodesic.push_back(concatenate(parts));
        for (std::size_t k = 0; k < graphs.size(); ++k) parts[k] = graphs[k].euclidean[l];
        out.euclidean.push_back(concatenate(parts));
        if (l + 1 < levels) {
            PoolingTraceMap t;
            for (const auto& g : graphs) {
                for (Index a : g.traces[l].assignment) t.assignment.push_back(a + t.coarse_count);
                t.coarse_count += g.traces[l].coarse_count;
            }
            out.traces.push_back(std::move(t));
        }
    }
    for (const auto& g : graphs) {
        const Index base = out.graph_offsets.back();
        for (std::size_t k = 1; k < g.graph_offsets.size(); ++k) out.graph_offsets.push_back(base + g.graph_offsets[k]);
    }
    return out;
}

namespace {

std::optional<EdgeConvSpec> branch_spec(Index in, Index hidden, Index out, bool relative, const NetworkConfig& c) {
    if (out == 0) return std::nullopt;
    EdgeConvSpec s;
    s.in = in;
    s.widths = {hidden, out};
    s.relative = relative;
    s.placement = c.bn_placement;
    s.bn_momentum = c.bn_momentum;
    s.bn_eps = c.bn_eps;
    return s;
}

DualBlock make_block(Index in, const LevelWidths& w, bool relative, const NetworkConfig& c, const std::string& name) {
    return DualBlock(branch_spec(in, w.geo_hidden, w.geo_out, relative, c),
                     branch_spec(in, w.euc_hidden, w.euc_out, relative, c), name);
}

/// Adjoint of mean pooling: every fine vertex receives its group's gradient
/// divided by the group size.
FeatureMatrix pool_mean_backward(const FeatureMatrix& dcoarse, const PoolingTraceMap& trace) {
    std::vector<Index> count(trace.coarse_count, 0);
    for (Index a : trace.assignment) ++count[a];
    FeatureMatrix dfine(trace.fine_count(), dcoarse.cols());
    for (Index i = 0; i < trace.fine_count(); ++i) {
        const Index a = trace.assignment[i];
        dfine.row(i) = dcoarse.row(a) / static_cast<double>(count[a]);
    }
    return dfine;
}

}  // namespace

Network::Network(const NetworkConfig& config) : config_(config) {
    config_.validate();
    const Index levels = config_.levels;
    Index in = config_.input_width;
    encoder.resize(levels);
    for (Index l = 0; l < levels; ++l) {
        for (Index b = 0; b < config_.blocks_per_level; ++b) {
            const bool relative = config_.relative_first_layer && l == 0 && b == 0;
            encoder[l].push_back(make_block(in, config_.widths[l], relative, config_,
                                            "enc" + std::to_string(l) + ".block" + std::to_string(b)));
            in = encoder[l].back().out();
        }
    }
    decoder.resize(std::max<Index>(levels - 1, 0));
    for (Index l = levels - 2; l >= 0; --l) {
        in = config_.widths[l + 1].out() + config_.widths[l].out();
        for (Index b = 0; b < config_.blocks_per_level; ++b) {
            decoder[l].push_back(make_block(in, config_.widths[l], false, config_,
                                            "dec" + std::to_string(l) + ".block" + std::to_string(b)));
            in = decoder[l].back().out();
        }
    }
    const Index top = levels > 1 ? decoder[0].back().out() : encoder[0].back().out();
    head_linear = Linear(top, config_.head_hidden, "head.lin");
    head_norm = BatchNorm(config_.head_hidden, "head.bn", config_.bn_momentum, config_.bn_eps);
    classifier = Linear(config_.head_hidden, config_.classes, "classifier");

    std::mt19937_64 rng(config_.seed);
    for (auto& level : encoder) {
        for (auto& block : level) block.init(rng);
    }
    for (Index l = levels - 2; l >= 0; --l) {
        for (auto& block : decoder[l]) block.init(rng);
    }
    head_linear.init(rng);
    classifier.init(rng);
}

Registry Network::registry() {
    Registry r;
    for (auto& level : encoder) {
        for (auto& block : level) block.collect(r);
    }
    for (Index l = static_cast<Index>(decoder.size()) - 1; l >= 0; --l) {
        for (auto& block : decoder[l]) block.collect(r);
    }
    head_linear.collect(r);
    head_norm.collect(r);
    classifier.collect(r);
    return r;
}

Index Network::parameter_count() {
    Index total = 0;
    for (const Parameter* p : registry().parameters) total += static_cast<Index>(p->value.size());
    return total;
}

void Network::zero_grad() {
    for (Parameter* p : registry().parameters) p->grad.setZero();
}

std::uint64_t Network::activation_signature() const {
    std::uint64_t hash = 0;
    for (const auto& level : encoder)
        for (const DualBlock& b : level) b.mix_masks(hash);
    for (const auto& level : decoder)
        for (const DualBlock& b : level) b.mix_masks(hash);
    head_relu_.mix_mask(hash);
    return hash;
}

void Network::set_track_running_stats(bool track) {
    auto visit = [&](EdgeConv& conv) {
        for (auto& bn : conv.norms) bn.track_running_stats = track;
    };
    for (auto* side : {&encoder, &decoder}) {
        for (auto& level : *side) {
            for (auto& block : level) {
                if (block.geodesic) visit(*block.geodesic);
                if (block.euclidean) visit(*block.euclidean);
            }
        }
    }
    head_norm.track_running_stats = track;
}

FeatureMatrix Network::forward(const NetworkGraph& graph, const FeatureMatrix& features, Mode mode) {
    const Index levels = config_.levels;
    if (graph.level_count() < levels)
        throw ConfigError("graph has " + std::to_string(graph.level_count()) + " levels, network needs " + std::to_string(levels));
    if (features.rows() != graph.vertex_count(0) || features.cols() != config_.input_width)
        throw ValidationError("features are " + std::to_string(features.rows()) + "x" + std::to_string(features.cols()) +
                              ", expected " + std::to_string(graph.vertex_count(0)) + "x" + std::to_string(config_.input_width));
    graph_ = &graph;
    std::vector<FeatureMatrix> skips(levels);
    FeatureMatrix x = features;
    for (Index l = 0; l < levels; ++l) {
        for (std::size_t b = 0; b < encoder[l].size(); ++b) {
            x = encoder[l][b].forward(x, graph.geodesic[l], graph.euclidean[l], mode);
            if (l == 0 && b == 0) first_block_output_ = x;
        }
        if (l + 1 < levels) {
            skips[l] = x;
            x = pool_features(x, graph.traces[l], PoolMode::Mean);
        }
    }
    for (Index l = levels - 2; l >= 0; --l) {
        const FeatureMatrix up = unpool_features(x, graph.traces[l]);
        x.resize(up.rows(), up.cols() + skips[l].cols());
        x << up, skips[l];
        for (auto& block : decoder[l]) x = block.forward(x, graph.geodesic[l], graph.euclidean[l], mode);
    }
    x = head_linear.forward(std::move(x));
    x = head_norm.forward(std::move(x), mode);
    x = head_relu_.forward(std::move(x));
    return classifier.forward(std::move(x));
}

FeatureMatrix Network::backward(const FeatureMatrix& dlogits) {
    if (!graph_) throw Error("network backward without a forward pass");
    const NetworkGraph& graph = *graph_;
    const Index levels = config_.levels;
    FeatureMatrix d = classifier.backward(dlogits);
    d = head_relu_.backward(std::move(d));
    d = head_norm.backward(std::move(d));
    d = head_linear.backward(d);

    std::vector<FeatureMatrix> skip_grads(levels);
    for (Index l = 0; l + 1 < levels; ++l) {
        for (std::size_t b = decoder[l].size(); b-- > 0;) d = decoder[l][b].backward(d);
        const Index up_width = static_cast<Index>(d.cols()) - config_.widths[l].out();
        skip_grads[l] = d.rightCols(config_.widths[l].out());
        d = pool_features(FeatureMatrix(d.leftCols(up_width)), graph.traces[l], PoolMode::Sum);
    }
    for (Index l = levels - 1; l >= 0; --l) {
        if (l + 1 < levels) d = pool_mean_backward(d, graph.traces[l]) + skip_grads[l];
        for (std::size_t b = encoder[l].size(); b-- > 0;) d = encoder[l][b].backward(d);
    }
    return d;
}

}  // namespace dcm::nn
