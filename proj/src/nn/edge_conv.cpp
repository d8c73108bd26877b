#include "dcm/nn/edge_conv.hpp"

#include <algorithm>
#include <utility>

namespace dcm::nn {

namespace {

FeatureMatrix neighborhood_mean(const FeatureMatrix& z, const EdgeSet& edges) {
    const Index n = edges.vertex_count();
    FeatureMatrix y(n, z.cols());
    const auto& off = edges.offsets();
    const Index w = static_cast<Index>(z.cols());
    for (Index i = 0; i < n; ++i) {
        double* yi = y.data() + static_cast<std::ptrdiff_t>(i) * w;
        std::fill(yi, yi + w, 0.0);
        for (Index k = off[i]; k < off[i + 1]; ++k) {
            const double* zk = z.data() + static_cast<std::ptrdiff_t>(k) * w;
            for (Index c = 0; c < w; ++c) yi[c] += zk[c];
        }
        const double inv = 1.0 / static_cast<double>(off[i + 1] - off[i]);
        for (Index c = 0; c < w; ++c) yi[c] *= inv;
    }
    return y;
}

FeatureMatrix neighborhood_mean_backward(const FeatureMatrix& dy, const EdgeSet& edges) {
    FeatureMatrix dz(edges.edge_count(), dy.cols());
    const auto& off = edges.offsets();
    for (Index i = 0; i < edges.vertex_count(); ++i) {
        const Index count = off[i + 1] - off[i];
        dz.middleRows(off[i], count).rowwise() = dy.row(i) / static_cast<double>(count);
    }
    return dz;
}

}  // namespace

EdgeConv::EdgeConv(const EdgeConvSpec& spec, const std::string& name) : spec_(spec) {
    if (spec.in <= 0 || spec.widths.empty()) throw ConfigError(name + ": edge convolution needs input and layer widths");
    Index in = spec.phi_input();
    for (std::size_t k = 0; k < spec.widths.size(); ++k) {
        const Index w = spec.widths[k];
        if (w <= 0) throw ConfigError(name + ": layer widths must be positive");
        const std::string layer = name + ".phi" + std::to_string(k);
        linears.emplace_back(in, w, layer + ".lin");
        if (spec.batch_norm) norms.emplace_back(w, layer + ".bn", spec.bn_momentum, spec.bn_eps);
        in = w;
    }
    stages_.resize(spec.widths.size());
}

void EdgeConv::init(std::mt19937_64& rng) {
    for (auto& lin : linears) lin.init(rng);
}

void EdgeConv::collect(Registry& r) {
    for (std::size_t k = 0; k < linears.size(); ++k) {
        linears[k].collect(r);
        if (spec_.batch_norm) norms[k].collect(r);
    }
}

void EdgeConv::mix_masks(std::uint64_t& hash) const {
    for (const Stage& s : stages_) s.relu.mix_mask(hash);
}

FeatureMatrix EdgeConv::first_linear(const FeatureMatrix& x) {
    const EdgeSet& e = *edges_;
    const auto& targets = e.targets();
    Linear& lin = linears.front();
    const Index edge_count = e.edge_count();
    if (spec_.relative) {
        FeatureMatrix diff(edge_count, spec_.in);
        for (Index k = 0; k < edge_count; ++k) diff.row(k) = x.row(targets[k]) - x.row(centers_[k]);
        return lin.forward(std::move(diff));
    }
    const Index f = spec_.in;
    const FeatureMatrix a = lin.weight.value.topRows(f) - lin.weight.value.bottomRows(f);
    const FeatureMatrix p = x * a;
    const FeatureMatrix q = x * lin.weight.value.bottomRows(f);
    const Index w = lin.out();
    const double* b = lin.bias.value.data();
    FeatureMatrix z(edge_count, w);
    for (Index k = 0; k < edge_count; ++k) {
        const double* pk = p.data() + static_cast<std::ptrdiff_t>(centers_[k]) * w;
        const double* qk = q.data() + static_cast<std::ptrdiff_t>(targets[k]) * w;
        double* zk = z.data() + static_cast<std::ptrdiff_t>(k) * w;
        for (Index c = 0; c < w; ++c) zk[c] = pk[c] + qk[c] + b[c];
    }
    return z;
}

FeatureMatrix EdgeConv::first_linear_backward(const FeatureMatrix& dz) {
    const EdgeSet& e = *edges_;
    const auto& targets = e.targets();
    Linear& lin = linears.front();
    const Index edge_count = e.edge_count();
    FeatureMatrix dx = FeatureMatrix::Zero(vertex_count_, spec_.in);
    if (spec_.relative) {
        const FeatureMatrix ddiff = lin.backward(dz);
        for (Index k = 0; k < edge_count; ++k) {
            dx.row(targets[k]) += ddiff.row(k);
            dx.row(centers_[k]) -= ddiff.row(k);
        }
        return dx;
    }
    const Index f = spec_.in;
    FeatureMatrix dp = FeatureMatrix::Zero(vertex_count_, lin.out());
    FeatureMatrix dq = FeatureMatrix::Zero(vertex_count_, lin.out());
    const Index w = lin.out();
    for (Index k = 0; k < edge_count; ++k) {
        const double* dk = dz.data() + static_cast<std::ptrdiff_t>(k) * w;
        double* pk = dp.data() + static_cast<std::ptrdiff_t>(centers_[k]) * w;
        double* qk = dq.data() + static_cast<std::ptrdiff_t>(targets[k]) * w;
        for (Index c = 0; c < w; ++c) {
            pk[c] += dk[c];
            qk[c] += dk[c];
        }
    }
    const FeatureMatrix da = x_.transpose() * dp;
    const FeatureMatrix db = x_.transpose() * dq;
    lin.weight.grad.topRows(f) += da;
    lin.weight.grad.bottomRows(f) += db - da;
    lin.bias.grad += column_sums(dz);
    const FeatureMatrix a = lin.weight.value.topRows(f) - lin.weight.value.bottomRows(f);
    dx.noalias() += dp * a.transpose();
    dx.noalias() += dq * lin.weight.value.bottomRows(f).transpose();
    return dx;
}

FeatureMatrix EdgeConv::forward(const FeatureMatrix& x, const EdgeSet& edges, Mode mode) {
    if (x.cols() != spec_.in)
        throw ValidationError(linears.front().weight.name + ": input width " + std::to_string(x.cols()) + ", expected " +
                              std::to_string(spec_.in));
    if (edges.vertex_count() != x.rows())
        throw ValidationError("edge convolution: edge set covers " + std::to_string(edges.vertex_count()) +
                              " vertices, features have " + std::to_string(x.rows()) + " rows");
    if (edges.empty_count() > 0) throw ValidationError("edge convolution: empty neighborhood (apply the self-loop fallback)");
    edges_ = &edges;
    vertex_count_ = static_cast<Index>(x.rows());
    if (!spec_.relative) x_ = x;
    centers_.resize(edges.edge_count());
    for (Index i = 0; i < edges.vertex_count(); ++i) {
        for (Index k = edges.offsets()[i]; k < edges.offsets()[i + 1]; ++k) centers_[k] = i;
    }

    const std::size_t layers = linears.size();
    const bool vertex_norm = spec_.batch_norm && spec_.placement == BnPlacement::PerVertex;
    FeatureMatrix z = first_linear(x);
    for (std::size_t k = 0; k < layers; ++k) {
        if (k > 0) z = linears[k].forward(std::move(z));
        if (k + 1 == layers && vertex_norm) z = neighborhood_mean(z, edges);
        if (spec_.batch_norm) z = norms[k].forward(std::move(z), mode);
        if (spec_.relu) z = stages_[k].relu.forward(std::move(z));
    }
    if (!vertex_norm) z = neighborhood_mean(z, edges);
    return z;
}

FeatureMatrix EdgeConv::backward(const FeatureMatrix& dy) {
    if (!edges_) throw Error("edge convolution backward without a forward pass");
    const std::size_t layers = linears.size();
    const bool vertex_norm = spec_.batch_norm && spec_.placement == BnPlacement::PerVertex;
    FeatureMatrix dz = vertex_norm ? dy : neighborhood_mean_backward(dy, *edges_);
    for (std::size_t k = layers; k-- > 0;) {
        if (spec_.relu) dz = stages_[k].relu.backward(std::move(dz));
        if (spec_.batch_norm) dz = norms[k].backward(std::move(dz));
        if (k + 1 == layers && vertex_norm) dz = neighborhood_mean_backward(dz, *edges_);
        if (k > 0) dz = linears[k].backward(dz);
    }
    return first_linear_backward(dz);
}

DualBlock::DualBlock(std::optional<EdgeConvSpec> geo, std::optional<EdgeConvSpec> euc, const std::string& name) {
    if (!geo && !euc) throw ConfigError(name + ": a block needs at least one branch");
    if (geo && euc && geo->in != euc->in) throw ConfigError(name + ": branches disagree on the input width");
    in_ = geo ? geo->in : euc->in;
    if (geo) geodesic.emplace(*geo, name + ".geo");
    if (euc) euclidean.emplace(*euc, name + ".euc");
}

void DualBlock::init(std::mt19937_64& rng) {
    if (geodesic) geodesic->init(rng);
    if (euclidean) euclidean->init(rng);
}

void DualBlock::collect(Registry& r) {
    if (geodesic) geodesic->collect(r);
    if (euclidean) euclidean->collect(r);
}

void DualBlock::mix_masks(std::uint64_t& hash) const {
    if (geodesic) geodesic->mix_masks(hash);
    if (euclidean) euclidean->mix_masks(hash);
}

Index DualBlock::out() const {
    return (geodesic ? geodesic->spec().out() : 0) + (euclidean ? euclidean->spec().out() : 0);
}

FeatureMatrix DualBlock::forward(const FeatureMatrix& x, const EdgeSet& geo, const EdgeSet& euc, Mode mode) {
    FeatureMatrix y(x.rows(), out());
    Index col = 0;
    if (geodesic) {
        const Index w = geodesic->spec().out();
        y.middleCols(col, w) = geodesic->forward(x, geo, mode);
        col += w;
    }
    if (euclidean) y.middleCols(col, euclidean->spec().out()) = euclidean->forward(x, euc, mode);
    if (residual()) y += x;
    return y;
}

FeatureMatrix DualBlock::backward(const FeatureMatrix& dy) {
    FeatureMatrix dx = residual() ? dy : FeatureMatrix::Zero(dy.rows(), in_);
    Index col = 0;
    if (geodesic) {
        const Index w = geodesic->spec().out();
        dx += geodesic->backward(dy.middleCols(col, w));
        col += w;
    }
    if (euclidean) dx += euclidean->backward(dy.middleCols(col, euclidean->spec().out()));
    return dx;
}

}  // namespace dcm::nn
