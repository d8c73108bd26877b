#include "dcm/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/nn/loss.hpp"

namespace dcm::nn {

GradCheckReport finite_difference_check(const std::vector<std::pair<std::string, FeatureMatrix*>>& tensors,
                                        const std::vector<FeatureMatrix>& analytic, const std::function<double()>& loss,
                                        double tolerance, double h, const std::function<std::uint64_t()>& signature) {
    if (tensors.size() != analytic.size()) throw ValidationError("gradient check: tensor and gradient counts differ");
    GradCheckReport report;
    report.tolerance = tolerance;
    std::uint64_t base = 0;
    if (signature) {
        loss();
        base = signature();
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        FeatureMatrix& value = *tensors[t].second;
        const FeatureMatrix& grad = analytic[t];
        if (grad.rows() != value.rows() || grad.cols() != value.cols())
            throw ValidationError("gradient check: shape mismatch for " + tensors[t].first);
        FeatureMatrix numeric = grad;  // skipped entries compare equal
        TensorCheck c;
        c.name = tensors[t].first;
        c.entries = static_cast<Index>(value.size());
        for (Index k = 0; k < value.size(); ++k) {
            const double saved = value.data()[k];
            value.data()[k] = saved + h;
            const double up = loss();
            const bool kink_up = signature && signature() != base;
            value.data()[k] = saved - h;
            const double down = loss();
            const bool kink_down = signature && signature() != base;
            value.data()[k] = saved;
            if (kink_up || kink_down) {
                ++c.skipped;
                continue;
            }
            numeric.data()[k] = (up - down) / (2.0 * h);
        }
        if (value.size() > 0) {
            const double scale = std::max({grad.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), kScaleFloor});
            c.error = (grad - numeric).cwiseAbs().maxCoeff() / scale;
        }
        report.entries += c.entries;
        report.skipped += c.skipped;
        if (c.error >= report.max_error) {
            report.max_error = c.error;
            report.worst = c.name;
        }
        report.tensors.push_back(std::move(c));
    }
    report.passed = report.max_error < tolerance;
    return report;
}

GradCheckReport check_network_gradients(Network& net, const NetworkGraph& graph, const FeatureMatrix& features,
                                        const Labels& labels, double tolerance, double h, double corrupt) {
    Registry reg = net.registry();
    std::vector<FeatureMatrix> saved_buffers;
    for (const auto& b : reg.buffers) saved_buffers.push_back(*b.value);
    net.set_track_running_stats(false);

    FeatureMatrix x = features;
    net.zero_grad();
    const FeatureMatrix logits = net.forward(graph, x, Mode::Train);
    const LossResult base = batched_cross_entropy(logits, labels, graph.graph_offsets);
    const FeatureMatrix dx = net.backward(base.grad);

    std::vector<std::pair<std::string, FeatureMatrix*>> tensors;
    std::vector<FeatureMatrix> analytic;
    for (Parameter* p : reg.parameters) {
        tensors.emplace_back(p->name, &p->value);
        analytic.push_back(corrupt * p->grad);
    }
    tensors.emplace_back("input", &x);
    analytic.push_back(corrupt * dx);

    auto loss = [&]() {
        return batched_cross_entropy(net.forward(graph, x, Mode::Train), labels, graph.graph_offsets).loss;
    };
    auto signature = [&]() { return net.activation_signature(); };
    GradCheckReport report = finite_difference_check(tensors, analytic, loss, tolerance, h, signature);

    net.set_track_running_stats(true);
    for (std::size_t k = 0; k < reg.buffers.size(); ++k) *reg.buffers[k].value = saved_buffers[k];
    return report;
}

}  // namespace dcm::nn
