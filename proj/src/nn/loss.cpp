#include "dcm/nn/loss.hpp"

#include <cmath>

namespace dcm::nn {

namespace {

/// Unnormalized: returns the summed loss and writes per-row gradients of the
/// summed loss. Rows outside [begin, end) are untouched.
double summed_cross_entropy(const FeatureMatrix& logits, const Labels& labels, Index begin, Index end,
                            FeatureMatrix& grad, Index& labeled) {
    double total = 0.0;
    labeled = 0;
    const Index classes = static_cast<Index>(logits.cols());
    for (Index i = begin; i < end; ++i) {
        const Index y = labels(i);
        if (y == kUnlabeled) continue;
        if (y < 0 || y >= classes)
            throw ValidationError("label " + std::to_string(y) + " at vertex " + std::to_string(i) + " outside [0," +
                                  std::to_string(classes) + ")");
        const double m = logits.row(i).maxCoeff();
        const RowVector e = (logits.row(i).array() - m).exp().matrix();
        const double s = e.sum();
        total += std::log(s) - (logits(i, y) - m);
        grad.row(i) = e / s;
        grad(i, y) -= 1.0;
        ++labeled;
    }
    return total;
}

}  // namespace

LossResult cross_entropy_loss(const FeatureMatrix& logits, const Labels& labels) {
    const Index n = static_cast<Index>(logits.rows());
    return batched_cross_entropy(logits, labels, std::vector<Index>{0, n});
}

LossResult batched_cross_entropy(const FeatureMatrix& logits, const Labels& labels, std::span<const Index> offsets) {
    if (labels.size() != logits.rows())
        throw ValidationError("loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows()) + " rows");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != logits.rows())
        throw ValidationError("loss: graph offsets do not cover the logits");
    LossResult r;
    r.grad = FeatureMatrix::Zero(logits.rows(), logits.cols());
    for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
        Index labeled = 0;
        const double total = summed_cross_entropy(logits, labels, offsets[g], offsets[g + 1], r.grad, labeled);
        if (labeled == 0) continue;
        r.loss += total / labeled;
        r.grad.middleRows(offsets[g], offsets[g + 1] - offsets[g]) /= static_cast<double>(labeled);
        r.labeled += labeled;
    }
    if (r.labeled == 0) throw ValidationError("loss: no labeled vertex");
    return r;
}

}  // namespace dcm::nn
