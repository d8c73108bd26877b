#ifndef DCM_NN_LOSS_HPP
#define DCM_NN_LOSS_HPP

#include <span>

#include "dcm/types.hpp"

namespace dcm::nn {

struct LossResult {
    double loss = 0.0;
    FeatureMatrix grad;  // d loss / d logits
    Index labeled = 0;
};

/// Softmax cross-entropy averaged over labeled vertices; kUnlabeled rows get
/// zero loss and zero gradient. Throws ValidationError with no labeled row.
LossResult cross_entropy_loss(const FeatureMatrix& logits, const Labels& labels);

/// Sum over batched graphs of each graph's mean cross-entropy. `offsets`
/// delimits the graphs' rows; graphs without labels contribute nothing.
LossResult batched_cross_entropy(const FeatureMatrix& logits, const Labels& labels, std::span<const Index> offsets);

}  // namespace dcm::nn

#endif  // DCM_NN_LOSS_HPP
