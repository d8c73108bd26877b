#ifndef DCM_NN_GRADCHECK_HPP
#define DCM_NN_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcm/nn/network.hpp"

namespace dcm::nn {

/// Denominator floor of the relative error. Biases feeding batch norm have an
/// exact zero gradient; their central differences are pure rounding noise.
inline constexpr double kScaleFloor = 1e-5;

struct TensorCheck {
    std::string name;
    Index entries = 0;
    Index skipped = 0;   // probes that crossed a ReLU kink
    double error = 0.0;  // max |analytic - numeric| / max(max |analytic|, max |numeric|, kScaleFloor)
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double tolerance = 0.0;
    double max_error = 0.0;
    Index entries = 0;
    Index skipped = 0;
    bool passed = false;
    std::string worst;
};

/// Central differences of `loss` with step h for every entry of every tensor,
/// compared against `analytic` (one gradient matrix per tensor). When
/// `signature` is given it is read after each loss evaluation; a probe whose
/// signature differs from the unperturbed one straddles a kink and is skipped.
GradCheckReport finite_difference_check(const std::vector<std::pair<std::string, FeatureMatrix*>>& tensors,
                                        const std::vector<FeatureMatrix>& analytic, const std::function<double()>& loss,
                                        double tolerance, double h = 1e-5,
                                        const std::function<std::uint64_t()>& signature = {});

/// Full check of a network in train mode: every parameter tensor and the
/// input features. Running stats are frozen during the probe and restored.
/// Probes that flip any ReLU mask are skipped and counted.
/// `corrupt` scales the analytic gradients, for checking the harness itself.
GradCheckReport check_network_gradients(Network& net, const NetworkGraph& graph, const FeatureMatrix& features,
                                        const Labels& labels, double tolerance, double h = 1e-5, double corrupt = 1.0);

}  // namespace dcm::nn

#endif  // DCM_NN_GRADCHECK_HPP
