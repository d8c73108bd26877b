#ifndef DCM_NN_OPTIM_HPP
#define DCM_NN_OPTIM_HPP

#include <vector>

#include "dcm/nn/layers.hpp"

namespace dcm::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double decay = 0.5;       // multiplied into the rate every decay_every epochs
    int decay_every = 40;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    double rate_at(int epoch) const;
};

/// Adam with bias correction. Moment buffers are bound to the parameter list
/// by position.
class Adam {
public:
    Adam(std::vector<Parameter*> parameters, AdamConfig config = {});

    /// One update with the rate for `epoch`; gradients are left untouched.
    void step(int epoch);

    long long steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    std::vector<Parameter*> params_;
    std::vector<FeatureMatrix> m_, v_;
    AdamConfig config_;
    long long t_ = 0;
};

}  // namespace dcm::nn

#endif  // DCM_NN_OPTIM_HPP
