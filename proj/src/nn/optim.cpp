#include "dcm/nn/optim.hpp"

#include <cmath>

namespace dcm::nn {

double AdamConfig::rate_at(int epoch) const {
    return learning_rate * std::pow(decay, static_cast<double>(epoch / decay_every));
}

Adam::Adam(std::vector<Parameter*> parameters, AdamConfig config) : params_(std::move(parameters)), config_(config) {
    if (config_.decay_every < 1) throw ConfigError("learning-rate decay interval must be >= 1");
    for (const Parameter* p : params_) {
        m_.push_back(FeatureMatrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(FeatureMatrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step(int epoch) {
    ++t_;
    const double lr = config_.rate_at(epoch);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * p.grad;
        v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.eps);
    }
}

}  // namespace dcm::nn
