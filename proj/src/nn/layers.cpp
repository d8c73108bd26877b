#include "dcm/nn/layers.hpp"

#include <cmath>
#include <utility>

#include "dcm/rng.hpp"

namespace dcm::nn {

RowVector column_sums(const FeatureMatrix& x) {
    RowVector s = RowVector::Zero(x.cols());
    const Index w = static_cast<Index>(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double* xi = x.data() + static_cast<std::ptrdiff_t>(i) * w;
        for (Index c = 0; c < w; ++c) s[c] += xi[c];
    }
    return s;
}

Linear::Linear(Index in, Index out, const std::string& name)
    : weight(name + ".weight", in, out), bias(name + ".bias", 1, out) {}

void Linear::init(std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / std::max<Index>(in(), 1));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index k = 0; k < weight.value.size(); ++k) weight.value.data()[k] = u(rng);
    bias.value.setZero();
}

FeatureMatrix Linear::forward(FeatureMatrix x) {
    if (x.cols() != in())
        throw ValidationError(weight.name + ": input width " + std::to_string(x.cols()) + ", expected " + std::to_string(in()));
    x_ = std::move(x);
    FeatureMatrix y = x_ * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

FeatureMatrix Linear::backward(const FeatureMatrix& dy) {
    weight.grad.noalias() += x_.transpose() * dy;
    bias.grad += column_sums(dy);
    return dy * weight.value.transpose();
}

void Linear::collect(Registry& r) {
    r.parameters.push_back(&weight);
    r.parameters.push_back(&bias);
}

BatchNorm::BatchNorm(Index width, const std::string& name, double momentum_, double eps_)
    : gamma(name + ".gamma", 1, width),
      beta(name + ".beta", 1, width),
      running_mean(FeatureMatrix::Zero(1, width)),
      running_var(FeatureMatrix::Ones(1, width)),
      momentum(momentum_),
      eps(eps_),
      name_(name) {
    gamma.value.setOnes();
}

FeatureMatrix BatchNorm::forward(FeatureMatrix x, Mode mode) {
    if (x.cols() != width())
        throw ValidationError(name_ + ": input width " + std::to_string(x.cols()) + ", expected " + std::to_string(width()));
    mode_ = mode;
    const Index rows = static_cast<Index>(x.rows()), w = width();
    RowVector mean, var;
    if (mode == Mode::Train) {
        if (rows == 0) throw ValidationError(name_ + ": empty batch in train mode");
        const double n = static_cast<double>(rows);
        mean = column_sums(x) / n;
        var = RowVector::Zero(w);
        for (Index i = 0; i < rows; ++i) {
            const double* xi = x.data() + static_cast<std::ptrdiff_t>(i) * w;
            for (Index c = 0; c < w; ++c) {
                const double d = xi[c] - mean[c];
                var[c] += d * d;
            }
        }
        var /= n;
        if (track_running_stats) {
            const double unbias = rows > 1 ? n / (n - 1.0) : 1.0;
            running_mean = (1.0 - momentum) * running_mean + momentum * mean;
            running_var = (1.0 - momentum) * running_var + momentum * unbias * var;
        }
    } else {
        mean = running_mean.row(0);
        var = running_var.row(0);
    }
    inv_std_ = (var.array() + eps).rsqrt().matrix();
    xhat_.resize(rows, w);
    const double* g = gamma.value.data();
    const double* b = beta.value.data();
    for (Index i = 0; i < rows; ++i) {
        const std::ptrdiff_t o = static_cast<std::ptrdiff_t>(i) * w;
        for (Index c = 0; c < w; ++c) {
            const double h = (x.data()[o + c] - mean[c]) * inv_std_[c];
            xhat_.data()[o + c] = h;
            x.data()[o + c] = h * g[c] + b[c];
        }
    }
    return x;
}

FeatureMatrix BatchNorm::backward(FeatureMatrix dy) {
    const Index rows = static_cast<Index>(dy.rows()), w = width();
    RowVector sum_dy = RowVector::Zero(w), sum_dy_xhat = RowVector::Zero(w);
    for (Index i = 0; i < rows; ++i) {
        const std::ptrdiff_t o = static_cast<std::ptrdiff_t>(i) * w;
        for (Index c = 0; c < w; ++c) {
            sum_dy[c] += dy.data()[o + c];
            sum_dy_xhat[c] += dy.data()[o + c] * xhat_.data()[o + c];
        }
    }
    gamma.grad += sum_dy_xhat;
    beta.grad += sum_dy;
    const RowVector scale = (gamma.value.row(0).array() * inv_std_.array()).matrix();
    if (mode_ == Mode::Eval) {
        dy.array().rowwise() *= scale.array();
        return dy;
    }
    const double n = static_cast<double>(rows);
    const RowVector mean_dy = sum_dy / n, mean_dy_xhat = sum_dy_xhat / n;
    for (Index i = 0; i < rows; ++i) {
        const std::ptrdiff_t o = static_cast<std::ptrdiff_t>(i) * w;
        for (Index c = 0; c < w; ++c)
            dy.data()[o + c] = scale[c] * (dy.data()[o + c] - mean_dy[c] - xhat_.data()[o + c] * mean_dy_xhat[c]);
    }
    return dy;
}

void BatchNorm::collect(Registry& r) {
    r.parameters.push_back(&gamma);
    r.parameters.push_back(&beta);
    r.buffers.push_back({name_ + ".running_mean", &running_mean});
    r.buffers.push_back({name_ + ".running_var", &running_var});
}

FeatureMatrix Relu::forward(FeatureMatrix x) {
    mask_.resize(x.rows(), x.cols());
    for (Index k = 0; k < x.size(); ++k) {
        const bool on = x.data()[k] > 0.0;
        mask_.data()[k] = on;
        if (!on) x.data()[k] = 0.0;
    }
    return x;
}

FeatureMatrix Relu::backward(FeatureMatrix dy) const {
    for (Index k = 0; k < dy.size(); ++k)
        if (!mask_.data()[k]) dy.data()[k] = 0.0;
    return dy;
}

void Relu::mix_mask(std::uint64_t& hash) const {
    std::uint64_t word = 0;
    int bits = 0;
    auto flush = [&] {
        hash = splitmix64(hash ^ word);
        word = 0;
        bits = 0;
    };
    for (Index k = 0; k < mask_.size(); ++k) {
        word = (word << 1) | static_cast<std::uint64_t>(mask_.data()[k]);
        if (++bits == 64) flush();
    }
    flush();
}

}  // namespace dcm::nn
