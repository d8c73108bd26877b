#ifndef DCM_NN_LAYERS_HPP
#define DCM_NN_LAYERS_HPP

#include <random>
#include <string>
#include <vector>

#include "dcm/types.hpp"

namespace dcm::nn {

enum class Mode { Train, Eval };

/// Sum over rows, one pass in storage order.
RowVector column_sums(const FeatureMatrix& x);

/// Trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    FeatureMatrix value;
    FeatureMatrix grad;

    Parameter() = default;
    Parameter(std::string n, Index rows, Index cols)
        : name(std::move(n)), value(FeatureMatrix::Zero(rows, cols)), grad(FeatureMatrix::Zero(rows, cols)) {}
};

/// Non-trainable state saved with a checkpoint (batch-norm running stats).
struct Buffer {
    std::string name;
    FeatureMatrix* value;
};

struct Registry {
    std::vector<Parameter*> parameters;
    std::vector<Buffer> buffers;
};

/// y = x W + b with W stored in x out.
class Linear {
public:
    Linear() = default;
    Linear(Index in, Index out, const std::string& name);

    /// Uniform fan-in scaled weights, zero bias.
    void init(std::mt19937_64& rng);

    FeatureMatrix forward(FeatureMatrix x);
    FeatureMatrix backward(const FeatureMatrix& dy);

    void collect(Registry& r);
    Index in() const { return static_cast<Index>(weight.value.rows()); }
    Index out() const { return static_cast<Index>(weight.value.cols()); }

    Parameter weight;
    Parameter bias;

private:
    FeatureMatrix x_;
};

/// Per-column normalization. Train mode uses batch statistics (biased
/// variance) and updates running stats with the unbiased variance; eval mode
/// uses the running stats.
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(Index width, const std::string& name, double momentum = 0.1, double eps = 1e-5);

    FeatureMatrix forward(FeatureMatrix x, Mode mode);
    FeatureMatrix backward(FeatureMatrix dy);

    void collect(Registry& r);
    Index width() const { return static_cast<Index>(gamma.value.cols()); }

    Parameter gamma;
    Parameter beta;
    FeatureMatrix running_mean;  // 1 x width
    FeatureMatrix running_var;   // 1 x width
    double momentum = 0.1;
    double eps = 1e-5;
    bool track_running_stats = true;

private:
    std::string name_;
    Mode mode_ = Mode::Train;
    FeatureMatrix xhat_;
    RowVector inv_std_;
};

class Relu {
public:
    FeatureMatrix forward(FeatureMatrix x);
    FeatureMatrix backward(FeatureMatrix dy) const;

    /// Folds the activation mask of the last forward pass into `hash`.
    void mix_mask(std::uint64_t& hash) const;

private:
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask_;
};

}  // namespace dcm::nn

#endif  // DCM_NN_LAYERS_HPP
