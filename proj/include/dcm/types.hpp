#ifndef DCM_TYPES_HPP
#define DCM_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dcm {

using Index = std::int32_t;

/// Per-vertex feature rows; one row per vertex, one column per channel.
template <typename Scalar>
using FeatureMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureMatrix = FeatureMatrixT<double>;

template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using RowVector = RowVectorT<double>;

template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points = PointsT<double>;

using Faces = Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Labels = Eigen::Matrix<Index, Eigen::Dynamic, 1>;
using Vec3 = Eigen::Vector3d;

/// Sentinel class index for vertices without ground truth.
inline constexpr Index kUnlabeled = -1;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A domain invariant was violated (malformed mesh, trace, edge list...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or out-of-range configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File system or file-format failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace dcm

#endif  // DCM_TYPES_HPP
