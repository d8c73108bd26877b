#ifndef DCM_QUADRIC_HPP
#define DCM_QUADRIC_HPP

#include <algorithm>
#include <array>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace dcm {

/// Plane-distance quadric: v^T Q v (v homogeneous) is the sum of squared
/// distances from v to every accumulated plane.
template <typename Scalar>
class Quadric {
public:
    using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
    using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

    Quadric() : q_(Matrix4::Zero()) {}
    explicit Quadric(const Matrix4& q) : q_(q) {}

    /// Plane through `point` with unit `normal`.
    static Quadric from_plane(const Vector3& normal, const Vector3& point) {
        Eigen::Matrix<Scalar, 4, 1> p;
        p << normal, -normal.dot(point);
        return Quadric(p * p.transpose());
    }

    const Matrix4& matrix() const { return q_; }

    Quadric& operator+=(const Quadric& other) {
        q_ += other.q_;
        return *this;
    }
    friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }

    Scalar evaluate(const Vector3& v) const {
        Eigen::Matrix<Scalar, 4, 1> h;
        h << v, Scalar(1);
        return std::max(Scalar(0), h.dot(q_ * h));
    }

    struct Minimizer {
        Vector3 point;
        Scalar cost;
        bool solved;  // false when the fallback candidates were used
    };

    /// Minimizer of the quadric. When the 3x3 system is singular (smallest
    /// eigenvalue below rel_tol times the largest) the best of the fallback
    /// candidates is returned instead.
    Minimizer minimize(const std::array<Vector3, 3>& fallback, Scalar rel_tol = Scalar(1e-10)) const {
        const Eigen::Matrix<Scalar, 3, 3> a = q_.template topLeftCorner<3, 3>();
        const Vector3 b = -q_.template topRightCorner<3, 1>();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> eig(a);
        const auto& lambda = eig.eigenvalues();  // ascending
        if (lambda(2) > Scalar(0) && lambda(0) > rel_tol * lambda(2)) {
            const auto& vecs = eig.eigenvectors();
            const Vector3 v = vecs * (vecs.transpose() * b).cwiseQuotient(lambda);
            if (v.allFinite()) return {v, evaluate(v), true};
        }
        Minimizer best{fallback[0], evaluate(fallback[0]), false};
        for (std::size_t k = 1; k < fallback.size(); ++k) {
            const Scalar c = evaluate(fallback[k]);
            if (c < best.cost) best = {fallback[k], c, false};
        }
        return best;
    }

private:
    Matrix4 q_;
};

}  // namespace dcm

#endif  // DCM_QUADRIC_HPP
