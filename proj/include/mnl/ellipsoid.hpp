#pragma once

#include "mnl/core.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace mnl {

namespace detail {

/// Cholesky factorization; on failure retries with a growing diagonal jitter
/// starting at 1e-10.
inline Eigen::LLT<Matrix> robust_llt(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success) {
        if (jitter > 1e6) throw NumericalFailure("Cholesky factorization failed", jitter);
        llt.compute(m + jitter * Matrix::Identity(m.rows(), m.cols()));
        jitter *= 10.0;
    }
    return llt;
}

} // namespace detail

/// {theta : ||theta - center||_shape <= radius} with a symmetric positive
/// definite shape. The radius is stored unsquared; it may be +infinity for an
/// unconstrained set.
class Ellipsoid {
public:
    Ellipsoid() = default;

    Ellipsoid(Vector center, Matrix shape, double radius)
        : center_(std::move(center)), shape_(std::move(shape)), radius_(radius) {
        detail::require(center_.size() >= 1 && center_.allFinite(), "Ellipsoid: center must be finite");
        detail::require(shape_.rows() == center_.size() && shape_.cols() == center_.size(),
                        "Ellipsoid: shape must be d x d");
        detail::require(shape_.allFinite(), "Ellipsoid: shape must be finite");
        detail::require(radius_ >= 0.0 && !std::isnan(radius_), "Ellipsoid: radius must be >= 0");
        shape_ = 0.5 * (shape_ + shape_.transpose()).eval();
        llt_ = detail::robust_llt(shape_);
    }

    /// Sets written as ||theta - center||^2_shape <= threshold.
    static Ellipsoid from_squared_threshold(Vector center, Matrix shape, double threshold) {
        detail::require(threshold >= 0.0, "Ellipsoid: squared threshold must be >= 0");
        return Ellipsoid(std::move(center), std::move(shape), std::sqrt(threshold));
    }

    static Ellipsoid ball(Vector center, double radius) {
        const auto d = center.size();
        return Ellipsoid(std::move(center), Matrix::Identity(d, d), radius);
    }

    static Ellipsoid unbounded(Eigen::Index dim) {
        return ball(Vector::Zero(dim), std::numeric_limits<double>::infinity());
    }

    Eigen::Index dim() const noexcept { return center_.size(); }
    const Vector& center() const noexcept { return center_; }
    const Matrix& shape() const noexcept { return shape_; }
    double radius() const noexcept { return radius_; }
    bool bounded() const noexcept { return std::isfinite(radius_); }

    /// ||x||_shape
    double norm(const Vector& x) const { return std::sqrt(std::max(0.0, x.dot(shape_ * x))); }

    /// shape^{-1} g
    Vector solve(const Vector& g) const { return llt_.solve(g); }

    /// ||g||_{shape^{-1}}
    double dual_norm(const Vector& g) const { return std::sqrt(std::max(0.0, g.dot(solve(g)))); }

    double distance(const Vector& theta) const { return norm(theta - center_); }

    bool contains(const Vector& theta, double tol = 1e-12) const {
        return distance(theta) <= radius_ + tol * std::max(1.0, radius_);
    }

    /// argmax_{theta in set} g^T theta = center + radius shape^{-1} g / ||g||_{shape^{-1}}.
    /// Returns the center for g = 0 or radius 0.
    Vector support_point(const Vector& g) const {
        detail::require(bounded(), "Ellipsoid: support point of an unbounded set");
        const Vector dir = solve(g);
        const double dn = std::sqrt(std::max(0.0, g.dot(dir)));
        if (dn == 0.0 || radius_ == 0.0) return center_;
        return center_ + (radius_ / dn) * dir;
    }

    double log_det() const { return 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum(); }

private:
    Vector center_;
    Matrix shape_;
    double radius_ = 0.0;
    Eigen::LLT<Matrix> llt_;
};

} // namespace mnl
