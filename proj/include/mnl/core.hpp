#pragma once

// Multinomial-logistic transition model: probabilities, per-sample logistic
// loss and its derivatives, and the non-linearity constants.

#include "mnl/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

namespace mnl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Features of every reachable next state for one (stage, state, action).
/// Row i holds phi(s'_i | s, a); the row order is fixed for the lifetime of
/// the instance and is the order used for outcome indices.
class MnlContext {
public:
    MnlContext() = default;

    explicit MnlContext(Matrix features) : features_(std::move(features)) {
        detail::require(features_.rows() >= 1, "MnlContext: at least one reachable next state is required");
        detail::require(features_.cols() >= 1, "MnlContext: feature dimension must be positive");
        detail::require(features_.allFinite(), "MnlContext: features must be finite");
    }

    Eigen::Index size() const noexcept { return features_.rows(); }
    Eigen::Index dim() const noexcept { return features_.cols(); }
    const Matrix& features() const noexcept { return features_; }
    auto feature(Eigen::Index i) const { return features_.row(i).transpose(); }

    /// Largest Euclidean feature norm in this context.
    double max_feature_norm() const { return features_.rowwise().norm().maxCoeff(); }

private:
    Matrix features_;
};

/// Problem constants: kappa bounds products of transition probabilities from
/// below by 1/kappa over the parameter ball of radius B; rho bounds the
/// per-stage maximum feature norm from below.
struct ModelConstants {
    double kappa = 1.0;
    double rho = 1.0;
    double B = 1.0;
};

namespace detail {

inline void check_theta(const Vector& theta, const MnlContext& ctx, const char* where) {
    require(ctx.size() >= 1, std::string(where) + ": empty context");
    require(theta.size() == ctx.dim(), std::string(where) + ": theta dimension does not match features");
    require(theta.allFinite(), std::string(where) + ": theta must be finite");
}

inline void check_outcome(Eigen::Index outcome, const MnlContext& ctx, const char* where) {
    require(outcome >= 0 && outcome < ctx.size(), std::string(where) + ": outcome index out of range");
}

// Unchecked softmax of the logits F * theta, max-logit shifted.
inline Vector softmax_unchecked(const Vector& theta, const MnlContext& ctx) {
    Vector z = ctx.features() * theta;
    z.array() -= z.maxCoeff();
    z = z.array().exp().matrix();
    z /= z.sum();
    return z;
}

inline double log_sum_exp(const Vector& z) {
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
}

// Hessian of the loss given the probabilities: F^T (diag(p) - p p^T) F.
inline Matrix hessian_from_probs(const Vector& p, const MnlContext& ctx) {
    const Matrix& f = ctx.features();
    const Vector mean = f.transpose() * p;
    Matrix h = f.transpose() * p.asDiagonal() * f;
    h.noalias() -= mean * mean.transpose();
    return 0.5 * (h + h.transpose());
}

} // namespace detail

/// Transition probabilities p^{s'}(theta) over the context's next states.
inline Vector softmax_probs(const Vector& theta, const MnlContext& ctx) {
    detail::check_theta(theta, ctx, "softmax_probs");
    return detail::softmax_unchecked(theta, ctx);
}

/// -log p^{outcome}(theta), evaluated through log-sum-exp.
inline double logistic_loss(const Vector& theta, const MnlContext& ctx, Eigen::Index outcome) {
    detail::check_theta(theta, ctx, "logistic_loss");
    detail::check_outcome(outcome, ctx, "logistic_loss");
    const Vector z = ctx.features() * theta;
    return detail::log_sum_exp(z) - z(outcome);
}

/// Gradient of logistic_loss: sum_{s'} (p^{s'} - 1[s' = outcome]) phi^{s'}.
inline Vector loss_gradient(const Vector& theta, const MnlContext& ctx, Eigen::Index outcome) {
    detail::check_theta(theta, ctx, "loss_gradient");
    detail::check_outcome(outcome, ctx, "loss_gradient");
    Vector residual = detail::softmax_unchecked(theta, ctx);
    residual(outcome) -= 1.0;
    return ctx.features().transpose() * residual;
}

/// Hessian of logistic_loss. It does not depend on the observed outcome.
inline Matrix loss_hessian(const Vector& theta, const MnlContext& ctx) {
    detail::check_theta(theta, ctx, "loss_hessian");
    return detail::hessian_from_probs(detail::softmax_unchecked(theta, ctx), ctx);
}

/// Conservative bound kappa <= U^2 exp(4B).
inline double kappa_upper_bound(int max_reachable, double B) {
    detail::require(max_reachable >= 1, "kappa_upper_bound: U must be >= 1");
    detail::require(B >= 0.0, "kappa_upper_bound: B must be >= 0");
    const double u = static_cast<double>(max_reachable);
    return u * u * std::exp(4.0 * B);
}

} // namespace mnl
