#pragma once

#include <vector>

#include <Eigen/Core>

namespace sacesim {

struct FitResult {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    bool converged = false;
    Eigen::Index n_used = 0;
    int iterations = 0;
    /// OLS: (X'X)^-1. Logistic: inverse observed information at the estimate.
    Eigen::MatrixXd unscaled_covariance;
    /// OLS only: RSS / (n - p).
    double residual_variance = 0.0;
    /// Logistic only: log-likelihood after each accepted IRLS step (index 0 is the start).
    std::vector<double> loglik_trace;
};

/// Ordinary least squares with classical standard errors (n - p denominator).
/// Throws InsufficientDataError if n <= p and SingularMatrixError on rank deficiency.
FitResult fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

struct LogisticOptions {
    int max_iterations = 50;
    double tolerance = 1e-8;             // max |coefficient change|
    double separation_threshold = 20.0;  // |coefficient| on standardized predictors
    int max_step_halvings = 30;
    bool compute_covariance = true;  // skip the final information matrix when only coefficients are needed
};

/// Logistic regression by IRLS with step halving.
///
/// Non-constant columns are centered (when a constant column is present) and
/// scaled to unit SD before fitting; coefficients and SEs are reported on the
/// original scale. A fit whose standardized coefficients exceed the separation
/// threshold, or which fails to converge, is returned with `converged == false`.
/// `start`, if nonempty, warm-starts the iteration (original scale).
///
/// Throws InsufficientDataError if n <= p and DomainError if the outcome is not
/// 0/1 or has a single class.
FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcome,
                       const LogisticOptions& options = {}, const Eigen::VectorXd& start = {});

double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcome,
                       const Eigen::VectorXd& coefficients);

}  // namespace sacesim
