#include "sacesim/regression.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include "sacesim/distributions.hpp"
#include "sacesim/errors.hpp"

namespace sacesim {

FitResult fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (response.size() != n) throw DomainError("fit_ols: response length does not match design rows");
    if (n <= p) throw InsufficientDataError("fit_ols: need more observations than coefficients");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p) throw SingularMatrixError("fit_ols: design matrix is rank deficient");

    FitResult fit;
    fit.coefficients = qr.solve(response);
    const Eigen::VectorXd residuals = response - design * fit.coefficients;
    fit.residual_variance = residuals.squaredNorm() / static_cast<double>(n - p);
    const Eigen::MatrixXd xtx = design.transpose() * design;
    fit.unscaled_covariance = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.standard_errors =
        (fit.residual_variance * fit.unscaled_covariance.diagonal().array()).max(0.0).sqrt().matrix();
    fit.converged = true;
    fit.n_used = n;
    return fit;
}

double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcome,
                       const Eigen::VectorXd& coefficients) {
    const Eigen::VectorXd eta = design * coefficients;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += outcome(i) * eta(i) - log1p_exp(eta(i));
    return ll;
}

namespace {

// Maps standardized coefficients to the original scale: beta = T * beta_std,
// where design * T is the standardized design.
Eigen::MatrixXd standardizing_transform(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(p, p);

    Eigen::Index intercept = -1;
    for (Eigen::Index j = 0; j < p && intercept < 0; ++j) {
        if (x.col(j).maxCoeff() == x.col(j).minCoeff() && x(0, j) != 0.0) intercept = j;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (x.col(j).maxCoeff() == x.col(j).minCoeff()) continue;
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / static_cast<double>(n));
        t(j, j) = 1.0 / sd;
        if (intercept >= 0) t(intercept, j) = -mean / (sd * x(0, intercept));
    }
    return t;
}

// Log-likelihood at `b`, plus the score and Fisher information, sharing one
// evaluation of the linear predictor.
struct LogisticWork {
    Eigen::VectorXd eta, resid, weight;
    Eigen::MatrixXd weighted;
};

double logistic_pass(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& b,
                     LogisticWork& work, Eigen::VectorXd* grad, Eigen::MatrixXd* info) {
    const Eigen::Index n = x.rows();
    work.eta.noalias() = x * b;
    work.resid.resize(n);
    work.weight.resize(n);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = work.eta(i);
        const double e = std::exp(-std::fabs(eta));
        ll += y(i) * eta - (std::max(eta, 0.0) + std::log1p(e));
        const double mu = eta >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        work.weight(i) = mu * (1.0 - mu);
        work.resid(i) = y(i) - mu;
    }
    grad->noalias() = x.transpose() * work.resid;
    work.weighted = x.array().colwise() * work.weight.array();
    info->noalias() = x.transpose() * work.weighted;
    return ll;
}

}  // namespace

FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcome,
                       const LogisticOptions& options, const Eigen::VectorXd& start) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (outcome.size() != n) throw DomainError("fit_logistic: outcome length does not match design rows");
    if (n <= p) throw InsufficientDataError("fit_logistic: need more observations than coefficients");
    Eigen::Index events = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (outcome(i) == 1.0) {
            ++events;
        } else if (outcome(i) != 0.0) {
            throw DomainError("fit_logistic: outcome must be 0/1");
        }
    }
    if (events == 0 || events == n) throw DomainError("fit_logistic: outcome has a single class");

    const Eigen::MatrixXd t = standardizing_transform(design);
    const Eigen::MatrixXd xs = design * t;
    LogisticWork work;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (start.size() == p) beta = t.partialPivLu().solve(start);

    FitResult fit;
    fit.n_used = n;
    Eigen::VectorXd grad(p);
    Eigen::MatrixXd info(p, p);
    double ll = logistic_pass(xs, outcome, beta, work, &grad, &info);
    fit.loglik_trace.push_back(ll);

    bool converged = false;
    Eigen::VectorXd grad_new(p);
    Eigen::MatrixXd info_new(p, p);
    for (int it = 1; it <= options.max_iterations; ++it) {
        fit.iterations = it;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) break;
        Eigen::VectorXd step = ldlt.solve(grad);

        Eigen::VectorXd candidate = beta + step;
        double ll_new = logistic_pass(xs, outcome, candidate, work, &grad_new, &info_new);
        int halvings = 0;
        while (!(ll_new >= ll) && halvings < options.max_step_halvings) {
            step *= 0.5;
            candidate = beta + step;
            ll_new = logistic_pass(xs, outcome, candidate, work, &grad_new, &info_new);
            ++halvings;
        }
        if (!(ll_new >= ll)) {
            converged = step.cwiseAbs().maxCoeff() < options.tolerance;
            break;
        }
        beta = candidate;
        ll = ll_new;
        grad.swap(grad_new);
        info.swap(info_new);
        fit.loglik_trace.push_back(ll);
        if (step.cwiseAbs().maxCoeff() < options.tolerance) {
            converged = true;
            break;
        }
        if (beta.cwiseAbs().maxCoeff() > options.separation_threshold) break;
    }
    if (beta.cwiseAbs().maxCoeff() > options.separation_threshold) converged = false;

    fit.converged = converged;
    fit.coefficients = t * beta;
    if (!options.compute_covariance) return fit;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        const Eigen::MatrixXd cov_std = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
        fit.unscaled_covariance = t * cov_std * t.transpose();
        fit.standard_errors = fit.unscaled_covariance.diagonal().array().max(0.0).sqrt().matrix();
    } else {
        fit.converged = false;
        fit.unscaled_covariance = Eigen::MatrixXd::Constant(p, p, std::nan(""));
        fit.standard_errors = Eigen::VectorXd::Constant(p, std::nan(""));
    }
    return fit;
}

}  // namespace sacesim
