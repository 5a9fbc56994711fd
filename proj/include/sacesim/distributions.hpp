#pragma once

#include <Eigen/Core>

namespace sacesim {

class RngStream;

/// Closed interval [lower, upper].
struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double x) const { return lower <= x && x <= upper; }
    double width() const { return upper - lower; }
    bool operator==(const Interval&) const = default;
};

/// 1 / (1 + exp(-x)) without overflow for large |x|.
double inv_logit(double x);

/// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

/// Standard normal quantile, Wichura's AS 241 (PPND16), relative error ~1e-16.
double normal_quantile(double p);

/// estimate +/- z_{1-(1-level)/2} * se.
Interval wald_ci(double estimate, double se, double level);

/// Bivariate normal sampler using the lower Cholesky factor of `cov`.
/// Each draw consumes exactly four 64-bit stream words (two Box-Muller normals).
class BivariateNormal {
public:
    explicit BivariateNormal(const Eigen::Matrix2d& cov);
    Eigen::Vector2d sample(const Eigen::Vector2d& mean, RngStream& stream) const;
    const Eigen::Matrix2d& cholesky_factor() const { return lower_; }

private:
    Eigen::Matrix2d lower_;
};

Eigen::Vector2d sample_mvn(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, RngStream& stream);

}  // namespace sacesim
