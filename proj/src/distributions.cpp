#include "sacesim/distributions.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "sacesim/errors.hpp"
#include "sacesim/rng.hpp"

namespace sacesim {

double inv_logit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log1p_exp(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

namespace {

template <std::size_t N>
double horner(const double (&coef)[N], double x) {
    double acc = coef[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + coef[i];
    return acc;
}

// AS 241 coefficients, lowest degree first.
constexpr double kA[] = {3.3871328727963666080e0,  1.3314166789178437745e+2, 1.9715909503065514427e+3,
                         1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                         3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[] = {1.0,
                         4.2313330701600911252e+1,
                         6.8718700749205790830e+2,
                         5.3941960214247511077e+3,
                         2.1213794301586595867e+4,
                         3.9307895800092710610e+4,
                         2.8729085735721942674e+4,
                         5.2264952788528545610e+3};
constexpr double kC[] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                         3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                         2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[] = {1.0,
                         2.05319162663775882187e0,
                         1.67638483018380384940e0,
                         6.89767334985100004550e-1,
                         1.48103976427480074590e-1,
                         1.51986665636164571966e-2,
                         5.47593808499534494600e-4,
                         1.05075007164441684324e-9};
constexpr double kE[] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                         2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[] = {1.0,
                         5.99832206555887937690e-1,
                         1.36929880922735805310e-1,
                         1.48753612908506148525e-2,
                         7.86869131145613259100e-4,
                         1.84631831751005468180e-5,
                         1.42151175831644588870e-7,
                         2.04426310338993978564e-15};

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DomainError("normal_quantile: p must lie in [0, 1]");
    }
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(kA, r) / horner(kB, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = horner(kC, r) / horner(kD, r);
    } else {
        r -= 5.0;
        val = horner(kE, r) / horner(kF, r);
    }
    return q < 0.0 ? -val : val;
}

Interval wald_ci(double estimate, double se, double level) {
    if (!(se >= 0.0)) throw DomainError("wald_ci: standard error must be nonnegative");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("wald_ci: level must lie in (0, 1)");
    const double half = normal_quantile(1.0 - (1.0 - level) / 2.0) * se;
    return {estimate - half, estimate + half};
}

BivariateNormal::BivariateNormal(const Eigen::Matrix2d& cov) {
    if (!cov.allFinite() || std::fabs(cov(0, 1) - cov(1, 0)) > 1e-12 * (1.0 + std::fabs(cov(0, 1)))) {
        throw DomainError("bivariate normal: covariance must be finite and symmetric");
    }
    Eigen::LLT<Eigen::Matrix2d> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.matrixL()(1, 1) > 0.0)) {
        throw DomainError("bivariate normal: covariance is not positive-definite");
    }
    lower_ = llt.matrixL();
}

Eigen::Vector2d BivariateNormal::sample(const Eigen::Vector2d& mean, RngStream& stream) const {
    const double z0 = stream.normal();
    const double z1 = stream.normal();
    return {mean(0) + lower_(0, 0) * z0, mean(1) + lower_(1, 0) * z0 + lower_(1, 1) * z1};
}

Eigen::Vector2d sample_mvn(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, RngStream& stream) {
    return BivariateNormal(cov).sample(mean, stream);
}

}  // namespace sacesim
