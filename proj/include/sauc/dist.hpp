#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sauc {

enum class Family { NegativeBinomial, Poisson, Gaussian };

std::string_view family_name(Family family) noexcept;
Family parse_family(std::string_view name);

// Count families produce integer quantiles and non-negative intervals.
constexpr bool is_count_family(Family family) noexcept {
    return family != Family::Gaussian;
}

// A per-point predictive distribution.
//
// Negative binomial uses the (mean, dispersion) parameterization
// r = alpha, success probability mu / (mu + alpha), so that
// E[Y] = mu and Var[Y] = mu + mu^2 / alpha.
class PredictiveDistribution {
public:
    static PredictiveDistribution negative_binomial(double mu, double alpha);
    static PredictiveDistribution poisson(double lambda);
    static PredictiveDistribution gaussian(double mu, double sigma);

    Family family() const noexcept { return family_; }

    double mu() const;     // NB or Gaussian
    double alpha() const;  // NB
    double lambda() const; // Poisson
    double sigma() const;  // Gaussian

    double mean() const noexcept { return location_; }
    double variance() const noexcept;

    // Raw parameter slots, in file order (mu/alpha, lambda/-, mu/sigma).
    double first() const noexcept { return location_; }
    double second() const noexcept { return shape_; }

    friend bool operator==(const PredictiveDistribution &, const PredictiveDistribution &) = default;

private:
    PredictiveDistribution(Family f, double a, double b) : family_(f), location_(a), shape_(b) {}

    Family family_;
    double location_;
    double shape_;
};

struct PredictionInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    double width() const noexcept { return upper - lower; }
};

struct LossConfig {
    double epsilon = 1e-10;
    double lambda_reg = 1e-4;
};

// ---- negative binomial -------------------------------------------------

// log P(Y = y). With epsilon > 0 the stabilized form matching nb_loss is
// returned: mu -> mu + eps, alpha -> alpha + eps inside the log-gamma and
// ratio terms, mu + alpha -> mu + alpha + 2 eps.
double nb_log_pmf(double mu, double alpha, std::int64_t y, double epsilon = 0.0);
double nb_pmf(double mu, double alpha, std::int64_t y);
// P(Y <= y), by log-space cumulative summation.
double nb_cdf(double mu, double alpha, std::int64_t y);
// Smallest q with nb_cdf(q) >= p. Throws DomainError unless 0 < p < 1.
std::int64_t nb_quantile(double mu, double alpha, double p);

// ---- Poisson ------------------------------------------------------------

double poisson_log_pmf(double lambda, std::int64_t y);
double poisson_pmf(double lambda, std::int64_t y);
double poisson_cdf(double lambda, std::int64_t y);
std::int64_t poisson_quantile(double lambda, double p);

// ---- Gaussian -----------------------------------------------------------

double gaussian_cdf(double mu, double sigma, double x);
double gaussian_quantile(double mu, double sigma, double p);

// ---- family-generic -----------------------------------------------------

// P(Y <= y). Count families floor y first.
double cdf(const PredictiveDistribution &d, double y);
double quantile(const PredictiveDistribution &d, double p);

// [quantile(lo_p), quantile(hi_p)] with the distribution mean as point prediction.
PredictionInterval interval(const PredictiveDistribution &d, double lo_p = 0.05, double hi_p = 0.95);

// ---- training losses ----------------------------------------------------

// Negative log-likelihood of NB(mu, alpha) at y with epsilon stabilization
// plus lambda_reg * alpha^2.
double nb_loss(double mu, double alpha, std::int64_t y, const LossConfig &cfg = {});

// (lambda + eps) - y log(lambda + eps); the log(y!) constant is dropped.
double poisson_loss(double lambda, std::int64_t y, const LossConfig &cfg = {});

// 0.5 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2) + lambda_reg * sigma.
double gaussian_loss(double mu, double sigma, double y, const LossConfig &cfg = {});

struct GaussianLossGradient {
    double d_mu = 0.0;
    double d_sigma = 0.0;
};

GaussianLossGradient gaussian_loss_gradient(double mu, double sigma, double y, const LossConfig &cfg = {});

} // namespace sauc
