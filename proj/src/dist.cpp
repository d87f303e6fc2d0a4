#include "sauc/dist.hpp"

#include "sauc/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace sauc {

namespace {

constexpr double kTailCutoff = 1e-17;

void require_unit_open(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("probability must lie in (0, 1), got " + std::to_string(p));
    }
}

void require_nb(double mu, double alpha) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw DomainError("NB mean must be finite and >= 0");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw DomainError("NB dispersion must be finite and > 0");
    }
}

// Walks a count pmf upward from y = 0 in log space, accumulating the CDF.
// Both the CDF and the quantile use this walk, so F(quantile(p)) >= p holds
// for the exact floating-point values nb_cdf returns.
//
// log pmf(k + 1) = log pmf(k) + log_step(k). The walk stops early once the
// remaining tail mass is provably below kTailCutoff.
class CountWalk {
public:
    // Negative binomial.
    CountWalk(double mu, double alpha) : alpha_(alpha), poisson_(false) {
        const double total = mu + alpha;
        log_m_ = std::log(mu / total);
        m_ = mu / total;
        log_term_ = alpha * std::log(alpha / total);
        degenerate_ = (mu == 0.0);
        start();
    }

    // Poisson.
    explicit CountWalk(double lambda) : alpha_(0.0), poisson_(true) {
        log_m_ = std::log(lambda);
        m_ = lambda;
        log_term_ = -lambda;
        degenerate_ = (lambda == 0.0);
        start();
    }

    std::int64_t k() const noexcept { return k_; }
    double cumulative() const noexcept { return cumulative_; }

    // True when the mass beyond k is below the cutoff.
    bool exhausted() const noexcept {
        if (degenerate_) {
            return true;
        }
        const double ratio = step_ratio(k_);
        if (ratio >= 1.0) {
            return false;
        }
        const double bound = poisson_ ? ratio : std::max(ratio, m_);
        if (bound >= 1.0) {
            return false;
        }
        return std::exp(log_term_) * bound / (1.0 - bound) < kTailCutoff;
    }

    void advance() noexcept {
        log_term_ += log_step(k_);
        ++k_;
        cumulative_ += std::exp(log_term_);
    }

private:
    void start() noexcept {
        cumulative_ = std::exp(log_term_);
        if (degenerate_) {
            cumulative_ = 1.0;
        }
    }

    double log_step(std::int64_t k) const noexcept {
        const double kd = static_cast<double>(k);
        if (poisson_) {
            return log_m_ - std::log(kd + 1.0);
        }
        return std::log((kd + alpha_) / (kd + 1.0)) + log_m_;
    }

    double step_ratio(std::int64_t k) const noexcept {
        const double kd = static_cast<double>(k);
        if (poisson_) {
            return m_ / (kd + 1.0);
        }
        return (kd + alpha_) / (kd + 1.0) * m_;
    }

    double alpha_;
    bool poisson_;
    bool degenerate_ = false;
    double log_m_ = 0.0;
    double m_ = 0.0;
    double log_term_ = 0.0;
    double cumulative_ = 0.0;
    std::int64_t k_ = 0;
};

double walk_cdf(CountWalk walk, std::int64_t y) {
    if (y < 0) {
        return 0.0;
    }
    while (walk.k() < y && !walk.exhausted()) {
        walk.advance();
    }
    return std::min(walk.cumulative(), 1.0);
}

std::int64_t walk_quantile(CountWalk walk, double p) {
    while (std::min(walk.cumulative(), 1.0) < p) {
        if (walk.exhausted()) {
            break;
        }
        walk.advance();
    }
    return walk.k();
}

} // namespace

std::string_view family_name(Family family) noexcept {
    switch (family) {
    case Family::NegativeBinomial:
        return "NB";
    case Family::Poisson:
        return "Poisson";
    case Family::Gaussian:
        return "Gaussian";
    }
    return "?";
}

Family parse_family(std::string_view name) {
    if (name == "NB" || name == "nb" || name == "negative_binomial") {
        return Family::NegativeBinomial;
    }
    if (name == "Poisson" || name == "poisson") {
        return Family::Poisson;
    }
    if (name == "Gaussian" || name == "gaussian") {
        return Family::Gaussian;
    }
    throw DomainError("unknown distribution family '" + std::string(name) + "'");
}

PredictiveDistribution PredictiveDistribution::negative_binomial(double mu, double alpha) {
    require_nb(mu, alpha);
    return {Family::NegativeBinomial, mu, alpha};
}

PredictiveDistribution PredictiveDistribution::poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DomainError("Poisson rate must be finite and >= 0");
    }
    return {Family::Poisson, lambda, 0.0};
}

PredictiveDistribution PredictiveDistribution::gaussian(double mu, double sigma) {
    if (!std::isfinite(mu)) {
        throw DomainError("Gaussian mean must be finite");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError("Gaussian sigma must be finite and > 0");
    }
    return {Family::Gaussian, mu, sigma};
}

double PredictiveDistribution::mu() const {
    if (family_ == Family::Poisson) {
        throw DomainError("Poisson distribution has no mu parameter");
    }
    return location_;
}

double PredictiveDistribution::alpha() const {
    if (family_ != Family::NegativeBinomial) {
        throw DomainError("alpha is defined for NB only");
    }
    return shape_;
}

double PredictiveDistribution::lambda() const {
    if (family_ != Family::Poisson) {
        throw DomainError("lambda is defined for Poisson only");
    }
    return location_;
}

double PredictiveDistribution::sigma() const {
    if (family_ != Family::Gaussian) {
        throw DomainError("sigma is defined for Gaussian only");
    }
    return shape_;
}

double PredictiveDistribution::variance() const noexcept {
    switch (family_) {
    case Family::NegativeBinomial:
        return location_ + location_ * location_ / shape_;
    case Family::Poisson:
        return location_;
    case Family::Gaussian:
        return shape_ * shape_;
    }
    return 0.0;
}

double nb_log_pmf(double mu, double alpha, std::int64_t y, double epsilon) {
    require_nb(mu, alpha);
    if (y < 0) {
        return -std::numeric_limits<double>::infinity();
    }
    const double yd = static_cast<double>(y);
    const double denom = mu + alpha + 2.0 * epsilon;
    const double a = alpha + epsilon;
    const double m = mu + epsilon;
    if (m == 0.0) {
        return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    return std::lgamma(yd + a) - std::lgamma(yd + 1.0) - std::lgamma(a) + yd * std::log(m / denom) +
           alpha * std::log(a / denom);
}

double nb_pmf(double mu, double alpha, std::int64_t y) {
    return std::exp(nb_log_pmf(mu, alpha, y, 0.0));
}

double nb_cdf(double mu, double alpha, std::int64_t y) {
    require_nb(mu, alpha);
    return walk_cdf(CountWalk(mu, alpha), y);
}

std::int64_t nb_quantile(double mu, double alpha, double p) {
    require_nb(mu, alpha);
    require_unit_open(p);
    return walk_quantile(CountWalk(mu, alpha), p);
}

double poisson_log_pmf(double lambda, std::int64_t y) {
    if (y < 0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (lambda == 0.0) {
        return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    const double yd = static_cast<double>(y);
    return yd * std::log(lambda) - lambda - std::lgamma(yd + 1.0);
}

double poisson_pmf(double lambda, std::int64_t y) {
    return std::exp(poisson_log_pmf(lambda, y));
}

double poisson_cdf(double lambda, std::int64_t y) {
    if (!(lambda >= 0.0)) {
        throw DomainError("Poisson rate must be >= 0");
    }
    return walk_cdf(CountWalk(lambda), y);
}

std::int64_t poisson_quantile(double lambda, double p) {
    if (!(lambda >= 0.0)) {
        throw DomainError("Poisson rate must be >= 0");
    }
    require_unit_open(p);
    return walk_quantile(CountWalk(lambda), p);
}

double gaussian_cdf(double mu, double sigma, double x) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

double gaussian_quantile(double mu, double sigma, double p) {
    require_unit_open(p);
    return boost::math::quantile(boost::math::normal_distribution<double>(mu, sigma), p);
}

double cdf(const PredictiveDistribution &d, double y) {
    switch (d.family()) {
    case Family::NegativeBinomial:
        return y < 0.0 ? 0.0 : nb_cdf(d.mu(), d.alpha(), static_cast<std::int64_t>(std::floor(y)));
    case Family::Poisson:
        return y < 0.0 ? 0.0 : poisson_cdf(d.lambda(), static_cast<std::int64_t>(std::floor(y)));
    case Family::Gaussian:
        return gaussian_cdf(d.mu(), d.sigma(), y);
    }
    return 0.0;
}

double quantile(const PredictiveDistribution &d, double p) {
    switch (d.family()) {
    case Family::NegativeBinomial:
        return static_cast<double>(nb_quantile(d.mu(), d.alpha(), p));
    case Family::Poisson:
        return static_cast<double>(poisson_quantile(d.lambda(), p));
    case Family::Gaussian:
        return gaussian_quantile(d.mu(), d.sigma(), p);
    }
    return 0.0;
}

PredictionInterval interval(const PredictiveDistribution &d, double lo_p, double hi_p) {
    require_unit_open(lo_p);
    require_unit_open(hi_p);
    if (!(lo_p < hi_p)) {
        throw DomainError("interval requires lo_p < hi_p");
    }
    PredictionInterval out;
    out.mean = d.mean();
    out.lower = quantile(d, lo_p);
    out.upper = quantile(d, hi_p);
    return out;
}

double nb_loss(double mu, double alpha, std::int64_t y, const LossConfig &cfg) {
    const double eps = cfg.epsilon;
    const double yd = static_cast<double>(y);
    const double denom = mu + alpha + 2.0 * eps;
    return -(yd * std::log((mu + eps) / denom)) - std::lgamma(yd + alpha + eps) + std::lgamma(yd + 1.0) +
           std::lgamma(alpha + eps) - alpha * std::log((alpha + eps) / denom) + cfg.lambda_reg * alpha * alpha;
}

double poisson_loss(double lambda, std::int64_t y, const LossConfig &cfg) {
    const double stabilized = lambda + cfg.epsilon;
    return stabilized - static_cast<double>(y) * std::log(stabilized);
}

double gaussian_loss(double mu, double sigma, double y, const LossConfig &cfg) {
    if (!(sigma > 0.0)) {
        throw DomainError("Gaussian loss requires sigma > 0");
    }
    const double r = y - mu;
    return 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) + r * r / (2.0 * sigma * sigma) +
           cfg.lambda_reg * sigma;
}

GaussianLossGradient gaussian_loss_gradient(double mu, double sigma, double y, const LossConfig &cfg) {
    if (!(sigma > 0.0)) {
        throw DomainError("Gaussian loss requires sigma > 0");
    }
    const double r = y - mu;
    const double s2 = sigma * sigma;
    return {-r / s2, 1.0 / sigma - r * r / (s2 * sigma) + cfg.lambda_reg};
}

} // namespace sauc
