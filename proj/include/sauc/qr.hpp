#pragma once

#include <cstddef>
#include <span>

namespace sauc {

// Pinball (check) loss for quantile level p.
double pinball(double y, double yhat, double p) noexcept;

// Linear quantile regression y ~ intercept + slope * x at level p.
struct QuantileFit {
    double p = 0.5;
    double intercept = 0.0;
    double slope = 0.0;
    std::size_t n_points = 0;

    double operator()(double x) const noexcept { return intercept + slope * x; }

    friend bool operator==(const QuantileFit &, const QuantileFit &) = default;
};

inline double apply(const QuantileFit &fit, double x) noexcept { return fit(x); }

double mean_pinball(std::span<const double> x, std::span<const double> y, const QuantileFit &fit);

// Exact minimizer of the mean pinball loss over (intercept, slope).
//
// Works as a simplex walk on the vertices of the loss polytope: the current
// line always passes through at least one data point, every edge leaving the
// vertex is a rotation about one of the points on the line (or a parallel
// shift), and each step performs an exact line search along the steepest
// descending edge. Stops when no edge descends, which for a convex
// piecewise-linear objective certifies the global optimum.
//
// Among optimal lines the one with smallest |slope| is preferred, then the
// smallest |intercept|. With fewer than two distinct x values the slope is 0
// and the intercept is the p-quantile of y.
QuantileFit fit_quantile(std::span<const double> x, std::span<const double> y, double p);

} // namespace sauc
