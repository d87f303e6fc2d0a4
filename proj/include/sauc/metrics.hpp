#pragma once

#include "sauc/calib.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sauc {

// 1 / (2 * 1.645): the Gaussian RMSE-to-90%-width ratio.
inline constexpr double kDefaultC = 1.0 / 3.29;
inline constexpr double kTargetCoverage = 0.9;
// Bins whose MPIW is at most this fraction of the widest bin count as zero width.
inline constexpr double kZeroWidthTolerance = 1e-12;

enum class PointFilter { All, ZeroOnly, NonZeroOnly };

std::string_view filter_name(PointFilter filter) noexcept;
PointFilter parse_filter(std::string_view name);

struct BinStats {
    std::size_t bin = 0;
    std::size_t n_points = 0;
    double rmse = 0.0;
    double mpiw = 0.0;
    double width_min = 0.0;
    double width_max = 0.0;
};

struct MetricsReport {
    double ence = 0.0;
    double c = kDefaultC;
    double coverage = 0.0;
    double c_star = 0.0;
    std::size_t n_bins = 0;
    std::size_t n_points = 0;
    std::size_t excluded_bins = 0;
    PointFilter filter = PointFilter::All;
    std::vector<BinStats> bins;
    std::optional<double> slope;
    std::vector<double> risk_scores;
};

// Indices of the points kept by `filter`, in original order.
std::vector<std::size_t> filter_points(std::span<const double> y, PointFilter filter);

// Sorts points by interval width (stable on index) and cuts them into
// n_bins groups whose sizes differ by at most one; the first
// (n mod n_bins) groups take the extra point.
std::vector<BinStats> width_bins(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_bins);

MetricsReport ence(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_bins = 15,
                   double c = kDefaultC, PointFilter filter = PointFilter::All);

struct CoverageResult {
    double coverage = 0.0;
    double c_star = 0.0;
};

// Closed-interval coverage and its distance from 0.9.
CoverageResult coverage(const CalibratedIntervals &iv, std::span<const double> y);

// mu_star * (upper - lower) per point.
std::vector<double> risk_scores(const CalibratedIntervals &iv);

struct NodeRisk {
    std::string node_id;
    double mean_risk = 0.0;
    std::size_t n_points = 0;
};

std::vector<NodeRisk> node_mean_risk(const CalibratedIntervals &iv);

struct ReliabilityPoint {
    std::size_t bin = 0;
    double c_mpiw = 0.0;
    double rmse = 0.0;
    std::size_t n_points = 0;
};

std::vector<ReliabilityPoint> reliability_curve(const CalibratedIntervals &iv, std::span<const double> y,
                                                std::size_t n_bins = 15, double c = kDefaultC);

// Least-squares slope of RMSE(j) on MPIW(j) across width groups; the
// empirical estimate of c. Throws MetricUndefined when every group has the
// same MPIW.
double width_rmse_slope(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_groups = 15);

} // namespace sauc
