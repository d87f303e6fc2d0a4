#pragma once

#include "sauc/forecaster.hpp"
#include "sauc/qr.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sauc {

enum class CalibratorKind { Sauc, QuantileRegression, Isotonic, Platt, TemperatureScaling, HistogramBinning, Identity };

std::string_view calibrator_name(CalibratorKind kind) noexcept;
CalibratorKind parse_calibrator(std::string_view name);

// How the calibrated point prediction is formed.
enum class MuStarMode { Midpoint, Passthrough };
// What the SAUC bin edges are computed from. Test points are always routed by mu_hat.
enum class BinOn { MuHat, TargetPercentiles };

std::string_view mu_star_mode_name(MuStarMode mode) noexcept;
MuStarMode parse_mu_star_mode(std::string_view name);
std::string_view bin_on_name(BinOn mode) noexcept;
BinOn parse_bin_on(std::string_view name);

enum class Segment { Zero, NonZero };

std::string_view segment_name(Segment segment) noexcept;

inline constexpr double kSplitDisabled = -std::numeric_limits<double>::infinity();

struct CalibratorOptions {
    std::size_t n_bins = 15;
    // Predicted means below this go to the zero segment. kSplitDisabled
    // puts every point in the non-zero segment.
    double zero_threshold = 0.5;
    MuStarMode mu_star = MuStarMode::Midpoint;
    BinOn bin_on = BinOn::MuHat;
    double lo_p = 0.05;
    double hi_p = 0.95;

    void validate() const;
};

struct SaucCell {
    std::size_t bin = 0;
    Segment segment = Segment::Zero;
    std::size_t n_points = 0;
    bool fallback = true;
    QuantileFit lower;
    QuantileFit upper;

    friend bool operator==(const SaucCell &, const SaucCell &) = default;
};

struct IsotonicKnot {
    double x = 0.0;
    double g = 0.0;

    friend bool operator==(const IsotonicKnot &, const IsotonicKnot &) = default;
};

struct CalibratorModel {
    CalibratorKind kind = CalibratorKind::Identity;
    CalibratorOptions options;
    Family family = Family::NegativeBinomial;
    bool fitted = false;
    std::size_t n_calib = 0;

    // SAUC / QR / histogram binning: n_bins - 1 ascending interior edges.
    std::vector<double> thresholds;
    // SAUC / QR: bin-major, zero segment before non-zero.
    std::vector<SaucCell> cells;
    // Platt
    double platt_a = 1.0;
    double platt_b = 0.0;
    // Temperature scaling
    double temperature = 1.0;
    // Isotonic
    std::vector<IsotonicKnot> knots;
    // Histogram binning: additive correction per bin.
    std::vector<double> bin_corrections;

    std::size_t fallback_cells() const noexcept;
    const SaucCell &cell(std::size_t bin, Segment segment) const;
};

struct CalibratedPoint {
    std::size_t node = 0;
    std::size_t timestep = 0;
    double mu_star = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    double width() const noexcept { return upper - lower; }

    friend bool operator==(const CalibratedPoint &, const CalibratedPoint &) = default;
};

struct CalibratedIntervals {
    std::string model_id;
    std::string calibrator_id;
    std::vector<std::string> node_ids;
    std::vector<CalibratedPoint> points;

    std::size_t size() const noexcept { return points.size(); }
};

// Bin index of x for ascending interior edges: 0 below the first edge,
// edges.size() at or above the last.
std::size_t route_bin(std::span<const double> edges, double x) noexcept;

// n_bins - 1 interior edges at the k/n_bins empirical quantiles of `values`.
std::vector<double> quantile_edges(std::span<const double> values, std::size_t n_bins);

// Pre-calibration [lo_p, hi_p] intervals of every forecast point; mu_star is
// the distribution mean.
CalibratedIntervals pre_calibration_intervals(const ForecastSet &fc, double lo_p = 0.05, double hi_p = 0.95);

CalibratorModel fit_sauc(const ForecastSet &fc_calib, std::span<const double> y_calib,
                         const CalibratorOptions &options = {});
CalibratedIntervals apply_sauc(const CalibratorModel &model, const ForecastSet &fc_test);

CalibratedIntervals fit_apply_qr_baseline(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                          const ForecastSet &fc_test, const CalibratorOptions &options = {});
CalibratedIntervals fit_apply_isotonic(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                       const ForecastSet &fc_test, const CalibratorOptions &options = {});
CalibratedIntervals fit_apply_platt(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                    const ForecastSet &fc_test, const CalibratorOptions &options = {});
CalibratedIntervals fit_apply_temp(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                   const ForecastSet &fc_test, const CalibratorOptions &options = {});
CalibratedIntervals fit_apply_histbin(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                      const ForecastSet &fc_test, const CalibratorOptions &options = {});

// Generic entry points used by the CLI.
CalibratorModel fit_calibrator(CalibratorKind kind, const ForecastSet &fc_calib, std::span<const double> y_calib,
                               const CalibratorOptions &options = {});
CalibratedIntervals apply_calibrator(const CalibratorModel &model, const ForecastSet &fc_test);

// Pool-adjacent-violators on (x, y) sorted by x; equal x values are pooled
// first so the fitted map is a function of x.
std::vector<IsotonicKnot> isotonic_fit(std::span<const double> x, std::span<const double> y);
// Step interpolation: value of the last knot with knot.x <= v (first knot below range).
double isotonic_eval(std::span<const IsotonicKnot> knots, double v);

struct PlattParams {
    double a = 1.0;
    double b = 0.0;
};

PlattParams platt_fit(std::span<const double> x, std::span<const double> y);
double temperature_fit(std::span<const double> x, std::span<const double> y);

struct CdfCurvePoint {
    double p = 0.0;
    double observed = 0.0;
};

// Probability integral transform curve: for p on {0.01, ..., 0.99}, the
// fraction of points with F_i(y_i) <= p.
std::vector<CdfCurvePoint> empirical_cdf_curve(const ForecastSet &fc, std::span<const double> y);

} // namespace sauc
