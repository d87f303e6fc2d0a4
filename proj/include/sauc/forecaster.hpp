#pragma once

#include "sauc/data.hpp"
#include "sauc/dist.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace sauc {

enum class SplitTag { Calib, Test };

std::string_view split_tag_name(SplitTag tag) noexcept;
SplitTag parse_split_tag(std::string_view name);

struct PointForecast {
    std::size_t node = 0;
    std::size_t timestep = 0;
    PredictiveDistribution dist = PredictiveDistribution::poisson(0.0);

    friend bool operator==(const PointForecast &, const PointForecast &) = default;
};

// One predictive distribution per covered (node, timestep), node-major.
struct ForecastSet {
    Family family = Family::NegativeBinomial;
    SplitTag split_tag = SplitTag::Test;
    std::string model_id;
    std::vector<std::string> node_ids;
    std::vector<PointForecast> points;

    std::size_t size() const noexcept { return points.size(); }

    // Throws DomainError on duplicate keys or mixed families.
    void validate() const;

    friend bool operator==(const ForecastSet &, const ForecastSet &) = default;
};

// Observed counts for every point of `fc`, in the same order.
std::vector<double> targets(const CountPanel &panel, const ForecastSet &fc);

// Timestep range [begin, end) of a split slice.
std::pair<std::size_t, std::size_t> slice_bounds(const SplitIndex &split, SplitTag tag);

inline constexpr double kAlphaMax = 1e4;

struct SeasonalNbModel {
    std::size_t period = 1;
    std::size_t nodes = 0;
    SplitIndex split;
    double epsilon = 1e-10;
    double alpha_max = kAlphaMax;
    // (node * period + phase) -> parameters.
    std::vector<double> mu;
    std::vector<double> alpha;
};

// Moment-matched NB per (node, t mod period) bucket over the training slice.
SeasonalNbModel fit_seasonal_nb(const CountPanel &panel, const SplitIndex &split, std::size_t period,
                                double epsilon = 1e-10);

ForecastSet predict(const SeasonalNbModel &model, const CountPanel &panel, const SplitIndex &split, SplitTag target);

struct Distortion {
    double mu_factor = 1.0;
    double alpha_factor = 1.0;
};

// Slices the generator's true per-cell distributions to a split.
ForecastSet truth_forecast(const CountPanel &panel, const std::vector<PredictiveDistribution> &truth,
                           const SplitIndex &split, SplitTag target);

// mu -> mu_factor * mu; alpha -> alpha_factor * alpha. Poisson scales lambda
// by mu_factor; Gaussian scales sigma by 1 / sqrt(alpha_factor) so that a
// larger factor is overconfident for every family.
ForecastSet oracle_forecast(const ForecastSet &truth, const Distortion &distortion);

} // namespace sauc
