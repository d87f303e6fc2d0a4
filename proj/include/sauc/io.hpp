#pragma once

#include "sauc/calib.hpp"
#include "sauc/data.hpp"
#include "sauc/forecaster.hpp"
#include "sauc/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace sauc::io {

using nlohmann::json;

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &contents);
std::string read_file(const std::filesystem::path &path);

std::string sha256_hex(const std::string &bytes);
std::string sha256_file(const std::filesystem::path &path);

// Shortest representation that round-trips.
std::string format_number(double v);

// ---- panels & truth ------------------------------------------------------

std::string panel_csv(const CountPanel &panel);
// `node_id,timestep,family,<params>` for every cell.
std::string truth_csv(const CountPanel &panel, const std::vector<PredictiveDistribution> &truth);
std::vector<PredictiveDistribution> parse_truth_csv(std::istream &in, const CountPanel &panel);

// ---- forecasts -------------------------------------------------------------

// Header `node_id,timestep,family,mu,alpha` (NB), `...,lambda` (Poisson) or
// `...,mu,sigma` (Gaussian).
std::string forecast_csv(const ForecastSet &fc);
json forecast_sidecar(const ForecastSet &fc, std::uint64_t seed);
ForecastSet parse_forecast(std::istream &csv, const json &sidecar, const std::vector<std::string> &node_ids);

// ---- calibration -----------------------------------------------------------

json to_json(const CalibratorModel &model);
CalibratorModel calibrator_from_json(const json &j);

// Header `node_id,timestep,mu_star,lower,upper`.
std::string intervals_csv(const CalibratedIntervals &iv);
CalibratedIntervals parse_intervals(std::istream &in, const std::vector<std::string> &node_ids);

// ---- metrics ---------------------------------------------------------------

json to_json(const MetricsReport &report);
// Header `bin,c_mpiw,rmse,n`.
std::string reliability_csv(const std::vector<ReliabilityPoint> &curve);
// Header `node_id,mean_risk,n`.
std::string node_risk_csv(const std::vector<NodeRisk> &risk);
// Header `p,observed`.
std::string cdf_curve_csv(const std::vector<CdfCurvePoint> &curve);

// ---- synthetic spec --------------------------------------------------------

// {nodes, steps, mu, alpha, zero_inflation, seasonal_amplitude,
//  seasonal_period, mu_spread}; mu and alpha may be numbers or per-node arrays.
SyntheticSpec synthetic_spec_from_json(const json &j);
json to_json(const SyntheticSpec &spec);

} // namespace sauc::io
