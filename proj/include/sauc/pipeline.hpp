#pragma once

#include "sauc/calib.hpp"
#include "sauc/data.hpp"
#include "sauc/forecaster.hpp"
#include "sauc/io.hpp"
#include "sauc/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sauc::pipeline {

using io::json;

struct DatasetConfig {
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::filesystem::path> csv;
    CsvLayout layout = CsvLayout::Wide;
    std::size_t aggregate = 1;
};

enum class ForecasterMode { Seasonal, Oracle };

struct ForecasterConfig {
    ForecasterMode mode = ForecasterMode::Seasonal;
    std::size_t period = 24;
    Distortion distortion;
};

struct RunConfig {
    DatasetConfig dataset;
    SplitFractions fractions;
    ForecasterConfig forecaster;
    std::vector<CalibratorKind> calibrators{CalibratorKind::Sauc};
    CalibratorOptions calibration;
    double c = kDefaultC;
    std::size_t metric_bins = 15;
    std::vector<PointFilter> filters{PointFilter::All, PointFilter::ZeroOnly};
    std::vector<std::size_t> sweep_bins{1, 5, 10, 15, 20, 25, 30};
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "sauc_out";
    std::size_t jobs = 1;

    // Throws DomainError; checks referenced files exist.
    void validate() const;
};

// Relative csv paths are resolved against `base_dir`.
RunConfig config_from_json(const json &j, const std::filesystem::path &base_dir = {});
RunConfig load_config(const std::filesystem::path &path);
// Everything that influences results; `out` and `jobs` are omitted.
json to_json(const RunConfig &cfg);
std::string config_hash(const RunConfig &cfg);

struct Dataset {
    std::string id;
    CountPanel panel;
    std::optional<std::vector<PredictiveDistribution>> truth;
};

struct Forecasts {
    SplitIndex split;
    ForecastSet calib;
    ForecastSet test;
    std::vector<double> y_calib;
    std::vector<double> y_test;
};

Dataset load_dataset(const RunConfig &cfg);
Forecasts make_forecasts(const RunConfig &cfg, const Dataset &data);

struct CalibrationRun {
    CalibratorModel model;
    CalibratedIntervals intervals;
};

CalibrationRun run_calibrator(CalibratorKind kind, const CalibratorOptions &options, const Forecasts &fc);

// Written files in creation order, with their SHA-256 digests.
struct CommandResult {
    std::vector<std::pair<std::string, std::string>> files;
};

CommandResult cmd_generate(const RunConfig &cfg);
CommandResult cmd_ingest(const RunConfig &cfg);
CommandResult cmd_forecast(const RunConfig &cfg);
// Reads panel.csv and the forecast files from cfg.out.
CommandResult cmd_calibrate(const RunConfig &cfg);
// Reads panel.csv, forecast_test and intervals_<kind>.csv from cfg.out.
CommandResult cmd_evaluate(const RunConfig &cfg);
CommandResult cmd_pipeline(const RunConfig &cfg);

struct SweepRow {
    std::size_t n_bins = 0;
    double ence_all = 0.0;
    double ence_zero = 0.0;
    double wall_ms = 0.0;
};

std::vector<SweepRow> sweep_bins(const RunConfig &cfg, const Forecasts &fc);
CommandResult cmd_sweep_bins(const RunConfig &cfg);

// Runs fn(0..n-1) on at most `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn);

} // namespace sauc::pipeline
