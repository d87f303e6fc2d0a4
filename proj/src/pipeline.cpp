#include "sauc/pipeline.hpp"

#include "sauc/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace sauc::pipeline {

namespace {

template <class F>
auto stage(const char *name, F &&fn) -> decltype(fn()) {
    try {
        spdlog::debug("stage {}", name);
        return fn();
    } catch (const StageError &) {
        throw;
    } catch (const std::exception &e) {
        throw StageError(name, e.what());
    }
}

std::string file_label(CalibratorKind kind) {
    std::string name(calibrator_name(kind));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return name;
}

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}

    void write(const std::string &name, const std::string &contents) {
        io::write_file_atomic(root_ / name, contents);
        result_.files.emplace_back(name, io::sha256_hex(contents));
        spdlog::debug("wrote {}", (root_ / name).string());
    }
    void write(const std::string &name, const json &j) { write(name, j.dump(2) + "\n"); }

    // Writes manifest_<command>.json listing every file written so far.
    CommandResult finish(const std::string &command, const RunConfig &cfg, json extra = json::object()) {
        json files = json::object();
        for (const auto &[name, digest] : result_.files) {
            files[name] = digest;
        }
        extra["command"] = command;
        extra["config"] = to_json(cfg);
        extra["config_hash"] = config_hash(cfg);
        extra["files"] = std::move(files);
        write("manifest_" + command + ".json", extra);
        return result_;
    }

    const std::filesystem::path &root() const { return root_; }

private:
    std::filesystem::path root_;
    CommandResult result_;
};

json dataset_summary(const Dataset &data) {
    return json{{"id", data.id},
                {"nodes", data.panel.nodes()},
                {"steps", data.panel.steps()},
                {"timestep_seconds", data.panel.timestep_seconds()},
                {"sparsity", data.panel.sparsity()},
                {"mean", data.panel.mean()}};
}

void write_dataset(OutputDir &out, const Dataset &data) {
    out.write("panel.csv", io::panel_csv(data.panel));
    if (data.truth) {
        out.write("truth.csv", io::truth_csv(data.panel, *data.truth));
    }
}

void write_forecasts(OutputDir &out, const Forecasts &fc, std::uint64_t seed) {
    out.write("forecast_calib.csv", io::forecast_csv(fc.calib));
    out.write("forecast_calib.json", io::forecast_sidecar(fc.calib, seed));
    out.write("forecast_test.csv", io::forecast_csv(fc.test));
    out.write("forecast_test.json", io::forecast_sidecar(fc.test, seed));
}

CalibratedIntervals subset(const CalibratedIntervals &iv, const std::vector<std::size_t> &keep) {
    CalibratedIntervals out;
    out.model_id = iv.model_id;
    out.calibrator_id = iv.calibrator_id;
    out.node_ids = iv.node_ids;
    for (auto i : keep) {
        out.points.push_back(iv.points[i]);
    }
    return out;
}

struct Provenance {
    std::string dataset;
    std::string config_hash;
};

// Metrics, reliability and risk files for one labelled set of intervals.
void write_evaluation(OutputDir &out, const std::string &label, const CalibratedIntervals &iv,
                      const std::vector<double> &y, const RunConfig &cfg, const Provenance &prov) {
    for (auto filter : cfg.filters) {
        const std::string suffix = fmt::format("{}_{}", label, filter_name(filter));
        json report;
        try {
            report = io::to_json(ence(iv, y, cfg.metric_bins, cfg.c, filter));
            report.erase("risk_scores");
        } catch (const MetricUndefined &e) {
            spdlog::warn("{}: {}", suffix, e.what());
            report = json{{"ence", nullptr},
                          {"undefined", e.what()},
                          {"c", cfg.c},
                          {"n_bins", cfg.metric_bins},
                          {"filter", std::string(filter_name(filter))}};
        }
        report["dataset"] = prov.dataset;
        report["calibrator"] = iv.calibrator_id;
        report["model_id"] = iv.model_id;
        report["config_hash"] = prov.config_hash;
        out.write("metrics_" + suffix + ".json", report);

        const auto keep = filter_points(y, filter);
        std::vector<double> sub_y;
        for (auto i : keep) {
            sub_y.push_back(y[i]);
        }
        const auto curve =
            keep.empty() ? std::vector<ReliabilityPoint>{} : reliability_curve(subset(iv, keep), sub_y, cfg.metric_bins, cfg.c);
        out.write("reliability_" + suffix + ".csv", io::reliability_csv(curve));
    }
    out.write("risk_" + label + ".csv", io::node_risk_csv(node_mean_risk(iv)));
}

CountPanel read_panel(const std::filesystem::path &dir) {
    return ingest_csv(dir / "panel.csv", CsvLayout::Wide);
}

ForecastSet read_forecast(const std::filesystem::path &dir, const std::string &stem,
                          const std::vector<std::string> &node_ids) {
    std::ifstream csv(dir / (stem + ".csv"));
    if (!csv) {
        throw IoError("cannot open " + (dir / (stem + ".csv")).string());
    }
    const auto sidecar = json::parse(io::read_file(dir / (stem + ".json")));
    return io::parse_forecast(csv, sidecar, node_ids);
}

Forecasts read_forecasts(const RunConfig &cfg, const CountPanel &panel) {
    Forecasts fc;
    fc.split = split(panel, cfg.fractions);
    fc.calib = read_forecast(cfg.out, "forecast_calib", panel.node_ids());
    fc.test = read_forecast(cfg.out, "forecast_test", panel.node_ids());
    fc.y_calib = targets(panel, fc.calib);
    fc.y_test = targets(panel, fc.test);
    return fc;
}

std::vector<CalibrationRun> run_calibrators(const RunConfig &cfg, const Forecasts &fc) {
    std::vector<std::optional<CalibrationRun>> slots(cfg.calibrators.size());
    parallel_for(cfg.calibrators.size(), cfg.jobs, [&](std::size_t i) {
        slots[i] = stage(std::string(calibrator_name(cfg.calibrators[i])).c_str(),
                         [&] { return run_calibrator(cfg.calibrators[i], cfg.calibration, fc); });
    });
    std::vector<CalibrationRun> runs;
    for (auto &s : slots) {
        runs.push_back(std::move(*s));
    }
    return runs;
}

json calibrator_json(const CalibrationRun &run) {
    auto j = io::to_json(run.model);
    j["model_id"] = run.intervals.model_id;
    return j;
}

std::vector<CalibratorKind> unique_kinds(std::vector<CalibratorKind> kinds) {
    std::vector<CalibratorKind> out;
    for (auto k : kinds) {
        if (std::find(out.begin(), out.end(), k) == out.end()) {
            out.push_back(k);
        }
    }
    return out;
}

} // namespace

void RunConfig::validate() const {
    if (dataset.synthetic.has_value() == dataset.csv.has_value()) {
        throw DomainError("dataset must specify exactly one of 'synthetic' or 'csv'");
    }
    if (dataset.synthetic) {
        dataset.synthetic->validate();
        if (!seed) {
            throw DomainError("a seed is required for synthetic datasets");
        }
    }
    if (dataset.csv && !std::filesystem::exists(*dataset.csv)) {
        throw DomainError("dataset file does not exist: " + dataset.csv->string());
    }
    if (dataset.aggregate == 0) {
        throw DomainError("aggregate factor must be >= 1");
    }
    if (forecaster.mode == ForecasterMode::Oracle && !dataset.synthetic) {
        throw DomainError("the oracle forecaster needs a synthetic dataset");
    }
    if (forecaster.period == 0) {
        throw DomainError("seasonal period must be >= 1");
    }
    if (!(forecaster.distortion.mu_factor > 0.0) || !(forecaster.distortion.alpha_factor > 0.0)) {
        throw DomainError("distortion factors must be positive");
    }
    if (calibrators.empty()) {
        throw DomainError("at least one calibrator is required");
    }
    calibration.validate();
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw DomainError("c must be positive");
    }
    if (metric_bins == 0) {
        throw DomainError("metric bins must be >= 1");
    }
    if (filters.empty()) {
        throw DomainError("at least one metric filter is required");
    }
    if (std::find(sweep_bins.begin(), sweep_bins.end(), 0) != sweep_bins.end()) {
        throw DomainError("sweep bin counts must be >= 1");
    }
    if (jobs == 0) {
        throw DomainError("jobs must be >= 1");
    }
}

RunConfig config_from_json(const json &j, const std::filesystem::path &base_dir) {
    RunConfig cfg;
    try {
        if (j.contains("dataset")) {
            const auto &d = j.at("dataset");
            if (d.contains("synthetic")) {
                cfg.dataset.synthetic = io::synthetic_spec_from_json(d.at("synthetic"));
            }
            if (d.contains("csv")) {
                std::filesystem::path p = d.at("csv").get<std::string>();
                cfg.dataset.csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            }
            cfg.dataset.layout = parse_layout(d.value("layout", std::string("wide")));
            cfg.dataset.aggregate = d.value("aggregate", std::size_t{1});
        }
        if (j.contains("split")) {
            const auto f = j.at("split").get<std::vector<double>>();
            if (f.size() != 3) {
                throw DomainError("split must list three fractions");
            }
            cfg.fractions = {f[0], f[1], f[2]};
        }
        if (j.contains("forecaster")) {
            const auto &f = j.at("forecaster");
            const auto type = f.value("type", std::string("seasonal"));
            if (type == "seasonal") {
                cfg.forecaster.mode = ForecasterMode::Seasonal;
            } else if (type == "oracle") {
                cfg.forecaster.mode = ForecasterMode::Oracle;
            } else {
                throw DomainError("unknown forecaster type '" + type + "'");
            }
            cfg.forecaster.period = f.value("period", std::size_t{24});
            cfg.forecaster.distortion.mu_factor = f.value("mu_factor", 1.0);
            cfg.forecaster.distortion.alpha_factor = f.value("alpha_factor", 1.0);
        }
        if (j.contains("calibrators")) {
            const auto &c = j.at("calibrators");
            cfg.calibrators.clear();
            if (c.is_string() && c.get<std::string>() == "all") {
                cfg.calibrators = {CalibratorKind::Sauc,       CalibratorKind::QuantileRegression,
                                   CalibratorKind::Isotonic,   CalibratorKind::Platt,
                                   CalibratorKind::TemperatureScaling, CalibratorKind::HistogramBinning,
                                   CalibratorKind::Identity};
            } else if (c.is_string()) {
                cfg.calibrators.push_back(parse_calibrator(c.get<std::string>()));
            } else {
                for (const auto &name : c) {
                    cfg.calibrators.push_back(parse_calibrator(name.get<std::string>()));
                }
            }
        }
        if (j.contains("calibration")) {
            const auto &c = j.at("calibration");
            cfg.calibration.n_bins = c.value("n_bins", cfg.calibration.n_bins);
            if (c.contains("zero_threshold")) {
                cfg.calibration.zero_threshold =
                    c.at("zero_threshold").is_null() ? kSplitDisabled : c.at("zero_threshold").get<double>();
            }
            cfg.calibration.mu_star = parse_mu_star_mode(c.value("mu_star", std::string("midpoint")));
            cfg.calibration.bin_on = parse_bin_on(c.value("bin_on", std::string("mu_hat")));
        }
        if (j.contains("metrics")) {
            const auto &m = j.at("metrics");
            cfg.c = m.value("c", cfg.c);
            cfg.metric_bins = m.value("n_bins", cfg.metric_bins);
            if (m.contains("filters")) {
                cfg.filters.clear();
                for (const auto &f : m.at("filters")) {
                    cfg.filters.push_back(parse_filter(f.get<std::string>()));
                }
            }
        }
        if (j.contains("sweep_bins")) {
            cfg.sweep_bins = j.at("sweep_bins").get<std::vector<std::size_t>>();
        }
        if (j.contains("seed")) {
            cfg.seed = j.at("seed").get<std::uint64_t>();
        }
        if (j.contains("out")) {
            std::filesystem::path p = j.at("out").get<std::string>();
            cfg.out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        cfg.jobs = j.value("jobs", cfg.jobs);
    } catch (const json::exception &e) {
        throw DomainError(std::string("invalid config: ") + e.what());
    }
    cfg.calibrators = unique_kinds(cfg.calibrators);
    return cfg;
}

RunConfig load_config(const std::filesystem::path &path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error &e) {
        throw DomainError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return config_from_json(j, path.parent_path());
}

json to_json(const RunConfig &cfg) {
    json dataset = json::object();
    if (cfg.dataset.synthetic) {
        dataset["synthetic"] = io::to_json(*cfg.dataset.synthetic);
    }
    if (cfg.dataset.csv) {
        dataset["csv"] = cfg.dataset.csv->filename().string();
        dataset["layout"] = cfg.dataset.layout == CsvLayout::Wide ? "wide" : "long";
    }
    dataset["aggregate"] = cfg.dataset.aggregate;

    json calibrators = json::array();
    for (auto k : cfg.calibrators) {
        calibrators.push_back(std::string(calibrator_name(k)));
    }
    json filters = json::array();
    for (auto f : cfg.filters) {
        filters.push_back(std::string(filter_name(f)));
    }
    json zero_threshold = cfg.calibration.zero_threshold == kSplitDisabled
                              ? json(nullptr)
                              : json(cfg.calibration.zero_threshold);
    return json{
        {"dataset", std::move(dataset)},
        {"split", {cfg.fractions.train, cfg.fractions.calib, cfg.fractions.test}},
        {"forecaster",
         {{"type", cfg.forecaster.mode == ForecasterMode::Oracle ? "oracle" : "seasonal"},
          {"period", cfg.forecaster.period},
          {"mu_factor", cfg.forecaster.distortion.mu_factor},
          {"alpha_factor", cfg.forecaster.distortion.alpha_factor}}},
        {"calibrators", std::move(calibrators)},
        {"calibration",
         {{"n_bins", cfg.calibration.n_bins},
          {"zero_threshold", std::move(zero_threshold)},
          {"mu_star", std::string(mu_star_mode_name(cfg.calibration.mu_star))},
          {"bin_on", std::string(bin_on_name(cfg.calibration.bin_on))}}},
        {"metrics", {{"c", cfg.c}, {"n_bins", cfg.metric_bins}, {"filters", std::move(filters)}}},
        {"sweep_bins", cfg.sweep_bins},
        {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
    };
}

std::string config_hash(const RunConfig &cfg) {
    auto j = to_json(cfg);
    if (cfg.dataset.csv && std::filesystem::exists(*cfg.dataset.csv)) {
        j["dataset"]["csv_sha256"] = io::sha256_file(*cfg.dataset.csv);
    }
    return io::sha256_hex(j.dump());
}

Dataset load_dataset(const RunConfig &cfg) {
    if (cfg.dataset.synthetic) {
        auto generated = generate_synthetic(*cfg.dataset.synthetic, *cfg.seed);
        Dataset data{fmt::format("synthetic-seed{}", *cfg.seed), std::move(generated.panel),
                     std::move(generated.truth)};
        if (cfg.dataset.aggregate > 1) {
            data.panel = aggregate(data.panel, cfg.dataset.aggregate);
            data.truth.reset();
        }
        return data;
    }
    auto panel = ingest_csv(*cfg.dataset.csv, cfg.dataset.layout);
    if (cfg.dataset.aggregate > 1) {
        panel = aggregate(panel, cfg.dataset.aggregate);
    }
    return Dataset{cfg.dataset.csv->stem().string(), std::move(panel), std::nullopt};
}

Forecasts make_forecasts(const RunConfig &cfg, const Dataset &data) {
    Forecasts fc;
    fc.split = split(data.panel, cfg.fractions);
    if (cfg.forecaster.mode == ForecasterMode::Oracle) {
        if (!data.truth) {
            throw DomainError("the oracle forecaster needs generator truth (synthetic data without aggregation)");
        }
        fc.calib = oracle_forecast(truth_forecast(data.panel, *data.truth, fc.split, SplitTag::Calib),
                                   cfg.forecaster.distortion);
        fc.test = oracle_forecast(truth_forecast(data.panel, *data.truth, fc.split, SplitTag::Test),
                                  cfg.forecaster.distortion);
    } else {
        const auto model = fit_seasonal_nb(data.panel, fc.split, cfg.forecaster.period);
        fc.calib = predict(model, data.panel, fc.split, SplitTag::Calib);
        fc.test = predict(model, data.panel, fc.split, SplitTag::Test);
    }
    fc.y_calib = targets(data.panel, fc.calib);
    fc.y_test = targets(data.panel, fc.test);
    return fc;
}

CalibrationRun run_calibrator(CalibratorKind kind, const CalibratorOptions &options, const Forecasts &fc) {
    CalibrationRun run;
    run.model = fit_calibrator(kind, fc.calib, fc.y_calib, options);
    run.intervals = apply_calibrator(run.model, fc.test);
    return run;
}

CommandResult cmd_generate(const RunConfig &cfg) {
    cfg.validate();
    if (!cfg.dataset.synthetic) {
        throw DomainError("generate needs a synthetic dataset spec");
    }
    const auto data = stage("generate", [&] { return load_dataset(cfg); });
    OutputDir out(cfg.out);
    stage("write", [&] { write_dataset(out, data); });
    return out.finish("generate", cfg, {{"dataset", dataset_summary(data)}, {"seed", *cfg.seed}});
}

CommandResult cmd_ingest(const RunConfig &cfg) {
    cfg.validate();
    if (!cfg.dataset.csv) {
        throw DomainError("ingest needs a csv dataset");
    }
    const auto data = stage("ingest", [&] { return load_dataset(cfg); });
    OutputDir out(cfg.out);
    stage("write", [&] { write_dataset(out, data); });
    return out.finish("ingest", cfg, {{"dataset", dataset_summary(data)}});
}

CommandResult cmd_forecast(const RunConfig &cfg) {
    cfg.validate();
    const auto data = stage("data", [&] { return load_dataset(cfg); });
    const auto fc = stage("forecast", [&] { return make_forecasts(cfg, data); });
    OutputDir out(cfg.out);
    stage("write", [&] {
        write_dataset(out, data);
        write_forecasts(out, fc, cfg.seed.value_or(0));
    });
    return out.finish("forecast", cfg, {{"dataset", dataset_summary(data)}});
}

CommandResult cmd_calibrate(const RunConfig &cfg) {
    cfg.validate();
    const auto panel = stage("load", [&] { return read_panel(cfg.out); });
    const auto fc = stage("load", [&] { return read_forecasts(cfg, panel); });
    const auto runs = run_calibrators(cfg, fc);
    OutputDir out(cfg.out);
    stage("write", [&] {
        out.write("intervals_pre.csv", io::intervals_csv(pre_calibration_intervals(
                                           fc.test, cfg.calibration.lo_p, cfg.calibration.hi_p)));
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto label = file_label(cfg.calibrators[i]);
            out.write("calibrator_" + label + ".json", calibrator_json(runs[i]));
            out.write("intervals_" + label + ".csv", io::intervals_csv(runs[i].intervals));
        }
    });
    return out.finish("calibrate", cfg);
}

CommandResult cmd_evaluate(const RunConfig &cfg) {
    cfg.validate();
    const auto panel = stage("load", [&] { return read_panel(cfg.out); });
    const auto fc_test = stage("load", [&] { return read_forecast(cfg.out, "forecast_test", panel.node_ids()); });
    const auto y = stage("load", [&] { return targets(panel, fc_test); });
    const Provenance prov{cfg.dataset.csv ? cfg.dataset.csv->stem().string()
                                          : fmt::format("synthetic-seed{}", cfg.seed.value_or(0)),
                          config_hash(cfg)};

    std::vector<std::pair<std::string, CalibratedIntervals>> sets;
    sets.emplace_back("pre", stage("pre-calibration", [&] {
                          return pre_calibration_intervals(fc_test, cfg.calibration.lo_p, cfg.calibration.hi_p);
                      }));
    for (auto kind : cfg.calibrators) {
        const auto label = file_label(kind);
        sets.emplace_back(label, stage("load", [&] {
                              std::ifstream in(cfg.out / ("intervals_" + label + ".csv"));
                              if (!in) {
                                  throw IoError("missing intervals_" + label + ".csv (run calibrate first)");
                              }
                              auto iv = io::parse_intervals(in, panel.node_ids());
                              iv.model_id = fc_test.model_id;
                              iv.calibrator_id = std::string(calibrator_name(kind));
                              if (iv.size() != fc_test.size()) {
                                  throw DomainError("intervals do not match the test forecast");
                              }
                              return iv;
                          }));
    }
    OutputDir out(cfg.out);
    stage("evaluate", [&] {
        for (const auto &[label, iv] : sets) {
            write_evaluation(out, label, iv, y, cfg, prov);
        }
    });
    return out.finish("evaluate", cfg);
}

CommandResult cmd_pipeline(const RunConfig &cfg) {
    cfg.validate();
    const auto data = stage("data", [&] { return load_dataset(cfg); });
    const auto fc = stage("forecast", [&] { return make_forecasts(cfg, data); });
    const auto pre = stage("pre-calibration", [&] {
        return pre_calibration_intervals(fc.test, cfg.calibration.lo_p, cfg.calibration.hi_p);
    });
    const auto runs = stage("calibrate", [&] { return run_calibrators(cfg, fc); });

    const Provenance prov{data.id, config_hash(cfg)};
    OutputDir out(cfg.out);
    stage("write", [&] {
        write_dataset(out, data);
        write_forecasts(out, fc, cfg.seed.value_or(0));
        out.write("pit_test.csv", io::cdf_curve_csv(empirical_cdf_curve(fc.test, fc.y_test)));
        out.write("intervals_pre.csv", io::intervals_csv(pre));
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto label = file_label(cfg.calibrators[i]);
            out.write("calibrator_" + label + ".json", calibrator_json(runs[i]));
            out.write("intervals_" + label + ".csv", io::intervals_csv(runs[i].intervals));
        }
    });
    stage("evaluate", [&] {
        write_evaluation(out, "pre", pre, fc.y_test, cfg, prov);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            write_evaluation(out, file_label(cfg.calibrators[i]), runs[i].intervals, fc.y_test, cfg, prov);
        }
    });
    return out.finish("pipeline", cfg, {{"dataset", dataset_summary(data)}});
}

std::vector<SweepRow> sweep_bins(const RunConfig &cfg, const Forecasts &fc) {
    const auto ence_or_nan = [&](const CalibratedIntervals &iv, PointFilter filter) {
        try {
            return ence(iv, fc.y_test, cfg.metric_bins, cfg.c, filter).ence;
        } catch (const MetricUndefined &) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    std::vector<SweepRow> rows(cfg.sweep_bins.size());
    parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) {
        auto options = cfg.calibration;
        options.n_bins = cfg.sweep_bins[i];
        const auto start = std::chrono::steady_clock::now();
        const auto model = fit_sauc(fc.calib, fc.y_calib, options);
        const auto iv = apply_sauc(model, fc.test);
        SweepRow row;
        row.n_bins = options.n_bins;
        row.ence_all = ence_or_nan(iv, PointFilter::All);
        row.ence_zero = ence_or_nan(iv, PointFilter::ZeroOnly);
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        rows[i] = row;
    });
    return rows;
}

CommandResult cmd_sweep_bins(const RunConfig &cfg) {
    cfg.validate();
    const auto data = stage("data", [&] { return load_dataset(cfg); });
    const auto fc = stage("forecast", [&] { return make_forecasts(cfg, data); });
    const auto rows = stage("sweep", [&] { return sweep_bins(cfg, fc); });
    std::string csv = "n_bins,ence_all,ence_zero,wall_ms\n";
    for (const auto &r : rows) {
        csv += fmt::format("{},{},{},{:.3f}\n", r.n_bins, io::format_number(r.ence_all),
                           io::format_number(r.ence_zero), r.wall_ms);
    }
    OutputDir out(cfg.out);
    out.write("sweep_bins.csv", csv);
    return out.finish("sweep-bins", cfg, {{"dataset", dataset_summary(data)}});
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace sauc::pipeline
