#include "sauc/error.hpp"
#include "sauc/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using sauc::pipeline::RunConfig;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> calibrator;
    std::optional<std::string> bins;
    std::optional<std::string> zero_threshold;
    std::optional<double> c;
    std::optional<std::string> filter;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
    std::optional<std::string> input;
    std::optional<std::string> layout;
    std::optional<std::size_t> aggregate;
};

std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            parts.push_back(item);
        }
    }
    return parts;
}

std::size_t parse_count(const std::string &text) {
    std::size_t pos = 0;
    const auto value = std::stoull(text, &pos);
    if (pos != text.size()) {
        throw sauc::DomainError("'" + text + "' is not a non-negative integer");
    }
    return value;
}

void add_common(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--config", o.config, "JSON run configuration");
    cmd->add_option("--seed", o.seed, "PRNG seed");
    cmd->add_option("--calibrator", o.calibrator, "calibrator kind, comma list, or 'all'");
    cmd->add_option("--bins", o.bins, "calibration bins (comma list for sweep-bins)");
    cmd->add_option("--zero-threshold", o.zero_threshold, "zero/non-zero split on mu_hat, or 'off'");
    cmd->add_option("--c", o.c, "ENCE constant");
    cmd->add_option("--filter", o.filter, "metric filter: all|zero|nonzero");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--jobs", o.jobs, "parallel calibrator / bin runs");
    cmd->add_option("--input", o.input, "CSV count panel");
    cmd->add_option("--layout", o.layout, "CSV layout: wide|long");
    cmd->add_option("--aggregate", o.aggregate, "sum consecutive timesteps in blocks of this size");
}

RunConfig build_config(const Overrides &o, bool sweep) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : sauc::pipeline::load_config(o.config);
    if (o.input) {
        cfg.dataset.synthetic.reset();
        cfg.dataset.csv = *o.input;
    }
    if (o.layout) {
        cfg.dataset.layout = sauc::parse_layout(*o.layout);
    }
    if (o.aggregate) {
        cfg.dataset.aggregate = *o.aggregate;
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.calibrator) {
        cfg.calibrators = sauc::pipeline::config_from_json(
                              {{"calibrators", *o.calibrator == "all" ? sauc::io::json("all")
                                                                      : sauc::io::json(split_list(*o.calibrator))}})
                              .calibrators;
    }
    if (o.bins) {
        const auto parts = split_list(*o.bins);
        std::vector<std::size_t> values;
        for (const auto &p : parts) {
            values.push_back(parse_count(p));
        }
        if (sweep) {
            cfg.sweep_bins = values;
        } else if (values.size() == 1) {
            cfg.calibration.n_bins = values.front();
        } else {
            throw sauc::DomainError("--bins takes a single value outside sweep-bins");
        }
    }
    if (o.zero_threshold) {
        cfg.calibration.zero_threshold =
            *o.zero_threshold == "off" ? sauc::kSplitDisabled : std::stod(*o.zero_threshold);
    }
    if (o.c) {
        cfg.c = *o.c;
    }
    if (o.filter) {
        cfg.filters = {sauc::parse_filter(*o.filter)};
    }
    if (o.out) {
        cfg.out = *o.out;
    }
    if (o.jobs) {
        cfg.jobs = *o.jobs;
    }
    return cfg;
}

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("sauc");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char *level = std::getenv("SAUC_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

} // namespace

int main(int argc, char **argv) {
    configure_logging();

    CLI::App app{"Sparsity-aware calibration of count forecast intervals"};
    app.require_subcommand(1);

    Overrides o;
    struct Command {
        const char *name;
        const char *help;
        sauc::pipeline::CommandResult (*run)(const RunConfig &);
    };
    const std::vector<Command> commands{
        {"generate", "write a synthetic panel and its true distributions", sauc::pipeline::cmd_generate},
        {"ingest", "read a CSV panel and write it in wide layout", sauc::pipeline::cmd_ingest},
        {"forecast", "fit the forecaster and write calibration/test forecasts", sauc::pipeline::cmd_forecast},
        {"calibrate", "fit calibrators on the forecasts in --out", sauc::pipeline::cmd_calibrate},
        {"evaluate", "score the intervals in --out", sauc::pipeline::cmd_evaluate},
        {"pipeline", "data, forecast, calibrate and evaluate in one run", sauc::pipeline::cmd_pipeline},
        {"sweep-bins", "ENCE and wall time of SAUC per bin count", sauc::pipeline::cmd_sweep_bins},
    };
    std::vector<CLI::App *> subs;
    for (const auto &c : commands) {
        auto *sub = app.add_subcommand(c.name, c.help);
        add_common(sub, o);
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (!subs[i]->parsed()) {
            continue;
        }
        try {
            const auto cfg = build_config(o, std::string(commands[i].name) == "sweep-bins");
            const auto result = commands[i].run(cfg);
            for (const auto &[name, digest] : result.files) {
                std::cout << digest << "  " << (cfg.out / name).string() << "\n";
            }
            return 0;
        } catch (const std::exception &e) {
            std::cerr << "sauc " << commands[i].name << ": " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
