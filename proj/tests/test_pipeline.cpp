#include "sauc/error.hpp"
#include "sauc/pipeline.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sauc;
using namespace sauc::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("sauc_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

json small_config() {
    return json::parse(R"({
        "dataset": {"synthetic": {"nodes": 4, "steps": 600, "mu": 1.0, "alpha": 1.0,
                                  "zero_inflation": 0.3, "seasonal_amplitude": 0.5,
                                  "seasonal_period": 24}},
        "split": [0.6, 0.2, 0.2],
        "forecaster": {"type": "seasonal", "period": 24},
        "calibrators": ["SAUC", "QR", "Identity"],
        "calibration": {"n_bins": 3, "zero_threshold": 0.5},
        "metrics": {"n_bins": 5, "filters": ["all", "zero"]},
        "sweep_bins": [1, 5, 10, 15, 20, 25, 30],
        "seed": 3
    })");
}

json read_json(const fs::path &p) {
    std::ifstream in(p);
    return json::parse(in);
}

} // namespace

TEST_CASE("config parsing and validation") {
    const auto cfg = config_from_json(small_config());
    CHECK(cfg.calibrators.size() == 3);
    CHECK(cfg.calibration.n_bins == 3);
    CHECK(cfg.metric_bins == 5);
    CHECK(cfg.seed == 3u);
    CHECK(cfg.forecaster.period == 24);
    CHECK(config_hash(cfg) == config_hash(config_from_json(to_json(cfg))));

    auto j = small_config();
    j["calibrators"] = "all";
    CHECK(config_from_json(j).calibrators.size() == 7);

    j = small_config();
    j["calibration"]["zero_threshold"] = nullptr;
    CHECK(config_from_json(j).calibration.zero_threshold == kSplitDisabled);

    j = small_config();
    j.erase("seed");
    CHECK_THROWS_AS(config_from_json(j).validate(), DomainError);

    j = small_config();
    j["dataset"] = json{{"csv", "/nonexistent/panel.csv"}};
    CHECK_THROWS_AS(config_from_json(j).validate(), DomainError);

    j = small_config();
    j["forecaster"] = json{{"type", "oracle"}, {"alpha_factor", 0.0}};
    CHECK_THROWS_AS(config_from_json(j).validate(), DomainError);

    j = small_config();
    j["calibrators"] = json::array({"nope"});
    CHECK_THROWS(config_from_json(j));
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    for (std::size_t jobs : {1, 3, 16}) {
        std::vector<std::atomic<int>> hits(50);
        parallel_for(50, jobs, [&](std::size_t i) { hits[i]++; });
        for (const auto &h : hits) {
            CHECK(h.load() == 1);
        }
    }
    CHECK_THROWS_AS(parallel_for(10, 4,
                                 [](std::size_t i) {
                                     if (i == 7) {
                                         throw DomainError("boom");
                                     }
                                 }),
                    DomainError);
}

TEST_CASE("pipeline is deterministic across runs and job counts") {
    auto cfg = config_from_json(small_config());
    cfg.out = scratch("det_a");
    const auto a = cmd_pipeline(cfg);
    cfg.out = scratch("det_b");
    cfg.jobs = 4;
    const auto b = cmd_pipeline(cfg);
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        CHECK(a.files[i].first == b.files[i].first);
        // Manifests embed the output path only through files, not the directory.
        CHECK(a.files[i].second == b.files[i].second);
    }
    for (const char *name : {"panel.csv", "truth.csv", "forecast_test.csv", "calibrator_sauc.json",
                             "intervals_sauc.csv", "metrics_sauc_all.json", "metrics_pre_zero.json",
                             "reliability_sauc_all.csv", "risk_sauc.csv", "manifest_pipeline.json"}) {
        CHECK(fs::exists(cfg.out / name));
    }
    fs::remove_all(scratch("det_a"));
    fs::remove_all(cfg.out);
}

TEST_CASE("Identity calibrator reports equal the pre-calibration reports") {
    auto j = small_config();
    j["calibrators"] = json::array({"Identity"});
    auto cfg = config_from_json(j);
    cfg.out = scratch("identity");
    cmd_pipeline(cfg);
    for (const char *filter : {"all", "zero"}) {
        auto pre = read_json(cfg.out / fmt::format("metrics_pre_{}.json", filter));
        auto post = read_json(cfg.out / fmt::format("metrics_identity_{}.json", filter));
        pre.erase("calibrator");
        post.erase("calibrator");
        CHECK(pre == post);
    }
    fs::remove_all(cfg.out);
}

TEST_CASE("staged commands reproduce the pipeline outputs") {
    auto j = small_config();
    j["calibrators"] = json::array({"SAUC"});
    auto cfg = config_from_json(j);
    cfg.out = scratch("staged");
    cmd_forecast(cfg);
    cmd_calibrate(cfg);
    cmd_evaluate(cfg);
    const auto staged = io::read_file(cfg.out / "intervals_sauc.csv");
    const auto staged_metrics = read_json(cfg.out / "metrics_sauc_all.json");
    const auto piped_dir = scratch("staged_ref");
    cfg.out = piped_dir;
    cmd_pipeline(cfg);
    CHECK(io::read_file(piped_dir / "intervals_sauc.csv") == staged);
    CHECK(read_json(piped_dir / "metrics_sauc_all.json") == staged_metrics);
    fs::remove_all(piped_dir);
    fs::remove_all(scratch("staged"));
}

TEST_CASE("generate records sparsity and checksums") {
    auto cfg = config_from_json(small_config());
    cfg.out = scratch("generate");
    const auto result = cmd_generate(cfg);
    const auto manifest = read_json(cfg.out / "manifest_generate.json");
    CHECK(manifest.at("dataset").at("sparsity").get<double>() > 0.0);
    CHECK(manifest.at("files").at("panel.csv") == result.files.front().second);
    CHECK(manifest.at("seed") == 3);
    fs::remove_all(cfg.out);
}

TEST_CASE("sweep produces one finite row per bin count") {
    auto cfg = config_from_json(small_config());
    const auto data = load_dataset(cfg);
    const auto fc = make_forecasts(cfg, data);
    const auto rows = sweep_bins(cfg, fc);
    REQUIRE(rows.size() == 7);
    CHECK(rows.front().n_bins == 1);
    CHECK(std::isfinite(rows.front().ence_all));
    for (const auto &r : rows) {
        CHECK(r.wall_ms >= 0.0);
    }
}

TEST_CASE("stage failures carry the stage name") {
    auto cfg = config_from_json(small_config());
    cfg.out = scratch("missing_inputs");
    try {
        cmd_calibrate(cfg);
        FAIL("expected a stage error");
    } catch (const StageError &e) {
        CHECK(e.stage() == "load");
        CHECK(std::string(e.what()).find("stage 'load'") != std::string::npos);
    }
}
