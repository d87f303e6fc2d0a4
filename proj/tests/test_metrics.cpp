#include "sauc/error.hpp"
#include "sauc/metrics.hpp"
#include "sauc/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace sauc;

namespace {

CalibratedIntervals make_intervals(const std::vector<double> &mu_star, const std::vector<double> &widths) {
    CalibratedIntervals iv;
    iv.node_ids = {"a", "b"};
    for (std::size_t i = 0; i < mu_star.size(); ++i) {
        iv.points.push_back({i % 2, i / 2, mu_star[i], mu_star[i] - widths[i] / 2, mu_star[i] + widths[i] / 2});
    }
    return iv;
}

// Calibrated Gaussian forecasts: sigma varies per point, target drawn from
// the forecast, interval is the symmetric 90% band.
struct GaussianRun {
    CalibratedIntervals iv;
    std::vector<double> y;
};

GaussianRun gaussian_oracle(std::uint64_t seed, std::size_t n) {
    Xoshiro256 rng(seed);
    GaussianRun run;
    run.iv.node_ids = {"a"};
    const double z = gaussian_quantile(0.0, 1.0, 0.95);
    for (std::size_t i = 0; i < n; ++i) {
        const double sigma = 0.2 + 5.0 * rng.uniform();
        const double mu = 10.0 * rng.uniform();
        run.y.push_back(gaussian_quantile(mu, sigma, rng.uniform_open()));
        run.iv.points.push_back({0, i, mu, mu - z * sigma, mu + z * sigma});
    }
    return run;
}

} // namespace

TEST_CASE("hand-built 6-point, 2-bin ENCE") {
    // Widths 1..6 (given out of order); bins {1,2,3} and {4,5,6}.
    const std::vector<double> widths{4, 1, 6, 2, 5, 3};
    const std::vector<double> mu{0, 0, 0, 0, 0, 0};
    const std::vector<double> y{1, 0.5, -2, 0.5, 1, -1};
    const auto iv = make_intervals(mu, widths);
    const double c = 0.25;
    const auto r = ence(iv, y, 2, c);

    // Independent recomputation. Bin 0: residuals 0.5, 0.5, 1 (widths 1, 2, 3).
    const double rmse0 = std::sqrt((0.25 + 0.25 + 1.0) / 3.0);
    const double mpiw0 = 2.0;
    // Bin 1: residuals 1, 1, 2 (widths 4, 5, 6).
    const double rmse1 = std::sqrt((1.0 + 1.0 + 4.0) / 3.0);
    const double mpiw1 = 5.0;
    const double expected =
        0.5 * (std::abs(c * mpiw0 - rmse0) / (c * mpiw0) + std::abs(c * mpiw1 - rmse1) / (c * mpiw1));
    CHECK(r.ence == expected);
    REQUIRE(r.bins.size() == 2);
    CHECK(r.bins[0].rmse == rmse0);
    CHECK(r.bins[0].mpiw == mpiw0);
    CHECK(r.bins[0].width_min == 1.0);
    CHECK(r.bins[0].width_max == 3.0);
    CHECK(r.bins[1].width_min == 4.0);
    CHECK(r.excluded_bins == 0);
}

TEST_CASE("ENCE is zero when every residual equals c times the width") {
    const double c = kDefaultC;
    std::vector<double> mu;
    std::vector<double> widths;
    std::vector<double> y;
    // Ten points per width so each of the four bins has a single width.
    for (int i = 0; i < 40; ++i) {
        const double w = 1.0 + i / 10;
        mu.push_back(5.0);
        widths.push_back(w);
        y.push_back(5.0 + (i % 2 ? 1.0 : -1.0) * c * w);
    }
    CHECK(ence(make_intervals(mu, widths), y, 4, c).ence == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single bin with widths 3.29 and residuals 2 gives ENCE 1") {
    const auto iv = make_intervals({0, 0, 0}, {3.29, 3.29, 3.29});
    const std::vector<double> y{2, -2, 2};
    CHECK(ence(iv, y, 1).ence == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ENCE is invariant under joint rescaling") {
    const auto run = gaussian_oracle(3, 3000);
    const double base = ence(run.iv, run.y, 15).ence;
    for (double k : {0.5, 3.0}) {
        auto iv = run.iv;
        std::vector<double> y;
        for (auto &p : iv.points) {
            p.mu_star *= k;
            p.lower *= k;
            p.upper *= k;
        }
        for (double v : run.y) {
            y.push_back(k * v);
        }
        CHECK(std::abs(ence(iv, y, 15).ence - base) <= 1e-12);
    }
}

TEST_CASE("even-size binning puts the remainder in the first bins") {
    const auto iv = make_intervals({0, 0, 0, 0, 0, 0, 0}, {1, 2, 3, 4, 5, 6, 7});
    const std::vector<double> y(7, 0.0);
    const auto bins = width_bins(iv, y, 3);
    CHECK(bins[0].n_points == 3);
    CHECK(bins[1].n_points == 2);
    CHECK(bins[2].n_points == 2);
    for (std::size_t j = 1; j < bins.size(); ++j) {
        CHECK(bins[j].width_min >= bins[j - 1].width_max);
    }
}

TEST_CASE("zero-width bins are excluded and all-zero widths are undefined") {
    const auto iv = make_intervals({0, 0, 0, 0}, {0, 0, 2, 2});
    const std::vector<double> y{0, 0, 1, 1};
    const auto r = ence(iv, y, 2, 0.5);
    CHECK(r.excluded_bins == 1);
    CHECK(r.ence == doctest::Approx(0.0));

    const auto zero = make_intervals({0, 0}, {0, 0});
    CHECK_THROWS_AS(ence(zero, std::vector<double>{1, 1}, 2), MetricUndefined);
}

TEST_CASE("relative zero-width tolerance") {
    const auto iv = make_intervals({0, 0, 0, 0}, {1e-15, 1e-15, 2, 2});
    const std::vector<double> y{1, 1, 1, 1};
    const auto r = ence(iv, y, 2, 0.5);
    CHECK(r.excluded_bins == 1);
    CHECK(std::isfinite(r.ence));
}

TEST_CASE("filters") {
    const auto iv = make_intervals({0, 1, 0, 2, 1}, {1, 2, 3, 4, 5});
    const std::vector<double> y{0, 1, 0, 3, 0};
    const auto all = ence(iv, y, 1, kDefaultC, PointFilter::All);
    const auto zero = ence(iv, y, 1, kDefaultC, PointFilter::ZeroOnly);
    const auto nonzero = ence(iv, y, 1, kDefaultC, PointFilter::NonZeroOnly);
    CHECK(zero.n_points == 3);
    CHECK(nonzero.n_points == 2);
    CHECK(zero.n_points + nonzero.n_points == all.n_points);
    CHECK_THROWS_AS(ence(iv, std::vector<double>{1, 1, 1, 1, 1}, 1, kDefaultC, PointFilter::ZeroOnly),
                    MetricUndefined);
    CHECK(parse_filter("zero") == PointFilter::ZeroOnly);
    CHECK_THROWS_AS(parse_filter("some"), DomainError);
}

TEST_CASE("coverage examples") {
    const auto iv = make_intervals({1, 2, 3}, {2, 2, 2});
    auto r = coverage(iv, std::vector<double>{1, 2, 3});
    CHECK(r.coverage == 1.0);
    CHECK(r.c_star == doctest::Approx(0.1));

    const auto degenerate = make_intervals({1, 2}, {0, 0});
    CHECK(coverage(degenerate, std::vector<double>{1, 2}).coverage == 1.0);
    // Closed interval: the bounds count as covered.
    CHECK(coverage(iv, std::vector<double>{0, 3, 5}).coverage == doctest::Approx(2.0 / 3.0));
    CHECK(coverage(iv, std::vector<double>{-5, 10, 10}).c_star == doctest::Approx(0.9));
    CHECK_THROWS_AS(coverage(CalibratedIntervals{}, std::vector<double>{}), DomainError);
}

TEST_CASE("coverage is invariant under reordering") {
    const auto run = gaussian_oracle(5, 500);
    auto iv = run.iv;
    auto y = run.y;
    std::reverse(iv.points.begin(), iv.points.end());
    std::reverse(y.begin(), y.end());
    CHECK(coverage(iv, y).coverage == coverage(run.iv, run.y).coverage);
}

TEST_CASE("risk scores and node means") {
    CalibratedIntervals iv;
    iv.node_ids = {"n0", "n1"};
    iv.points.push_back({0, 0, 2.0, 1.0, 1.0});
    iv.points.push_back({0, 1, 2.0, 0.0, 3.0});
    iv.points.push_back({1, 0, 1.5, 0.0, 2.0});
    const auto rs = risk_scores(iv);
    CHECK(rs == std::vector<double>{0.0, 6.0, 3.0});
    const auto nodes = node_mean_risk(iv);
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[0].node_id == "n0");
    CHECK(nodes[0].mean_risk == 3.0);
    CHECK(nodes[0].n_points == 2);
    CHECK(nodes[1].mean_risk == 3.0);
}

TEST_CASE("reliability curve") {
    const auto run = gaussian_oracle(7, 20000);
    const auto curve = reliability_curve(run.iv, run.y, 15);
    REQUIRE(curve.size() == 15);
    double mean_dev = 0.0;
    for (std::size_t j = 0; j < curve.size(); ++j) {
        if (j > 0) {
            CHECK(curve[j].c_mpiw >= curve[j - 1].c_mpiw);
        }
        CHECK(curve[j].n_points >= 500);
        CHECK(std::abs(curve[j].rmse - curve[j].c_mpiw) <= 0.15 * curve[j].c_mpiw);
        mean_dev += std::abs(curve[j].c_mpiw - curve[j].rmse) / curve[j].c_mpiw;
    }
    CHECK(ence(run.iv, run.y, 15).ence == doctest::Approx(mean_dev / 15.0).epsilon(1e-12));
}

TEST_CASE("width-RMSE slope") {
    const auto run = gaussian_oracle(11, 10000);
    const double slope = width_rmse_slope(run.iv, run.y, 15);
    MESSAGE("slope " << slope);
    CHECK(slope >= 0.28);
    CHECK(slope <= 0.40);

    auto wide = run.iv;
    for (auto &p : wide.points) {
        const double w = p.width();
        p.lower = p.mu_star - w;
        p.upper = p.mu_star + w;
    }
    CHECK(width_rmse_slope(wide, run.y, 15) == doctest::Approx(slope / 2.0).epsilon(1e-9));

    const auto flat = make_intervals({0, 0, 0, 0}, {2, 2, 2, 2});
    CHECK_THROWS_AS(width_rmse_slope(flat, std::vector<double>{1, 0, 1, 0}, 2), MetricUndefined);
}

TEST_CASE("ENCE argument validation") {
    const auto iv = make_intervals({0}, {1});
    CHECK_THROWS_AS(ence(iv, std::vector<double>{0}, 0), DomainError);
    CHECK_THROWS_AS(ence(iv, std::vector<double>{0}, 1, 0.0), DomainError);
    CHECK_THROWS_AS(ence(iv, std::vector<double>{0, 1}, 1), DomainError);
}
