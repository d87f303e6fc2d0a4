#include "oracles.hpp"
#include "sauc/calib.hpp"
#include "sauc/error.hpp"
#include "sauc/metrics.hpp"
#include "sauc/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

using namespace sauc;

namespace {

ForecastSet nb_set(const std::vector<double> &mus, double alpha = 2.0) {
    ForecastSet fc;
    fc.family = Family::NegativeBinomial;
    fc.model_id = "test";
    fc.node_ids = {"a"};
    for (std::size_t t = 0; t < mus.size(); ++t) {
        fc.points.push_back({0, t, PredictiveDistribution::negative_binomial(mus[t], alpha)});
    }
    return fc;
}

ForecastSet gaussian_set(const std::vector<double> &mus, double sigma = 1.0) {
    ForecastSet fc;
    fc.family = Family::Gaussian;
    fc.model_id = "gauss";
    fc.node_ids = {"a"};
    for (std::size_t t = 0; t < mus.size(); ++t) {
        fc.points.push_back({0, t, PredictiveDistribution::gaussian(mus[t], sigma)});
    }
    return fc;
}

// Two populations: predicted zeros with rare spikes, and larger counts with
// a wide spread, sharing one global QR line in the baseline.
struct TwoPopulation {
    ForecastSet fc;
    std::vector<double> y;
};

TwoPopulation two_population(std::uint64_t seed, std::size_t n) {
    Xoshiro256 rng(seed);
    TwoPopulation out;
    std::vector<double> mus;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 2 == 0) {
            const double mu = 0.05 + 0.4 * rng.uniform();
            mus.push_back(mu);
            out.y.push_back(rng.uniform() < 0.1 ? 3.0 : 0.0);
        } else {
            const double mu = 2.0 + 6.0 * rng.uniform();
            mus.push_back(mu);
            out.y.push_back(std::floor(mu * 3.0 * rng.uniform()));
        }
    }
    out.fc = nb_set(mus, 1.0);
    return out;
}

} // namespace

TEST_CASE("quantile edges and routing") {
    const std::vector<double> v{5, 1, 4, 2, 3, 6};
    const auto edges = quantile_edges(v, 3);
    CHECK(edges == std::vector<double>{3.0, 5.0});
    CHECK(route_bin(edges, -10.0) == 0);
    CHECK(route_bin(edges, 2.9) == 0);
    CHECK(route_bin(edges, 3.0) == 1);
    CHECK(route_bin(edges, 100.0) == 2);
    CHECK(quantile_edges(v, 1).empty());
    CHECK_THROWS_AS(quantile_edges(v, 0), DomainError);
}

TEST_CASE("SAUC with one bin and every mean below the threshold has a single zero cell") {
    const auto fc = nb_set({0.1, 0.2, 0.3, 0.4});
    const std::vector<double> y{0, 0, 1, 0};
    CalibratorOptions opt;
    opt.n_bins = 1;
    const auto model = fit_sauc(fc, y, opt);
    CHECK(model.cells.size() == 2);
    CHECK_FALSE(model.cell(0, Segment::Zero).fallback);
    CHECK(model.cell(0, Segment::Zero).n_points == 4);
    CHECK(model.cell(0, Segment::NonZero).fallback);
    CHECK(model.fallback_cells() == 1);
}

TEST_CASE("targets equal to the predicted mean give degenerate intervals at the mean") {
    std::vector<double> mus;
    for (int i = 0; i < 60; ++i) {
        mus.push_back(0.05 + 0.2 * i);
    }
    const auto fc = gaussian_set(mus);
    CalibratorOptions opt;
    opt.n_bins = 3;
    const auto model = fit_sauc(fc, mus, opt);
    const auto out = apply_sauc(model, fc);
    for (std::size_t i = 0; i < mus.size(); ++i) {
        CHECK(std::abs(out.points[i].lower - mus[i]) <= 1e-6);
        CHECK(std::abs(out.points[i].upper - mus[i]) <= 1e-6);
    }
}

TEST_CASE("identity fits produce [mu_hat, mu_hat]") {
    const auto fc = nb_set({0.2, 1.0, 3.0});
    CalibratorModel model;
    model.kind = CalibratorKind::Sauc;
    model.options.n_bins = 1;
    model.fitted = true;
    for (Segment seg : {Segment::Zero, Segment::NonZero}) {
        SaucCell cell;
        cell.segment = seg;
        cell.n_points = 1;
        cell.fallback = false;
        cell.lower = {0.05, 0.0, 1.0, 1};
        cell.upper = {0.95, 0.0, 1.0, 1};
        model.cells.push_back(cell);
    }
    const auto out = apply_sauc(model, fc);
    for (std::size_t i = 0; i < fc.size(); ++i) {
        CHECK(out.points[i].lower == fc.points[i].dist.mean());
        CHECK(out.points[i].upper == fc.points[i].dist.mean());
        CHECK(out.points[i].mu_star == fc.points[i].dist.mean());
    }
}

TEST_CASE("test means below every threshold route to the first bin") {
    const auto data = two_population(3, 300);
    CalibratorOptions opt;
    opt.n_bins = 4;
    const auto model = fit_sauc(data.fc, data.y, opt);
    const auto probe = nb_set({1e-6});
    const auto out = apply_sauc(model, probe);
    const auto &cell = model.cell(0, Segment::Zero);
    REQUIRE_FALSE(cell.fallback);
    const double lo = std::max(0.0, std::min(cell.lower(1e-6), cell.upper(1e-6)));
    const double hi = std::max(lo, std::max(cell.lower(1e-6), cell.upper(1e-6)));
    CHECK(out.points[0].lower == lo);
    CHECK(out.points[0].upper == hi);
}

TEST_CASE("empty cells fall back to the pre-calibration interval") {
    const auto calib = nb_set({0.1, 0.2, 0.3, 0.4});
    const std::vector<double> y{0, 0, 1, 0};
    CalibratorOptions opt;
    opt.n_bins = 1;
    const auto model = fit_sauc(calib, y, opt);
    const auto test = nb_set({4.0});
    const auto out = apply_sauc(model, test);
    const auto pi = interval(test.points[0].dist);
    CHECK(out.points[0].lower == pi.lower);
    CHECK(out.points[0].upper == pi.upper);
    CHECK(out.points[0].mu_star == pi.mean);
}

TEST_CASE("mu_star modes") {
    const auto data = two_population(5, 200);
    CalibratorOptions opt;
    opt.n_bins = 2;
    const auto mid = apply_sauc(fit_sauc(data.fc, data.y, opt), data.fc);
    opt.mu_star = MuStarMode::Passthrough;
    const auto pass = apply_sauc(fit_sauc(data.fc, data.y, opt), data.fc);
    for (std::size_t i = 0; i < data.fc.size(); ++i) {
        const auto &m = mid.points[i];
        CHECK(m.mu_star == doctest::Approx(0.5 * (m.lower + m.upper)));
        CHECK(m.mu_star >= 0.0);
        CHECK(pass.points[i].mu_star == data.fc.points[i].dist.mean());
        CHECK(pass.points[i].lower == m.lower);
    }
}

TEST_CASE("SAUC with one bin and the split disabled equals the QR baseline byte for byte") {
    const auto data = two_population(7, 500);
    const auto test = two_population(8, 300);
    CalibratorOptions opt;
    opt.n_bins = 1;
    opt.zero_threshold = kSplitDisabled;
    const auto sauc_out = apply_sauc(fit_sauc(data.fc, data.y, opt), test.fc);
    const auto qr_out = fit_apply_qr_baseline(data.fc, data.y, test.fc);
    REQUIRE(sauc_out.size() == qr_out.size());
    CHECK(std::memcmp(sauc_out.points.data(), qr_out.points.data(),
                      sauc_out.size() * sizeof(CalibratedPoint)) == 0);
}

TEST_CASE("SAUC differs from the QR baseline on two distinct populations") {
    const auto data = two_population(9, 2000);
    const auto sauc_out = apply_sauc(fit_sauc(data.fc, data.y, {}), data.fc);
    const auto qr_out = fit_apply_qr_baseline(data.fc, data.y, data.fc);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < data.fc.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(sauc_out.points[i].upper - qr_out.points[i].upper));
    }
    MESSAGE("max upper-bound difference " << max_diff);
    CHECK(max_diff > 0.5);
}

TEST_CASE("QR baseline on constant targets gives both bounds equal to the constant") {
    const auto fc = nb_set({0.5, 1.0, 2.0, 4.0, 8.0});
    const std::vector<double> y(5, 3.0);
    const auto out = fit_apply_qr_baseline(fc, y, fc);
    for (const auto &p : out.points) {
        CHECK(p.lower == doctest::Approx(3.0));
        CHECK(p.upper == doctest::Approx(3.0));
    }
}

TEST_CASE("Identity reproduces the pre-calibration intervals") {
    const auto data = two_population(11, 300);
    const auto pre = pre_calibration_intervals(data.fc);
    const auto model = fit_calibrator(CalibratorKind::Identity, data.fc, data.y);
    const auto out = apply_calibrator(model, data.fc);
    CHECK(out.points == pre.points);
    CHECK(out.calibrator_id == "Identity");
}

TEST_CASE("isotonic examples") {
    const std::vector<double> x{1, 2, 3};
    const std::vector<double> inc{1, 2, 5};
    const auto id = isotonic_fit(x, inc);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(id[i].x == x[i]);
        CHECK(id[i].g == inc[i]);
    }
    const std::vector<double> y{3, 1, 2};
    const auto knots = isotonic_fit(x, y);
    const auto expected = oracle::isotonic_exhaustive(x, y);
    REQUIRE(knots.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(knots[i].g == expected[i]);
        CHECK(knots[i].g == 2.0);
    }
    CHECK(isotonic_eval(knots, 0.0) == 2.0);
    CHECK(isotonic_eval(id, 2.5) == 2.0);
    CHECK(isotonic_eval(id, 99.0) == 5.0);
}

TEST_CASE("isotonic regression equals brute-force oracles") {
    Xoshiro256 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 1 + static_cast<std::size_t>(rng.uniform() * 30.0);
        std::vector<double> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < n; ++i) {
            x.push_back(std::floor(rng.uniform() * 12.0));
            y.push_back(std::floor(rng.uniform() * 6.0));
        }
        const auto knots = isotonic_fit(x, y);
        const auto minmax = oracle::isotonic_minmax(x, y);
        REQUIRE(knots.size() == minmax.size());
        for (std::size_t i = 0; i < knots.size(); ++i) {
            CHECK(knots[i].g == doctest::Approx(minmax[i]).epsilon(1e-12));
            if (i > 0) {
                CHECK(knots[i].g >= knots[i - 1].g);
                CHECK(knots[i].x > knots[i - 1].x);
            }
        }
        if (knots.size() <= 12) {
            const auto exhaustive = oracle::isotonic_exhaustive(x, y);
            for (std::size_t i = 0; i < knots.size(); ++i) {
                CHECK(knots[i].g == doctest::Approx(exhaustive[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("isotonic calibrator output is non-decreasing in the predicted mean") {
    const auto data = two_population(15, 400);
    const auto out = fit_apply_isotonic(data.fc, data.y, data.fc);
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return data.fc.points[a].dist.mean() < data.fc.points[b].dist.mean(); });
    for (std::size_t k = 1; k < order.size(); ++k) {
        CHECK(out.points[order[k]].mu_star >= out.points[order[k - 1]].mu_star);
    }
}

TEST_CASE("Platt scaling matches least squares") {
    const std::vector<double> x{0.5, 1.0, 2.0, 3.5};
    std::vector<double> y;
    for (double v : x) {
        y.push_back(2.0 * v + 1.0);
    }
    auto p = platt_fit(x, y);
    CHECK(std::abs(p.a - 2.0) <= 1e-9);
    CHECK(std::abs(p.b - 1.0) <= 1e-9);
    p = platt_fit(x, x);
    CHECK(std::abs(p.a - 1.0) <= 1e-9);
    CHECK(std::abs(p.b) <= 1e-9);

    Xoshiro256 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> rx;
        std::vector<double> ry;
        for (int i = 0; i < 100; ++i) {
            rx.push_back(10.0 * rng.uniform());
            ry.push_back(std::floor(5.0 * rng.uniform() * rx.back()));
        }
        const auto fit = platt_fit(rx, ry);
        const auto [a, b] = oracle::least_squares(rx, ry);
        CHECK(std::abs(fit.a - a) <= 1e-9);
        CHECK(std::abs(fit.b - b) <= 1e-9);
    }
    const std::vector<double> flat(4, 2.0);
    const auto degenerate = platt_fit(flat, y);
    CHECK(degenerate.a == 0.0);
    CHECK(degenerate.b == doctest::Approx(std::accumulate(y.begin(), y.end(), 0.0) / 4.0));
}

TEST_CASE("temperature scaling closed form") {
    const std::vector<double> x{0.5, 1.0, 2.0, 3.5};
    CHECK(temperature_fit(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> half;
    for (double v : x) {
        half.push_back(v / 2.0);
    }
    CHECK(std::abs(temperature_fit(x, half) - 2.0) <= 1e-9);
    CHECK(temperature_fit(x, std::vector<double>(4, 0.0)) == 1.0);

    Xoshiro256 rng(19);
    std::vector<double> rx;
    std::vector<double> ry;
    for (int i = 0; i < 100; ++i) {
        rx.push_back(5.0 * rng.uniform());
        ry.push_back(std::floor(3.0 * rng.uniform() * rx.back()));
    }
    long double sxx = 0;
    long double sxy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxx += static_cast<long double>(rx[i]) * rx[i];
        sxy += static_cast<long double>(rx[i]) * ry[i];
    }
    CHECK(std::abs(temperature_fit(rx, ry) - static_cast<double>(sxx / sxy)) <= 1e-9);
}

TEST_CASE("histogram binning: hand-built two-bin example") {
    // Bin 0 holds means 1, 2, 3 (targets 2, 3, 4: shift +1); bin 1 holds
    // 10, 11, 12 (targets 7, 9, 11: shift -2).
    const auto calib = gaussian_set({1, 2, 3, 10, 11, 12});
    const std::vector<double> y{2, 3, 4, 7, 9, 11};
    CalibratorOptions opt;
    opt.n_bins = 2;
    const auto model = fit_calibrator(CalibratorKind::HistogramBinning, calib, y, opt);
    CHECK(model.thresholds == std::vector<double>{10.0});
    CHECK(model.bin_corrections == std::vector<double>{1.0, -2.0});

    const auto test = gaussian_set({2.5, 11.5});
    const auto out = apply_calibrator(model, test);
    const auto pre = pre_calibration_intervals(test);
    CHECK(out.points[0].mu_star == pre.points[0].mu_star + 1.0);
    CHECK(out.points[0].lower == pre.points[0].lower + 1.0);
    CHECK(out.points[0].upper == pre.points[0].upper + 1.0);
    CHECK(out.points[1].mu_star == pre.points[1].mu_star - 2.0);
    CHECK(out.points[1].lower == pre.points[1].lower - 2.0);
    CHECK(out.points[1].upper == pre.points[1].upper - 2.0);
}

TEST_CASE("histogram binning identity and single-bin shift") {
    const auto fc = gaussian_set({1, 2, 3, 4});
    const std::vector<double> same{1, 2, 3, 4};
    CalibratorOptions opt;
    opt.n_bins = 2;
    for (double c : fit_calibrator(CalibratorKind::HistogramBinning, fc, same, opt).bin_corrections) {
        CHECK(c == 0.0);
    }
    opt.n_bins = 1;
    const std::vector<double> up{3, 4, 5, 6};
    const auto out = fit_apply_histbin(fc, up, fc, opt);
    const auto pre = pre_calibration_intervals(fc);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(out.points[i].mu_star == pre.points[i].mu_star + 2.0);
        CHECK(out.points[i].upper == pre.points[i].upper + 2.0);
    }
}

TEST_CASE("every calibrator emits ordered, non-negative count intervals deterministically") {
    const auto data = two_population(21, 600);
    const auto test = two_population(22, 300);
    for (auto kind : {CalibratorKind::Sauc, CalibratorKind::QuantileRegression, CalibratorKind::Isotonic,
                      CalibratorKind::Platt, CalibratorKind::TemperatureScaling, CalibratorKind::HistogramBinning,
                      CalibratorKind::Identity}) {
        CAPTURE(calibrator_name(kind));
        const auto a = apply_calibrator(fit_calibrator(kind, data.fc, data.y), test.fc);
        const auto b = apply_calibrator(fit_calibrator(kind, data.fc, data.y), test.fc);
        CHECK(a.points == b.points);
        for (const auto &p : a.points) {
            CHECK(p.lower <= p.upper);
            CHECK(p.lower >= 0.0);
        }
        CHECK(parse_calibrator(calibrator_name(kind)) == kind);
    }
}

TEST_CASE("calibrator errors") {
    const auto fc = nb_set({1.0, 2.0});
    ForecastSet empty;
    CHECK_THROWS_AS(fit_sauc(empty, {}, {}), DomainError);
    CHECK_THROWS_AS(fit_sauc(fc, std::vector<double>{1.0}, {}), DomainError);
    CalibratorOptions bad;
    bad.n_bins = 0;
    CHECK_THROWS_AS(fit_sauc(fc, std::vector<double>{1.0, 2.0}, bad), DomainError);
    CHECK_THROWS_AS(apply_sauc(CalibratorModel{}, fc), StateError);
    CHECK_THROWS_AS(parse_calibrator("bogus"), DomainError);
}

TEST_CASE("empirical CDF curve") {
    // Calibrated continuous forecasts: PIT values are uniform.
    Xoshiro256 rng(23);
    std::vector<double> mus;
    std::vector<double> y;
    for (int i = 0; i < 10000; ++i) {
        mus.push_back(10.0 * rng.uniform());
        y.push_back(gaussian_quantile(mus.back(), 1.0, rng.uniform_open()));
    }
    const auto curve = empirical_cdf_curve(gaussian_set(mus), y);
    REQUIRE(curve.size() == 99);
    const double dkw = std::sqrt(std::log(2.0 / 0.05) / (2.0 * 10000.0));
    for (const auto &pt : curve) {
        CHECK(std::abs(pt.observed - pt.p) <= dkw);
    }

    const auto low = empirical_cdf_curve(gaussian_set({0.0, 5.0}), std::vector<double>{-100.0, -100.0});
    for (const auto &pt : low) {
        CHECK(pt.observed == 1.0);
    }

    const auto single = empirical_cdf_curve(gaussian_set({0.0}), std::vector<double>{0.0});
    for (const auto &pt : single) {
        CHECK(pt.observed == (pt.p >= 0.5 ? 1.0 : 0.0));
    }
}
