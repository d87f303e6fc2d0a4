#include "sauc/calib.hpp"

#include "sauc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sauc {

namespace {

void require_aligned(const ForecastSet &fc, std::span<const double> y) {
    if (fc.points.empty()) {
        throw DomainError("calibration set is empty");
    }
    if (fc.size() != y.size()) {
        throw DomainError(fmt::format("{} forecasts but {} targets", fc.size(), y.size()));
    }
}

std::vector<double> predicted_means(const ForecastSet &fc) {
    std::vector<double> out;
    out.reserve(fc.size());
    for (const auto &p : fc.points) {
        out.push_back(p.dist.mean());
    }
    return out;
}

CalibratedIntervals empty_output(const ForecastSet &fc, CalibratorKind kind) {
    CalibratedIntervals out;
    out.model_id = fc.model_id;
    out.calibrator_id = std::string(calibrator_name(kind));
    out.node_ids = fc.node_ids;
    out.points.reserve(fc.size());
    return out;
}

// Orders and clamps a transformed interval for the output contract.
CalibratedPoint finalize(const PointForecast &p, double mu_star, double lower, double upper, bool count_family) {
    if (lower > upper) {
        std::swap(lower, upper);
    }
    if (count_family) {
        lower = std::max(lower, 0.0);
        upper = std::max(upper, lower);
        mu_star = std::max(mu_star, 0.0);
    }
    return {p.node, p.timestep, mu_star, lower, upper};
}

// Applies a monotone point map g to mu_hat and both pre-calibration endpoints.
template <typename Map>
CalibratedIntervals transform_endpoints(const CalibratorModel &model, const ForecastSet &fc_test, Map g) {
    auto out = empty_output(fc_test, model.kind);
    const bool counts = is_count_family(fc_test.family);
    for (const auto &p : fc_test.points) {
        const auto pi = interval(p.dist, model.options.lo_p, model.options.hi_p);
        out.points.push_back(finalize(p, g(pi.mean), g(pi.lower), g(pi.upper), counts));
    }
    return out;
}

void require_fitted(const CalibratorModel &model, CalibratorKind kind) {
    if (!model.fitted) {
        throw StateError("calibrator has not been fitted");
    }
    if (model.kind != kind) {
        throw StateError(fmt::format("model kind {} cannot be applied as {}", calibrator_name(model.kind),
                                     calibrator_name(kind)));
    }
}

CalibratorModel base_model(CalibratorKind kind, const ForecastSet &fc_calib, std::span<const double> y,
                           const CalibratorOptions &options) {
    options.validate();
    require_aligned(fc_calib, y);
    CalibratorModel model;
    model.kind = kind;
    model.options = options;
    model.family = fc_calib.family;
    model.n_calib = fc_calib.size();
    return model;
}

std::size_t cell_index(std::size_t bin, Segment segment) {
    return 2 * bin + (segment == Segment::NonZero ? 1 : 0);
}

Segment segment_of(double mu_hat, double threshold) {
    return mu_hat < threshold ? Segment::Zero : Segment::NonZero;
}

CalibratorModel fit_segmented_qr(CalibratorKind kind, const ForecastSet &fc_calib, std::span<const double> y,
                                 const CalibratorOptions &options) {
    auto model = base_model(kind, fc_calib, y, options);
    const auto x = predicted_means(fc_calib);
    model.thresholds = options.bin_on == BinOn::MuHat ? quantile_edges(x, options.n_bins)
                                                      : quantile_edges(y, options.n_bins);

    std::vector<std::vector<std::size_t>> members(2 * options.n_bins);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto bin = route_bin(model.thresholds, x[i]);
        members[cell_index(bin, segment_of(x[i], options.zero_threshold))].push_back(i);
    }

    model.cells.resize(2 * options.n_bins);
    std::vector<double> cx;
    std::vector<double> cy;
    for (std::size_t bin = 0; bin < options.n_bins; ++bin) {
        for (Segment seg : {Segment::Zero, Segment::NonZero}) {
            auto &cell = model.cells[cell_index(bin, seg)];
            const auto &idx = members[cell_index(bin, seg)];
            cell.bin = bin;
            cell.segment = seg;
            cell.n_points = idx.size();
            cell.fallback = idx.empty();
            cell.lower.p = options.lo_p;
            cell.upper.p = options.hi_p;
            if (idx.empty()) {
                continue;
            }
            cx.clear();
            cy.clear();
            for (auto i : idx) {
                cx.push_back(x[i]);
                cy.push_back(y[i]);
            }
            cell.lower = fit_quantile(cx, cy, options.lo_p);
            cell.upper = fit_quantile(cx, cy, options.hi_p);
        }
    }
    model.fitted = true;
    return model;
}

CalibratedIntervals apply_segmented_qr(const CalibratorModel &model, const ForecastSet &fc_test) {
    auto out = empty_output(fc_test, model.kind);
    const bool counts = is_count_family(fc_test.family);
    for (const auto &p : fc_test.points) {
        const double mu_hat = p.dist.mean();
        const auto bin = route_bin(model.thresholds, mu_hat);
        const auto &cell = model.cell(bin, segment_of(mu_hat, model.options.zero_threshold));
        if (cell.fallback) {
            const auto pi = interval(p.dist, model.options.lo_p, model.options.hi_p);
            out.points.push_back(finalize(p, pi.mean, pi.lower, pi.upper, counts));
            continue;
        }
        double lower = cell.lower(mu_hat);
        double upper = cell.upper(mu_hat);
        if (lower > upper) {
            std::swap(lower, upper);
        }
        if (counts) {
            lower = std::max(lower, 0.0);
            upper = std::max(upper, lower);
        }
        const double mu_star = model.options.mu_star == MuStarMode::Midpoint ? 0.5 * (lower + upper) : mu_hat;
        out.points.push_back(finalize(p, mu_star, lower, upper, counts));
    }
    return out;
}

} // namespace

std::string_view calibrator_name(CalibratorKind kind) noexcept {
    switch (kind) {
    case CalibratorKind::Sauc:
        return "SAUC";
    case CalibratorKind::QuantileRegression:
        return "QR";
    case CalibratorKind::Isotonic:
        return "Isotonic";
    case CalibratorKind::Platt:
        return "Platt";
    case CalibratorKind::TemperatureScaling:
        return "TempScaling";
    case CalibratorKind::HistogramBinning:
        return "HistBinning";
    case CalibratorKind::Identity:
        return "Identity";
    }
    return "?";
}

CalibratorKind parse_calibrator(std::string_view name) {
    for (auto kind : {CalibratorKind::Sauc, CalibratorKind::QuantileRegression, CalibratorKind::Isotonic,
                      CalibratorKind::Platt, CalibratorKind::TemperatureScaling, CalibratorKind::HistogramBinning,
                      CalibratorKind::Identity}) {
        std::string canonical(calibrator_name(kind));
        std::string lowered(name);
        std::transform(canonical.begin(), canonical.end(), canonical.begin(), ::tolower);
        std::transform(lowered.begin(), lowered.end(), lowered.begin(), ::tolower);
        if (canonical == lowered) {
            return kind;
        }
    }
    if (name == "temp" || name == "temperature") {
        return CalibratorKind::TemperatureScaling;
    }
    if (name == "histbin" || name == "histogram") {
        return CalibratorKind::HistogramBinning;
    }
    throw DomainError("unknown calibrator '" + std::string(name) + "'");
}

std::string_view mu_star_mode_name(MuStarMode mode) noexcept {
    return mode == MuStarMode::Midpoint ? "midpoint" : "passthrough";
}

MuStarMode parse_mu_star_mode(std::string_view name) {
    if (name == "midpoint") {
        return MuStarMode::Midpoint;
    }
    if (name == "passthrough") {
        return MuStarMode::Passthrough;
    }
    throw DomainError("unknown mu_star mode '" + std::string(name) + "'");
}

std::string_view bin_on_name(BinOn mode) noexcept {
    return mode == BinOn::MuHat ? "mu_hat" : "y_calib_thresholds_applied_to_mu_hat";
}

BinOn parse_bin_on(std::string_view name) {
    if (name == "mu_hat") {
        return BinOn::MuHat;
    }
    if (name == "y_calib_thresholds_applied_to_mu_hat" || name == "y_calib") {
        return BinOn::TargetPercentiles;
    }
    throw DomainError("unknown bin_on mode '" + std::string(name) + "'");
}

std::string_view segment_name(Segment segment) noexcept {
    return segment == Segment::Zero ? "zero" : "nonzero";
}

void CalibratorOptions::validate() const {
    if (n_bins == 0) {
        throw DomainError("n_bins must be >= 1");
    }
    if (!(zero_threshold > 0.0) && zero_threshold != kSplitDisabled) {
        throw DomainError("zero_threshold must be > 0 (or disabled)");
    }
    if (!(lo_p > 0.0 && lo_p < hi_p && hi_p < 1.0)) {
        throw DomainError("interval levels must satisfy 0 < lo_p < hi_p < 1");
    }
}

std::size_t CalibratorModel::fallback_cells() const noexcept {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const SaucCell &c) { return c.fallback; }));
}

const SaucCell &CalibratorModel::cell(std::size_t bin, Segment segment) const {
    const auto i = cell_index(bin, segment);
    if (i >= cells.size()) {
        throw StateError("calibrator cell out of range");
    }
    return cells[i];
}

std::size_t route_bin(std::span<const double> edges, double x) noexcept {
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::vector<double> quantile_edges(std::span<const double> values, std::size_t n_bins) {
    if (n_bins == 0) {
        throw DomainError("n_bins must be >= 1");
    }
    if (values.empty()) {
        throw DomainError("cannot bin an empty set");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    edges.reserve(n_bins - 1);
    const std::size_t n = sorted.size();
    for (std::size_t k = 1; k < n_bins; ++k) {
        edges.push_back(sorted[std::min(k * n / n_bins, n - 1)]);
    }
    return edges;
}

CalibratedIntervals pre_calibration_intervals(const ForecastSet &fc, double lo_p, double hi_p) {
    auto out = empty_output(fc, CalibratorKind::Identity);
    for (const auto &p : fc.points) {
        const auto pi = interval(p.dist, lo_p, hi_p);
        out.points.push_back({p.node, p.timestep, pi.mean, pi.lower, pi.upper});
    }
    return out;
}

CalibratorModel fit_sauc(const ForecastSet &fc_calib, std::span<const double> y_calib,
                         const CalibratorOptions &options) {
    return fit_segmented_qr(CalibratorKind::Sauc, fc_calib, y_calib, options);
}

CalibratedIntervals apply_sauc(const CalibratorModel &model, const ForecastSet &fc_test) {
    require_fitted(model, CalibratorKind::Sauc);
    return apply_segmented_qr(model, fc_test);
}

CalibratedIntervals fit_apply_qr_baseline(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                          const ForecastSet &fc_test, const CalibratorOptions &options) {
    return apply_calibrator(fit_calibrator(CalibratorKind::QuantileRegression, fc_calib, y_calib, options), fc_test);
}

CalibratedIntervals fit_apply_isotonic(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                       const ForecastSet &fc_test, const CalibratorOptions &options) {
    return apply_calibrator(fit_calibrator(CalibratorKind::Isotonic, fc_calib, y_calib, options), fc_test);
}

CalibratedIntervals fit_apply_platt(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                    const ForecastSet &fc_test, const CalibratorOptions &options) {
    return apply_calibrator(fit_calibrator(CalibratorKind::Platt, fc_calib, y_calib, options), fc_test);
}

CalibratedIntervals fit_apply_temp(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                   const ForecastSet &fc_test, const CalibratorOptions &options) {
    return apply_calibrator(fit_calibrator(CalibratorKind::TemperatureScaling, fc_calib, y_calib, options), fc_test);
}

CalibratedIntervals fit_apply_histbin(const ForecastSet &fc_calib, std::span<const double> y_calib,
                                      const ForecastSet &fc_test, const CalibratorOptions &options) {
    return apply_calibrator(fit_calibrator(CalibratorKind::HistogramBinning, fc_calib, y_calib, options), fc_test);
}

std::vector<IsotonicKnot> isotonic_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) {
        throw DomainError("isotonic regression needs equally sized, non-empty inputs");
    }
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    struct Block {
        double x_first;
        double sum;
        double weight;
        std::size_t knots; // distinct x values pooled into this block
        double value() const { return sum / weight; }
    };
    std::vector<Block> blocks;
    std::vector<double> knot_x;
    std::size_t i = 0;
    while (i < order.size()) {
        const double xv = x[order[i]];
        double sum = 0.0;
        double w = 0.0;
        while (i < order.size() && x[order[i]] == xv) {
            sum += y[order[i]];
            w += 1.0;
            ++i;
        }
        knot_x.push_back(xv);
        blocks.push_back({xv, sum, w, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value() > blocks.back().value()) {
            Block top = blocks.back();
            blocks.pop_back();
            auto &prev = blocks.back();
            prev.sum += top.sum;
            prev.weight += top.weight;
            prev.knots += top.knots;
        }
    }
    std::vector<IsotonicKnot> knots;
    knots.reserve(knot_x.size());
    std::size_t k = 0;
    for (const auto &b : blocks) {
        for (std::size_t j = 0; j < b.knots; ++j) {
            knots.push_back({knot_x[k++], b.value()});
        }
    }
    return knots;
}

double isotonic_eval(std::span<const IsotonicKnot> knots, double v) {
    if (knots.empty()) {
        throw StateError("isotonic map has no knots");
    }
    auto it = std::upper_bound(knots.begin(), knots.end(), v,
                               [](double value, const IsotonicKnot &k) { return value < k.x; });
    if (it == knots.begin()) {
        return knots.front().g;
    }
    return std::prev(it)->g;
}

PlattParams platt_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) {
        throw DomainError("Platt scaling needs equally sized, non-empty inputs");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        return {0.0, my};
    }
    const double a = sxy / sxx;
    return {a, my - a * mx};
}

double temperature_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) {
        throw DomainError("temperature scaling needs equally sized, non-empty inputs");
    }
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    if (!(sxy > 0.0) || !(sxx > 0.0)) {
        return 1.0;
    }
    return sxx / sxy;
}

CalibratorModel fit_calibrator(CalibratorKind kind, const ForecastSet &fc_calib, std::span<const double> y_calib,
                               const CalibratorOptions &options) {
    switch (kind) {
    case CalibratorKind::Sauc:
        return fit_sauc(fc_calib, y_calib, options);
    case CalibratorKind::QuantileRegression: {
        CalibratorOptions global = options;
        global.n_bins = 1;
        global.zero_threshold = kSplitDisabled;
        global.bin_on = BinOn::MuHat;
        return fit_segmented_qr(CalibratorKind::QuantileRegression, fc_calib, y_calib, global);
    }
    default:
        break;
    }

    auto model = base_model(kind, fc_calib, y_calib, options);
    const auto x = predicted_means(fc_calib);
    switch (kind) {
    case CalibratorKind::Isotonic:
        model.knots = isotonic_fit(x, y_calib);
        break;
    case CalibratorKind::Platt: {
        const auto params = platt_fit(x, y_calib);
        model.platt_a = params.a;
        model.platt_b = params.b;
        break;
    }
    case CalibratorKind::TemperatureScaling:
        model.temperature = temperature_fit(x, y_calib);
        break;
    case CalibratorKind::HistogramBinning: {
        model.thresholds = quantile_edges(x, options.n_bins);
        std::vector<double> sum_y(options.n_bins, 0.0);
        std::vector<double> sum_x(options.n_bins, 0.0);
        std::vector<std::size_t> count(options.n_bins, 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto b = route_bin(model.thresholds, x[i]);
            sum_y[b] += y_calib[i];
            sum_x[b] += x[i];
            ++count[b];
        }
        model.bin_corrections.assign(options.n_bins, 0.0);
        for (std::size_t b = 0; b < options.n_bins; ++b) {
            if (count[b] > 0) {
                const double c = static_cast<double>(count[b]);
                model.bin_corrections[b] = sum_y[b] / c - sum_x[b] / c;
            }
        }
        break;
    }
    case CalibratorKind::Identity:
        break;
    default:
        break;
    }
    model.fitted = true;
    return model;
}

CalibratedIntervals apply_calibrator(const CalibratorModel &model, const ForecastSet &fc_test) {
    if (!model.fitted) {
        throw StateError("calibrator has not been fitted");
    }
    switch (model.kind) {
    case CalibratorKind::Sauc:
    case CalibratorKind::QuantileRegression:
        return apply_segmented_qr(model, fc_test);
    case CalibratorKind::Isotonic:
        return transform_endpoints(model, fc_test, [&](double v) { return isotonic_eval(model.knots, v); });
    case CalibratorKind::Platt:
        return transform_endpoints(model, fc_test, [&](double v) { return model.platt_a * v + model.platt_b; });
    case CalibratorKind::TemperatureScaling:
        return transform_endpoints(model, fc_test, [&](double v) { return v / model.temperature; });
    case CalibratorKind::HistogramBinning: {
        auto out = empty_output(fc_test, model.kind);
        const bool counts = is_count_family(fc_test.family);
        for (const auto &p : fc_test.points) {
            const auto pi = interval(p.dist, model.options.lo_p, model.options.hi_p);
            const double shift = model.bin_corrections[route_bin(model.thresholds, pi.mean)];
            out.points.push_back(finalize(p, pi.mean + shift, pi.lower + shift, pi.upper + shift, counts));
        }
        return out;
    }
    case CalibratorKind::Identity: {
        auto out = pre_calibration_intervals(fc_test, model.options.lo_p, model.options.hi_p);
        out.calibrator_id = std::string(calibrator_name(CalibratorKind::Identity));
        return out;
    }
    }
    throw StateError("unknown calibrator kind");
}

std::vector<CdfCurvePoint> empirical_cdf_curve(const ForecastSet &fc, std::span<const double> y) {
    require_aligned(fc, y);
    std::vector<double> pit;
    pit.reserve(fc.size());
    for (std::size_t i = 0; i < fc.size(); ++i) {
        pit.push_back(cdf(fc.points[i].dist, y[i]));
    }
    std::sort(pit.begin(), pit.end());
    std::vector<CdfCurvePoint> curve;
    curve.reserve(99);
    const double n = static_cast<double>(pit.size());
    for (int k = 1; k <= 99; ++k) {
        const double p = k / 100.0;
        const auto below = std::upper_bound(pit.begin(), pit.end(), p) - pit.begin();
        curve.push_back({p, static_cast<double>(below) / n});
    }
    return curve;
}

} // namespace sauc
