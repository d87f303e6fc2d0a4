#include "sauc/metrics.hpp"

#include "sauc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sauc {

namespace {

void require_aligned(const CalibratedIntervals &iv, std::span<const double> y) {
    if (iv.size() != y.size()) {
        throw DomainError(fmt::format("{} intervals but {} targets", iv.size(), y.size()));
    }
}

CalibratedIntervals subset(const CalibratedIntervals &iv, const std::vector<std::size_t> &keep) {
    CalibratedIntervals out;
    out.model_id = iv.model_id;
    out.calibrator_id = iv.calibrator_id;
    out.node_ids = iv.node_ids;
    out.points.reserve(keep.size());
    for (auto i : keep) {
        out.points.push_back(iv.points[i]);
    }
    return out;
}

std::vector<double> subset(std::span<const double> y, const std::vector<std::size_t> &keep) {
    std::vector<double> out;
    out.reserve(keep.size());
    for (auto i : keep) {
        out.push_back(y[i]);
    }
    return out;
}

} // namespace

std::string_view filter_name(PointFilter filter) noexcept {
    switch (filter) {
    case PointFilter::All:
        return "all";
    case PointFilter::ZeroOnly:
        return "zero";
    case PointFilter::NonZeroOnly:
        return "nonzero";
    }
    return "?";
}

PointFilter parse_filter(std::string_view name) {
    if (name == "all") {
        return PointFilter::All;
    }
    if (name == "zero" || name == "zero_only") {
        return PointFilter::ZeroOnly;
    }
    if (name == "nonzero" || name == "nonzero_only") {
        return PointFilter::NonZeroOnly;
    }
    throw DomainError("unknown filter '" + std::string(name) + "' (expected all|zero|nonzero)");
}

std::vector<std::size_t> filter_points(std::span<const double> y, PointFilter filter) {
    std::vector<std::size_t> keep;
    keep.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool zero = y[i] == 0.0;
        if (filter == PointFilter::All || (filter == PointFilter::ZeroOnly && zero) ||
            (filter == PointFilter::NonZeroOnly && !zero)) {
            keep.push_back(i);
        }
    }
    return keep;
}

std::vector<BinStats> width_bins(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_bins) {
    require_aligned(iv, y);
    if (n_bins == 0) {
        throw DomainError("n_bins must be >= 1");
    }
    std::vector<std::size_t> order(iv.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return iv.points[a].width() < iv.points[b].width(); });

    const std::size_t n = order.size();
    const std::size_t base = n / n_bins;
    const std::size_t extra = n % n_bins;
    std::vector<BinStats> bins;
    bins.reserve(n_bins);
    std::size_t pos = 0;
    for (std::size_t j = 0; j < n_bins; ++j) {
        BinStats stats;
        stats.bin = j;
        stats.n_points = base + (j < extra ? 1 : 0);
        double sq = 0.0;
        double width = 0.0;
        for (std::size_t k = 0; k < stats.n_points; ++k) {
            const auto i = order[pos + k];
            const auto &pt = iv.points[i];
            const double r = pt.mu_star - y[i];
            sq += r * r;
            width += pt.width();
        }
        if (stats.n_points > 0) {
            const double m = static_cast<double>(stats.n_points);
            stats.rmse = std::sqrt(sq / m);
            stats.mpiw = width / m;
            stats.width_min = iv.points[order[pos]].width();
            stats.width_max = iv.points[order[pos + stats.n_points - 1]].width();
        }
        pos += stats.n_points;
        bins.push_back(stats);
    }
    return bins;
}

CoverageResult coverage(const CalibratedIntervals &iv, std::span<const double> y) {
    require_aligned(iv, y);
    if (y.empty()) {
        throw DomainError("coverage of an empty set is undefined");
    }
    std::size_t inside = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto &pt = iv.points[i];
        if (pt.lower <= y[i] && y[i] <= pt.upper) {
            ++inside;
        }
    }
    const double cov = static_cast<double>(inside) / static_cast<double>(y.size());
    return {cov, std::abs(kTargetCoverage - cov)};
}

MetricsReport ence(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_bins, double c,
                   PointFilter filter) {
    require_aligned(iv, y);
    if (n_bins == 0) {
        throw DomainError("n_bins must be >= 1");
    }
    if (!(c > 0.0)) {
        throw DomainError("c must be positive");
    }
    const auto keep = filter_points(y, filter);
    if (keep.empty()) {
        throw MetricUndefined(fmt::format("no points pass the '{}' filter", filter_name(filter)));
    }
    const auto sub_iv = subset(iv, keep);
    const auto sub_y = subset(y, keep);

    MetricsReport report;
    report.c = c;
    report.n_bins = n_bins;
    report.filter = filter;
    report.n_points = keep.size();
    report.bins = width_bins(sub_iv, sub_y, n_bins);

    double widest = 0.0;
    for (const auto &b : report.bins) {
        widest = std::max(widest, b.mpiw);
    }
    const double zero_width = kZeroWidthTolerance * widest;

    double total = 0.0;
    std::size_t counted = 0;
    for (const auto &b : report.bins) {
        if (b.n_points == 0 || b.mpiw <= zero_width) {
            ++report.excluded_bins;
            continue;
        }
        total += std::abs(c * b.mpiw - b.rmse) / (c * b.mpiw);
        ++counted;
    }
    if (counted == 0) {
        throw MetricUndefined("every bin has zero interval width; ENCE is undefined");
    }
    report.ence = total / static_cast<double>(counted);

    const auto cov = coverage(sub_iv, sub_y);
    report.coverage = cov.coverage;
    report.c_star = cov.c_star;
    report.risk_scores = risk_scores(sub_iv);
    try {
        report.slope = width_rmse_slope(sub_iv, sub_y, n_bins);
    } catch (const MetricUndefined &) {
        report.slope.reset();
    }
    return report;
}

std::vector<double> risk_scores(const CalibratedIntervals &iv) {
    std::vector<double> rs;
    rs.reserve(iv.size());
    for (const auto &pt : iv.points) {
        rs.push_back(pt.mu_star * pt.width());
    }
    return rs;
}

std::vector<NodeRisk> node_mean_risk(const CalibratedIntervals &iv) {
    std::vector<double> sum(iv.node_ids.size(), 0.0);
    std::vector<std::size_t> count(iv.node_ids.size(), 0);
    for (const auto &pt : iv.points) {
        if (pt.node >= iv.node_ids.size()) {
            throw DomainError("interval references unknown node");
        }
        sum[pt.node] += pt.mu_star * pt.width();
        ++count[pt.node];
    }
    std::vector<NodeRisk> out;
    for (std::size_t n = 0; n < iv.node_ids.size(); ++n) {
        if (count[n] == 0) {
            continue;
        }
        out.push_back({iv.node_ids[n], sum[n] / static_cast<double>(count[n]), count[n]});
    }
    return out;
}

std::vector<ReliabilityPoint> reliability_curve(const CalibratedIntervals &iv, std::span<const double> y,
                                                std::size_t n_bins, double c) {
    std::vector<ReliabilityPoint> out;
    for (const auto &b : width_bins(iv, y, n_bins)) {
        if (b.n_points == 0) {
            continue;
        }
        out.push_back({b.bin, c * b.mpiw, b.rmse, b.n_points});
    }
    return out;
}

double width_rmse_slope(const CalibratedIntervals &iv, std::span<const double> y, std::size_t n_groups) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto &b : width_bins(iv, y, n_groups)) {
        if (b.n_points == 0) {
            continue;
        }
        xs.push_back(b.mpiw);
        ys.push_back(b.rmse);
    }
    if (xs.size() < 2) {
        throw MetricUndefined("slope needs at least two non-empty groups");
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 1e-300 || sxx <= 1e-24 * mx * mx * n) {
        throw MetricUndefined("interval widths do not vary across groups; slope is undefined");
    }
    return sxy / sxx;
}

} // namespace sauc
