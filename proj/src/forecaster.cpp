#include "sauc/forecaster.hpp"

#include "sauc/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

namespace sauc {

namespace {

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    void merge(const Moments &o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
    double mean() const { return sum / static_cast<double>(n); }
    // Unbiased sample variance; zero for a single observation.
    double variance() const {
        if (n < 2) {
            return 0.0;
        }
        const double m = mean();
        const double ss = std::max(sum_sq - static_cast<double>(n) * m * m, 0.0);
        return ss / static_cast<double>(n - 1);
    }
};

std::pair<double, double> moment_match(const Moments &m, double epsilon, double alpha_max) {
    const double mean = m.mean();
    const double var = m.variance();
    const double mu = std::max(mean, epsilon);
    if (var <= mean) {
        return {mu, alpha_max};
    }
    const double alpha = mu * mu / std::max(var - mu, epsilon);
    return {mu, std::min(alpha, alpha_max)};
}

} // namespace

std::string_view split_tag_name(SplitTag tag) noexcept {
    return tag == SplitTag::Calib ? "calib" : "test";
}

SplitTag parse_split_tag(std::string_view name) {
    if (name == "calib") {
        return SplitTag::Calib;
    }
    if (name == "test") {
        return SplitTag::Test;
    }
    throw DomainError("unknown split tag '" + std::string(name) + "'");
}

void ForecastSet::validate() const {
    std::set<std::pair<std::size_t, std::size_t>> keys;
    for (const auto &p : points) {
        if (p.dist.family() != family) {
            throw DomainError("forecast set mixes distribution families");
        }
        if (p.node >= node_ids.size()) {
            throw DomainError("forecast point references unknown node");
        }
        if (!keys.emplace(p.node, p.timestep).second) {
            throw DomainError(fmt::format("duplicate forecast for ({}, {})", node_ids[p.node], p.timestep));
        }
    }
}

std::vector<double> targets(const CountPanel &panel, const ForecastSet &fc) {
    if (fc.node_ids != panel.node_ids()) {
        throw DomainError("forecast node ids do not match the panel");
    }
    std::vector<double> y;
    y.reserve(fc.size());
    for (const auto &p : fc.points) {
        if (p.timestep >= panel.steps()) {
            throw DomainError("forecast timestep outside the panel");
        }
        y.push_back(static_cast<double>(panel.at(p.node, p.timestep)));
    }
    return y;
}

std::pair<std::size_t, std::size_t> slice_bounds(const SplitIndex &split, SplitTag tag) {
    return tag == SplitTag::Calib ? std::make_pair(split.train_end, split.calib_end)
                                  : std::make_pair(split.calib_end, split.steps);
}

SeasonalNbModel fit_seasonal_nb(const CountPanel &panel, const SplitIndex &split, std::size_t period,
                                double epsilon) {
    if (period == 0) {
        throw DomainError("seasonal period must be >= 1");
    }
    if (split.steps != panel.steps() || split.train_end == 0) {
        throw DomainError("split does not match the panel");
    }
    SeasonalNbModel model;
    model.period = period;
    model.nodes = panel.nodes();
    model.split = split;
    model.epsilon = epsilon;
    model.mu.resize(panel.nodes() * period);
    model.alpha.resize(panel.nodes() * period);

    Moments panel_moments;
    std::vector<std::vector<Moments>> buckets(panel.nodes(), std::vector<Moments>(period));
    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        const auto row = panel.row(n);
        for (std::size_t t = 0; t < split.train_end; ++t) {
            buckets[n][t % period].add(static_cast<double>(row[t]));
        }
        for (const auto &b : buckets[n]) {
            panel_moments.merge(b);
        }
    }

    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        Moments node_moments;
        for (const auto &b : buckets[n]) {
            node_moments.merge(b);
        }
        for (std::size_t k = 0; k < period; ++k) {
            const Moments &source =
                buckets[n][k].n > 0 ? buckets[n][k] : (node_moments.n > 0 ? node_moments : panel_moments);
            const auto [mu, alpha] = moment_match(source, epsilon, model.alpha_max);
            model.mu[n * period + k] = mu;
            model.alpha[n * period + k] = alpha;
        }
    }
    return model;
}

ForecastSet predict(const SeasonalNbModel &model, const CountPanel &panel, const SplitIndex &split, SplitTag target) {
    if (!(split == model.split) || panel.nodes() != model.nodes || panel.steps() != model.split.steps) {
        throw DomainError("model was fitted on a different panel or split");
    }
    ForecastSet fc;
    fc.family = Family::NegativeBinomial;
    fc.split_tag = target;
    fc.model_id = fmt::format("seasonal-nb-p{}", model.period);
    fc.node_ids = panel.node_ids();
    const auto [begin, end] = slice_bounds(split, target);
    fc.points.reserve(panel.nodes() * (end - begin));
    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        for (std::size_t t = begin; t < end; ++t) {
            const std::size_t k = n * model.period + t % model.period;
            fc.points.push_back({n, t, PredictiveDistribution::negative_binomial(model.mu[k], model.alpha[k])});
        }
    }
    return fc;
}

ForecastSet truth_forecast(const CountPanel &panel, const std::vector<PredictiveDistribution> &truth,
                           const SplitIndex &split, SplitTag target) {
    if (truth.size() != panel.nodes() * panel.steps()) {
        throw DomainError("truth does not cover the panel");
    }
    if (split.steps != panel.steps()) {
        throw DomainError("split does not match the panel");
    }
    ForecastSet fc;
    fc.family = truth.empty() ? Family::NegativeBinomial : truth.front().family();
    fc.split_tag = target;
    fc.model_id = "oracle";
    fc.node_ids = panel.node_ids();
    const auto [begin, end] = slice_bounds(split, target);
    fc.points.reserve(panel.nodes() * (end - begin));
    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        for (std::size_t t = begin; t < end; ++t) {
            fc.points.push_back({n, t, truth[n * panel.steps() + t]});
        }
    }
    return fc;
}

ForecastSet oracle_forecast(const ForecastSet &truth, const Distortion &distortion) {
    if (!(distortion.mu_factor > 0.0) || !(distortion.alpha_factor > 0.0) || !std::isfinite(distortion.mu_factor) ||
        !std::isfinite(distortion.alpha_factor)) {
        throw DomainError("distortion factors must be positive");
    }
    ForecastSet out = truth;
    if (distortion.mu_factor == 1.0 && distortion.alpha_factor == 1.0) {
        return out;
    }
    out.model_id = fmt::format("{}-b{}-a{}", truth.model_id, distortion.mu_factor, distortion.alpha_factor);
    for (auto &p : out.points) {
        const auto &d = p.dist;
        switch (d.family()) {
        case Family::NegativeBinomial:
            p.dist = PredictiveDistribution::negative_binomial(d.mu() * distortion.mu_factor,
                                                               d.alpha() * distortion.alpha_factor);
            break;
        case Family::Poisson:
            p.dist = PredictiveDistribution::poisson(d.lambda() * distortion.mu_factor);
            break;
        case Family::Gaussian:
            p.dist = PredictiveDistribution::gaussian(d.mu() * distortion.mu_factor,
                                                      d.sigma() / std::sqrt(distortion.alpha_factor));
            break;
        }
    }
    return out;
}

} // namespace sauc
