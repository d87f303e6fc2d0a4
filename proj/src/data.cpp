#include "sauc/data.hpp"

#include "sauc/error.hpp"
#include "sauc/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace sauc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

std::int64_t parse_index(std::string_view field, std::size_t line, std::string_view what) {
    std::int64_t value = 0;
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError(line, fmt::format("{} '{}' is not an integer", what, field));
    }
    return value;
}

// Counts must be non-negative integers. Numeric but invalid values are a
// domain error; anything unparseable is a parse error.
std::int64_t parse_count(std::string_view field, std::size_t line) {
    std::int64_t value = 0;
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec == std::errc{} && ptr == end) {
        if (value < 0) {
            throw DomainError(fmt::format("line {}: negative count {}", line, value));
        }
        return value;
    }
    double real = 0.0;
    auto [rptr, rec] = std::from_chars(field.data(), end, real);
    if (rec == std::errc{} && rptr == end) {
        throw DomainError(fmt::format("line {}: count '{}' is not a non-negative integer", line, field));
    }
    throw ParseError(line, fmt::format("malformed count '{}'", field));
}

bool blank(std::string_view line) {
    return trim(line).empty();
}

CountPanel parse_wide(std::istream &in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> node_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto header = split_fields(line);
        if (header.size() < 2 || header.front() != "timestep") {
            throw ParseError(line_no, "wide header must be `timestep,<node>,...`");
        }
        for (std::size_t i = 1; i < header.size(); ++i) {
            node_ids.emplace_back(header[i]);
        }
        break;
    }
    if (node_ids.empty()) {
        throw ParseError(line_no, "missing header");
    }
    {
        std::unordered_set<std::string> seen;
        for (const auto &id : node_ids) {
            if (id.empty() || !seen.insert(id).second) {
                throw ParseError(1, fmt::format("empty or duplicate node id '{}'", id));
            }
        }
    }

    std::vector<std::pair<std::int64_t, std::vector<std::int64_t>>> rows;
    std::unordered_set<std::int64_t> seen_steps;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != node_ids.size() + 1) {
            throw ParseError(line_no,
                             fmt::format("expected {} fields, found {}", node_ids.size() + 1, fields.size()));
        }
        const auto t = parse_index(fields[0], line_no, "timestep");
        if (!seen_steps.insert(t).second) {
            throw ParseError(line_no, fmt::format("duplicate timestep {}", t));
        }
        std::vector<std::int64_t> counts;
        counts.reserve(node_ids.size());
        for (std::size_t i = 1; i < fields.size(); ++i) {
            counts.push_back(parse_count(fields[i], line_no));
        }
        rows.emplace_back(t, std::move(counts));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) { return a.first < b.first; });

    const std::size_t steps = rows.size();
    std::vector<std::int64_t> values(node_ids.size() * steps);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t n = 0; n < node_ids.size(); ++n) {
            values[n * steps + t] = rows[t].second[n];
        }
    }
    return CountPanel(std::move(node_ids), steps, std::move(values));
}

CountPanel parse_long(std::istream &in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto header = split_fields(line);
        if (header.size() != 3 || header[0] != "node_id" || header[1] != "timestep" || header[2] != "count") {
            throw ParseError(line_no, "long header must be `node_id,timestep,count`");
        }
        have_header = true;
        break;
    }
    if (!have_header) {
        throw ParseError(line_no, "missing header");
    }

    std::vector<std::string> node_ids;
    std::unordered_map<std::string, std::size_t> node_index;
    std::map<std::pair<std::size_t, std::int64_t>, std::int64_t> cells;
    std::int64_t t_min = 0;
    std::int64_t t_max = -1;
    bool any = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 3) {
            throw ParseError(line_no, fmt::format("expected 3 fields, found {}", fields.size()));
        }
        if (fields[0].empty()) {
            throw ParseError(line_no, "empty node id");
        }
        const auto t = parse_index(fields[1], line_no, "timestep");
        const auto count = parse_count(fields[2], line_no);
        std::string id(fields[0]);
        auto [it, inserted] = node_index.try_emplace(id, node_ids.size());
        if (inserted) {
            node_ids.push_back(id);
        }
        if (!cells.emplace(std::make_pair(it->second, t), count).second) {
            throw ParseError(line_no, fmt::format("duplicate cell ({}, {})", id, t));
        }
        if (!any) {
            t_min = t_max = t;
            any = true;
        } else {
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
        }
    }
    if (!any) {
        throw ParseError(line_no, "no data rows");
    }
    const auto steps = static_cast<std::size_t>(t_max - t_min + 1);
    std::vector<std::int64_t> values(node_ids.size() * steps, 0);
    for (const auto &[key, count] : cells) {
        values[key.first * steps + static_cast<std::size_t>(key.second - t_min)] = count;
    }
    return CountPanel(std::move(node_ids), steps, std::move(values));
}

double standard_normal(Xoshiro256 &rng) {
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double per_node(const std::vector<double> &values, std::size_t node) {
    return values.size() == 1 ? values.front() : values[node];
}

} // namespace

CountPanel::CountPanel(std::vector<std::string> node_ids, std::size_t steps, std::vector<std::int64_t> values,
                       std::int64_t timestep_seconds)
    : node_ids_(std::move(node_ids)), steps_(steps), values_(std::move(values)),
      timestep_seconds_(timestep_seconds) {
    if (values_.size() != node_ids_.size() * steps_) {
        throw DomainError(fmt::format("panel has {} values for {} nodes x {} steps", values_.size(),
                                      node_ids_.size(), steps_));
    }
    if (timestep_seconds_ <= 0) {
        throw DomainError("timestep_seconds must be positive");
    }
    std::unordered_set<std::string> seen;
    for (const auto &id : node_ids_) {
        if (!seen.insert(id).second) {
            throw DomainError(fmt::format("duplicate node id '{}'", id));
        }
    }
    for (auto v : values_) {
        if (v < 0) {
            throw DomainError("panel counts must be non-negative");
        }
    }
}

double CountPanel::sparsity() const noexcept {
    if (values_.empty()) {
        return 0.0;
    }
    const auto zeros = std::count(values_.begin(), values_.end(), 0);
    return static_cast<double>(zeros) / static_cast<double>(values_.size());
}

double CountPanel::mean() const noexcept {
    if (values_.empty()) {
        return 0.0;
    }
    long double sum = 0.0;
    for (auto v : values_) {
        sum += static_cast<long double>(v);
    }
    return static_cast<double>(sum / static_cast<long double>(values_.size()));
}

CsvLayout parse_layout(std::string_view name) {
    if (name == "wide") {
        return CsvLayout::Wide;
    }
    if (name == "long") {
        return CsvLayout::Long;
    }
    throw DomainError("unknown CSV layout '" + std::string(name) + "' (expected wide|long)");
}

CountPanel parse_csv(std::istream &in, CsvLayout layout) {
    return layout == CsvLayout::Wide ? parse_wide(in) : parse_long(in);
}

CountPanel ingest_csv(const std::filesystem::path &path, CsvLayout layout) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_csv(in, layout);
}

void write_wide_csv(std::ostream &out, const CountPanel &panel) {
    std::string buf = "timestep";
    for (const auto &id : panel.node_ids()) {
        buf += ',';
        buf += id;
    }
    buf += '\n';
    for (std::size_t t = 0; t < panel.steps(); ++t) {
        fmt::format_to(std::back_inserter(buf), "{}", t);
        for (std::size_t n = 0; n < panel.nodes(); ++n) {
            fmt::format_to(std::back_inserter(buf), ",{}", panel.at(n, t));
        }
        buf += '\n';
    }
    out << buf;
}

CountPanel aggregate(const CountPanel &panel, std::size_t factor) {
    if (factor == 0) {
        throw DomainError("aggregation factor must be >= 1");
    }
    const std::size_t steps = panel.steps() / factor;
    std::vector<std::int64_t> values(panel.nodes() * steps, 0);
    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        const auto row = panel.row(n);
        for (std::size_t b = 0; b < steps; ++b) {
            std::int64_t sum = 0;
            for (std::size_t k = 0; k < factor; ++k) {
                sum += row[b * factor + k];
            }
            values[n * steps + b] = sum;
        }
    }
    return CountPanel(panel.node_ids(), steps, std::move(values),
                      panel.timestep_seconds() * static_cast<std::int64_t>(factor));
}

SplitIndex split(std::size_t steps, const SplitFractions &f) {
    if (!(f.train > 0.0 && f.calib > 0.0 && f.test > 0.0)) {
        throw DomainError("split fractions must all be positive");
    }
    if (std::abs(f.train + f.calib + f.test - 1.0) > 1e-9) {
        throw DomainError("split fractions must sum to 1");
    }
    const double t = static_cast<double>(steps);
    SplitIndex out;
    out.steps = steps;
    // The small nudge keeps products like 0.6 * 10 from flooring to 5.
    out.train_end = static_cast<std::size_t>(std::floor(f.train * t + 1e-9));
    out.calib_end = static_cast<std::size_t>(std::floor((f.train + f.calib) * t + 1e-9));
    if (!(0 < out.train_end && out.train_end < out.calib_end && out.calib_end < steps)) {
        throw DomainError(fmt::format("split of {} timesteps leaves an empty partition", steps));
    }
    return out;
}

AdjacencyMatrix build_adjacency(std::span<const Centroid> centroids, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw DomainError("adjacency scale must be positive");
    }
    for (const auto &c : centroids) {
        if (!std::isfinite(c.x) || !std::isfinite(c.y)) {
            throw DomainError("centroid coordinates must be finite");
        }
    }
    const std::size_t n = centroids.size();
    std::vector<double> w(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::hypot(centroids[i].x - centroids[j].x, centroids[i].y - centroids[j].y);
            // Underflow would leave a zero weight; keep every entry in (0, 1].
            const double v = std::max(std::exp(-d / scale), std::numeric_limits<double>::min());
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    return AdjacencyMatrix(n, std::move(w), scale);
}

void SyntheticSpec::validate() const {
    if (nodes == 0 || steps == 0) {
        throw DomainError("synthetic spec needs nodes >= 1 and steps >= 1");
    }
    if (mu.size() != 1 && mu.size() != nodes) {
        throw DomainError("mu must have one value or one per node");
    }
    if (alpha.size() != 1 && alpha.size() != nodes) {
        throw DomainError("alpha must have one value or one per node");
    }
    for (double m : mu) {
        if (!(m > 0.0) || !std::isfinite(m)) {
            throw DomainError("mu must be finite and > 0");
        }
    }
    for (double a : alpha) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw DomainError("alpha must be finite and > 0");
        }
    }
    if (!(zero_inflation >= 0.0 && zero_inflation < 1.0)) {
        throw DomainError("zero_inflation must lie in [0, 1)");
    }
    if (!(seasonal_amplitude >= 0.0 && seasonal_amplitude < 1.0)) {
        throw DomainError("seasonal_amplitude must lie in [0, 1)");
    }
    if (seasonal_period == 0) {
        throw DomainError("seasonal_period must be >= 1");
    }
    if (!(mu_spread >= 0.0) || !std::isfinite(mu_spread)) {
        throw DomainError("mu_spread must be finite and >= 0");
    }
}

std::vector<double> synthetic_node_rates(const SyntheticSpec &spec, std::uint64_t seed) {
    spec.validate();
    Xoshiro256 root(seed);
    Xoshiro256 rng = root.fork(0);
    std::vector<double> rates(spec.nodes);
    for (std::size_t n = 0; n < spec.nodes; ++n) {
        const double z = standard_normal(rng);
        rates[n] = per_node(spec.mu, n);
        if (spec.mu_spread > 0.0) {
            rates[n] *= std::exp(spec.mu_spread * z - 0.5 * spec.mu_spread * spec.mu_spread);
        }
    }
    return rates;
}

SyntheticData generate_synthetic(const SyntheticSpec &spec, std::uint64_t seed) {
    spec.validate();
    const auto rates = synthetic_node_rates(spec, seed);
    Xoshiro256 root(seed);
    Xoshiro256 phase_rng = root.fork(1);

    std::vector<std::string> ids;
    ids.reserve(spec.nodes);
    std::vector<std::int64_t> values(spec.nodes * spec.steps, 0);
    std::vector<PredictiveDistribution> truth;
    truth.reserve(spec.nodes * spec.steps);

    const double period = static_cast<double>(spec.seasonal_period);
    for (std::size_t n = 0; n < spec.nodes; ++n) {
        ids.push_back(fmt::format("n{:03d}", n));
        const double phase = std::floor(phase_rng.uniform() * period);
        const double alpha = per_node(spec.alpha, n);
        Xoshiro256 cell_rng = root.fork(2 + n);
        for (std::size_t t = 0; t < spec.steps; ++t) {
            double mu = rates[n];
            if (spec.seasonal_amplitude > 0.0) {
                const double angle = 2.0 * std::numbers::pi * std::fmod(static_cast<double>(t) + phase, period) / period;
                mu *= 1.0 + spec.seasonal_amplitude * std::sin(angle);
            }
            // Two draws per cell regardless of outcome keep the stream layout fixed.
            const double u_mask = cell_rng.uniform();
            const double u_count = cell_rng.uniform_open();
            const bool structural_zero = u_mask < spec.zero_inflation;
            values[n * spec.steps + t] = structural_zero ? 0 : nb_quantile(mu, alpha, u_count);
            truth.push_back(PredictiveDistribution::negative_binomial(mu, alpha));
        }
    }
    return {CountPanel(std::move(ids), spec.steps, std::move(values)), std::move(truth)};
}

} // namespace sauc
