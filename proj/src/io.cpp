#include "sauc/io.hpp"

#include "sauc/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

namespace sauc::io {

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            auto last = line.substr(start);
            if (!last.empty() && last.back() == '\r') {
                last.remove_suffix(1);
            }
            out.push_back(last);
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line, fmt::format("'{}' is not a number", s));
    }
    return v;
}

std::size_t parse_size(std::string_view s, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line, fmt::format("'{}' is not a non-negative integer", s));
    }
    return v;
}

std::unordered_map<std::string, std::size_t> index_nodes(const std::vector<std::string> &ids) {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(ids[i], i);
    }
    return out;
}

std::size_t lookup_node(const std::unordered_map<std::string, std::size_t> &index, std::string_view id,
                        std::size_t line) {
    auto it = index.find(std::string(id));
    if (it == index.end()) {
        throw ParseError(line, fmt::format("unknown node id '{}'", id));
    }
    return it->second;
}

const char *param_header(Family family) {
    switch (family) {
    case Family::NegativeBinomial:
        return "mu,alpha";
    case Family::Poisson:
        return "lambda";
    case Family::Gaussian:
        return "mu,sigma";
    }
    return "";
}

void append_params(std::string &buf, const PredictiveDistribution &d) {
    if (d.family() == Family::Poisson) {
        buf += format_number(d.first());
    } else {
        buf += format_number(d.first());
        buf += ',';
        buf += format_number(d.second());
    }
}

PredictiveDistribution make_dist(Family family, const std::vector<std::string_view> &f, std::size_t offset,
                                 std::size_t line) {
    try {
        switch (family) {
        case Family::NegativeBinomial:
            return PredictiveDistribution::negative_binomial(parse_double(f.at(offset), line),
                                                             parse_double(f.at(offset + 1), line));
        case Family::Poisson:
            return PredictiveDistribution::poisson(parse_double(f.at(offset), line));
        case Family::Gaussian:
            return PredictiveDistribution::gaussian(parse_double(f.at(offset), line),
                                                    parse_double(f.at(offset + 1), line));
        }
    } catch (const std::out_of_range &) {
        throw ParseError(line, "missing distribution parameters");
    } catch (const DomainError &e) {
        throw ParseError(line, e.what());
    }
    throw ParseError(line, "unknown family");
}

std::string hex_digest(const unsigned char *bytes, unsigned len) {
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        fmt::format_to(std::back_inserter(out), "{:02x}", bytes[i]);
    }
    return out;
}

} // namespace

void write_file_atomic(const std::filesystem::path &path, const std::string &contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError(fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
        }
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
    }
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string &bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 failed");
    }
    return hex_digest(digest, len);
}

std::string sha256_file(const std::filesystem::path &path) {
    return sha256_hex(read_file(path));
}

std::string format_number(double v) {
    return fmt::format("{}", v);
}

std::string panel_csv(const CountPanel &panel) {
    std::ostringstream ss;
    write_wide_csv(ss, panel);
    return ss.str();
}

std::string truth_csv(const CountPanel &panel, const std::vector<PredictiveDistribution> &truth) {
    if (truth.size() != panel.nodes() * panel.steps()) {
        throw DomainError("truth does not cover the panel");
    }
    const Family family = truth.empty() ? Family::NegativeBinomial : truth.front().family();
    std::string buf = fmt::format("node_id,timestep,family,{}\n", param_header(family));
    for (std::size_t n = 0; n < panel.nodes(); ++n) {
        for (std::size_t t = 0; t < panel.steps(); ++t) {
            const auto &d = truth[n * panel.steps() + t];
            fmt::format_to(std::back_inserter(buf), "{},{},{},", panel.node_ids()[n], t, family_name(d.family()));
            append_params(buf, d);
            buf += '\n';
        }
    }
    return buf;
}

std::vector<PredictiveDistribution> parse_truth_csv(std::istream &in, const CountPanel &panel) {
    const auto index = index_nodes(panel.node_ids());
    std::vector<PredictiveDistribution> truth(panel.nodes() * panel.steps(), PredictiveDistribution::poisson(0.0));
    std::vector<char> seen(truth.size(), 0);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing header");
    }
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = fields_of(line);
        if (f.size() < 4) {
            throw ParseError(line_no, "truth row needs node_id,timestep,family,params");
        }
        const auto node = lookup_node(index, f[0], line_no);
        const auto t = parse_size(f[1], line_no);
        if (t >= panel.steps()) {
            throw ParseError(line_no, "timestep outside the panel");
        }
        const auto cell = node * panel.steps() + t;
        truth[cell] = make_dist(parse_family(f[2]), f, 3, line_no);
        seen[cell] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw ParseError(line_no, "truth file does not cover every panel cell");
    }
    return truth;
}

std::string forecast_csv(const ForecastSet &fc) {
    std::string buf = fmt::format("node_id,timestep,family,{}\n", param_header(fc.family));
    for (const auto &p : fc.points) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},", fc.node_ids[p.node], p.timestep,
                       family_name(p.dist.family()));
        append_params(buf, p.dist);
        buf += '\n';
    }
    return buf;
}

json forecast_sidecar(const ForecastSet &fc, std::uint64_t seed) {
    return json{{"model_id", fc.model_id},
                {"split_tag", std::string(split_tag_name(fc.split_tag))},
                {"seed", seed},
                {"family", std::string(family_name(fc.family))},
                {"n_points", fc.size()}};
}

ForecastSet parse_forecast(std::istream &csv, const json &sidecar, const std::vector<std::string> &node_ids) {
    ForecastSet fc;
    fc.model_id = sidecar.at("model_id").get<std::string>();
    fc.split_tag = parse_split_tag(sidecar.at("split_tag").get<std::string>());
    fc.family = parse_family(sidecar.at("family").get<std::string>());
    fc.node_ids = node_ids;
    const auto index = index_nodes(node_ids);

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(csv, line)) {
        throw ParseError(1, "missing header");
    }
    ++line_no;
    const auto header = fields_of(line);
    if (header.size() < 4 || header[0] != "node_id" || header[1] != "timestep" || header[2] != "family") {
        throw ParseError(1, "forecast header must start with node_id,timestep,family");
    }
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = fields_of(line);
        const auto family = parse_family(f.size() > 2 ? f[2] : std::string_view{});
        if (family != fc.family) {
            throw ParseError(line_no, "forecast family differs from the sidecar");
        }
        PointForecast p;
        p.node = lookup_node(index, f[0], line_no);
        p.timestep = parse_size(f[1], line_no);
        p.dist = make_dist(family, f, 3, line_no);
        fc.points.push_back(p);
    }
    fc.validate();
    return fc;
}

json to_json(const CalibratorModel &model) {
    const auto fit_json = [](const QuantileFit &f) {
        return json{{"intercept", f.intercept}, {"slope", f.slope}};
    };
    json j;
    j["kind"] = std::string(calibrator_name(model.kind));
    j["n_bins"] = model.options.n_bins;
    if (model.options.zero_threshold == kSplitDisabled) {
        j["zero_threshold"] = nullptr;
    } else {
        j["zero_threshold"] = model.options.zero_threshold;
    }
    j["mu_star"] = std::string(mu_star_mode_name(model.options.mu_star));
    j["bin_on"] = std::string(bin_on_name(model.options.bin_on));
    j["lo_p"] = model.options.lo_p;
    j["hi_p"] = model.options.hi_p;
    j["family"] = std::string(family_name(model.family));
    j["n_calib"] = model.n_calib;
    j["thresholds"] = model.thresholds;
    json cells = json::array();
    for (const auto &c : model.cells) {
        json cj{{"bin", c.bin},
                {"segment", std::string(segment_name(c.segment))},
                {"n_points", c.n_points},
                {"fallback", c.fallback}};
        if (!c.fallback) {
            cj["p05"] = fit_json(c.lower);
            cj["p95"] = fit_json(c.upper);
        }
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    j["fallback_cells"] = model.fallback_cells();
    switch (model.kind) {
    case CalibratorKind::Platt:
        j["a"] = model.platt_a;
        j["b"] = model.platt_b;
        break;
    case CalibratorKind::TemperatureScaling:
        j["temperature"] = model.temperature;
        break;
    case CalibratorKind::Isotonic: {
        json knots = json::array();
        for (const auto &k : model.knots) {
            knots.push_back(json::array({k.x, k.g}));
        }
        j["knots"] = std::move(knots);
        break;
    }
    case CalibratorKind::HistogramBinning:
        j["bin_corrections"] = model.bin_corrections;
        break;
    default:
        break;
    }
    return j;
}

CalibratorModel calibrator_from_json(const json &j) {
    CalibratorModel model;
    model.kind = parse_calibrator(j.at("kind").get<std::string>());
    model.options.n_bins = j.at("n_bins").get<std::size_t>();
    model.options.zero_threshold =
        j.at("zero_threshold").is_null() ? kSplitDisabled : j.at("zero_threshold").get<double>();
    model.options.mu_star = parse_mu_star_mode(j.value("mu_star", std::string("midpoint")));
    model.options.bin_on = parse_bin_on(j.value("bin_on", std::string("mu_hat")));
    model.options.lo_p = j.value("lo_p", 0.05);
    model.options.hi_p = j.value("hi_p", 0.95);
    model.options.validate();
    model.family = parse_family(j.value("family", std::string("NB")));
    model.n_calib = j.value("n_calib", std::size_t{0});
    model.thresholds = j.at("thresholds").get<std::vector<double>>();
    for (const auto &cj : j.at("cells")) {
        SaucCell c;
        c.bin = cj.at("bin").get<std::size_t>();
        c.segment = cj.at("segment").get<std::string>() == "zero" ? Segment::Zero : Segment::NonZero;
        c.n_points = cj.at("n_points").get<std::size_t>();
        c.fallback = cj.at("fallback").get<bool>();
        c.lower.p = model.options.lo_p;
        c.upper.p = model.options.hi_p;
        c.lower.n_points = c.upper.n_points = c.n_points;
        if (!c.fallback) {
            c.lower.intercept = cj.at("p05").at("intercept").get<double>();
            c.lower.slope = cj.at("p05").at("slope").get<double>();
            c.upper.intercept = cj.at("p95").at("intercept").get<double>();
            c.upper.slope = cj.at("p95").at("slope").get<double>();
        }
        model.cells.push_back(c);
    }
    model.platt_a = j.value("a", 1.0);
    model.platt_b = j.value("b", 0.0);
    model.temperature = j.value("temperature", 1.0);
    if (j.contains("knots")) {
        for (const auto &k : j.at("knots")) {
            model.knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
        }
    }
    if (j.contains("bin_corrections")) {
        model.bin_corrections = j.at("bin_corrections").get<std::vector<double>>();
    }
    model.fitted = true;
    return model;
}

std::string intervals_csv(const CalibratedIntervals &iv) {
    std::string buf = "node_id,timestep,mu_star,lower,upper\n";
    for (const auto &p : iv.points) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}\n", iv.node_ids[p.node], p.timestep,
                       format_number(p.mu_star), format_number(p.lower), format_number(p.upper));
    }
    return buf;
}

CalibratedIntervals parse_intervals(std::istream &in, const std::vector<std::string> &node_ids) {
    CalibratedIntervals iv;
    iv.node_ids = node_ids;
    const auto index = index_nodes(node_ids);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing header");
    }
    ++line_no;
    if (fields_of(line) != std::vector<std::string_view>{"node_id", "timestep", "mu_star", "lower", "upper"}) {
        throw ParseError(1, "interval header must be node_id,timestep,mu_star,lower,upper");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = fields_of(line);
        if (f.size() != 5) {
            throw ParseError(line_no, fmt::format("expected 5 fields, found {}", f.size()));
        }
        CalibratedPoint p;
        p.node = lookup_node(index, f[0], line_no);
        p.timestep = parse_size(f[1], line_no);
        p.mu_star = parse_double(f[2], line_no);
        p.lower = parse_double(f[3], line_no);
        p.upper = parse_double(f[4], line_no);
        if (p.lower > p.upper) {
            throw ParseError(line_no, "lower bound exceeds upper bound");
        }
        iv.points.push_back(p);
    }
    return iv;
}

json to_json(const MetricsReport &report) {
    json bins = json::array();
    for (const auto &b : report.bins) {
        bins.push_back(json{{"bin", b.bin},
                            {"n", b.n_points},
                            {"rmse", b.rmse},
                            {"mpiw", b.mpiw},
                            {"width_min", b.width_min},
                            {"width_max", b.width_max}});
    }
    json j{{"ence", report.ence},
           {"c", report.c},
           {"coverage", report.coverage},
           {"c_star", report.c_star},
           {"n_bins", report.n_bins},
           {"n_points", report.n_points},
           {"excluded_bins", report.excluded_bins},
           {"filter", std::string(filter_name(report.filter))},
           {"bins", std::move(bins)}};
    if (report.slope) {
        j["slope"] = *report.slope;
    } else {
        j["slope"] = nullptr;
    }
    return j;
}

std::string reliability_csv(const std::vector<ReliabilityPoint> &curve) {
    std::string buf = "bin,c_mpiw,rmse,n\n";
    for (const auto &p : curve) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", p.bin, format_number(p.c_mpiw),
                       format_number(p.rmse), p.n_points);
    }
    return buf;
}

std::string node_risk_csv(const std::vector<NodeRisk> &risk) {
    std::string buf = "node_id,mean_risk,n\n";
    for (const auto &r : risk) {
        fmt::format_to(std::back_inserter(buf), "{},{},{}\n", r.node_id, format_number(r.mean_risk), r.n_points);
    }
    return buf;
}

std::string cdf_curve_csv(const std::vector<CdfCurvePoint> &curve) {
    std::string buf = "p,observed\n";
    for (const auto &c : curve) {
        fmt::format_to(std::back_inserter(buf), "{},{}\n", format_number(c.p), format_number(c.observed));
    }
    return buf;
}

SyntheticSpec synthetic_spec_from_json(const json &j) {
    const auto numbers = [](const json &v) {
        if (v.is_array()) {
            return v.get<std::vector<double>>();
        }
        return std::vector<double>{v.get<double>()};
    };
    SyntheticSpec spec;
    try {
        spec.nodes = j.at("nodes").get<std::size_t>();
        spec.steps = j.at("steps").get<std::size_t>();
        spec.mu = numbers(j.at("mu"));
        spec.alpha = numbers(j.at("alpha"));
        spec.zero_inflation = j.value("zero_inflation", 0.0);
        spec.seasonal_amplitude = j.value("seasonal_amplitude", 0.0);
        spec.seasonal_period = j.value("seasonal_period", std::size_t{24});
        spec.mu_spread = j.value("mu_spread", 0.0);
    } catch (const json::exception &e) {
        throw DomainError(std::string("invalid synthetic spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

json to_json(const SyntheticSpec &spec) {
    const auto numbers = [](const std::vector<double> &v) { return v.size() == 1 ? json(v.front()) : json(v); };
    return json{{"nodes", spec.nodes},
                {"steps", spec.steps},
                {"mu", numbers(spec.mu)},
                {"alpha", numbers(spec.alpha)},
                {"zero_inflation", spec.zero_inflation},
                {"seasonal_amplitude", spec.seasonal_amplitude},
                {"seasonal_period", spec.seasonal_period},
                {"mu_spread", spec.mu_spread}};
}

} // namespace sauc::io
