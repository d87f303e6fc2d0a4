#include "sauc/qr.hpp"

#include "sauc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sauc {

namespace {

struct Line {
    double a = 0.0;
    double b = 0.0;
};

double total_loss(std::span<const double> x, std::span<const double> y, const Line &line, double p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += pinball(y[i], line.a + line.b * x[i], p);
    }
    return sum;
}

struct Breakpoint {
    double s;
    double w; // weight
    double q; // quantile level of this term
};

// Minimizer set [lo, hi] of h(t) = sum_i w_i * rho_{q_i}(s_i - t).
// h is convex piecewise linear; the right derivative just past s_j is
// -sum(w q) + sum_{i <= j} w_i.
std::pair<double, double> check_minimizer(std::vector<Breakpoint> &pts) {
    std::sort(pts.begin(), pts.end(), [](const Breakpoint &l, const Breakpoint &r) { return l.s < r.s; });
    double start = 0.0;
    double total_w = 0.0;
    for (const auto &bp : pts) {
        start -= bp.w * bp.q;
        total_w += bp.w;
    }
    const double tol = 1e-12 * total_w;
    double deriv = start;
    std::size_t i = 0;
    while (i < pts.size()) {
        std::size_t j = i;
        const double s = pts[i].s;
        while (j < pts.size() && pts[j].s == s) {
            deriv += pts[j].w;
            ++j;
        }
        if (deriv > tol) {
            return {s, s};
        }
        if (deriv >= -tol) {
            // Flat to the next breakpoint.
            const double next = j < pts.size() ? pts[j].s : s;
            return {s, next};
        }
        i = j;
    }
    return {pts.back().s, pts.back().s};
}

double closest_to_zero(std::pair<double, double> range) {
    if (range.first <= 0.0 && 0.0 <= range.second) {
        return 0.0;
    }
    return std::abs(range.first) <= std::abs(range.second) ? range.first : range.second;
}

// Optimal intercept interval for a fixed slope.
std::pair<double, double> intercept_range(std::span<const double> x, std::span<const double> y, double slope,
                                          double p) {
    std::vector<Breakpoint> pts(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        pts[i] = {y[i] - slope * x[i], 1.0, p};
    }
    return check_minimizer(pts);
}

// Optimal slope interval for lines pinned through (xk, yk).
// rho_p(d - b c) = c rho_p(d/c - b) for c > 0 and |c| rho_{1-p}(d/c - b) for c < 0.
std::pair<double, double> pivot_slope_range(std::span<const double> x, std::span<const double> y, double xk,
                                            double yk, double p, bool &any) {
    std::vector<Breakpoint> pts;
    pts.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = x[i] - xk;
        if (c == 0.0) {
            continue;
        }
        pts.push_back({(y[i] - yk) / c, std::abs(c), c > 0.0 ? p : 1.0 - p});
    }
    any = !pts.empty();
    if (!any) {
        return {0.0, 0.0};
    }
    return check_minimizer(pts);
}

enum class EdgeKind { None, ShiftUp, ShiftDown, Rotate };

struct Edge {
    EdgeKind kind = EdgeKind::None;
    double pivot_x = 0.0;
    double pivot_y = 0.0;
    int direction = 0; // rotation: +1 raises slope, -1 lowers it
    double derivative = 0.0;
};

struct VertexState {
    std::vector<std::size_t> on_line; // sorted by x
    double psi_sum = 0.0;             // sum over off-line points of psi
    double psi_x_sum = 0.0;           // sum over off-line points of psi * x
};

VertexState analyse(std::span<const double> x, std::span<const double> y, const Line &line, double p, double tol) {
    VertexState st;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - line.a - line.b * x[i];
        if (std::abs(r) <= tol) {
            st.on_line.push_back(i);
            continue;
        }
        const double psi = r > 0.0 ? p : p - 1.0;
        st.psi_sum += psi;
        st.psi_x_sum += psi * x[i];
    }
    std::sort(st.on_line.begin(), st.on_line.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
    return st;
}

// Every edge leaving the vertex with its directional derivative; returns
// the steepest one, or kind None when no edge descends.
Edge steepest_edge(std::span<const double> x, std::span<const double> y, const VertexState &st, double p,
                   double deriv_tol, bool want_flat_toward_zero, double slope) {
    Edge best;
    const auto m = static_cast<double>(st.on_line.size());

    auto consider = [&](Edge e) {
        if (want_flat_toward_zero) {
            return;
        }
        if (e.derivative < -deriv_tol && (best.kind == EdgeKind::None || e.derivative < best.derivative)) {
            best = e;
        }
    };

    consider({EdgeKind::ShiftUp, 0.0, 0.0, 0, -st.psi_sum + m * (1.0 - p)});
    consider({EdgeKind::ShiftDown, 0.0, 0.0, 0, st.psi_sum + m * p});

    // Prefix sums over on-line points sorted by x.
    const std::size_t cnt = st.on_line.size();
    std::vector<double> prefix(cnt + 1, 0.0);
    for (std::size_t i = 0; i < cnt; ++i) {
        prefix[i + 1] = prefix[i] + x[st.on_line[i]];
    }
    std::size_t i = 0;
    while (i < cnt) {
        const double xk = x[st.on_line[i]];
        std::size_t j = i;
        while (j < cnt && x[st.on_line[j]] == xk) {
            ++j;
        }
        const double n_left = static_cast<double>(i);
        const double n_right = static_cast<double>(cnt - j);
        const double right_excess = (prefix[cnt] - prefix[j]) - n_right * xk; // sum (x_l - xk)^+
        const double left_excess = n_left * xk - prefix[i];                   // sum (xk - x_l)^+
        const double off = -st.psi_x_sum + xk * st.psi_sum;
        const double d_plus = off + (1.0 - p) * right_excess + p * left_excess;
        const double d_minus = -off + (1.0 - p) * left_excess + p * right_excess;
        const double yk = y[st.on_line[i]];
        consider({EdgeKind::Rotate, xk, yk, +1, d_plus});
        consider({EdgeKind::Rotate, xk, yk, -1, d_minus});
        if (want_flat_toward_zero && slope != 0.0) {
            const int toward = slope > 0.0 ? -1 : +1;
            const double d = toward > 0 ? d_plus : d_minus;
            if (std::abs(d) <= deriv_tol) {
                // First flat edge toward zero slope wins; the caller line-searches it.
                if (best.kind == EdgeKind::None) {
                    best = {EdgeKind::Rotate, xk, yk, toward, d};
                }
            }
        }
        i = j;
    }
    return best;
}

QuantileFit finish(double p, std::size_t n, Line line, std::span<const double> x, std::span<const double> y) {
    const auto range = intercept_range(x, y, line.b, p);
    const double a = closest_to_zero(range);
    // Keep the vertex intercept unless the alternative is strictly nearer zero.
    if (std::abs(a) < std::abs(line.a)) {
        line.a = a;
    }
    QuantileFit fit;
    fit.p = p;
    fit.intercept = line.a;
    fit.slope = line.b;
    fit.n_points = n;
    return fit;
}

} // namespace

double pinball(double y, double yhat, double p) noexcept {
    const double r = y - yhat;
    return r < 0.0 ? (p - 1.0) * r : p * r;
}

double mean_pinball(std::span<const double> x, std::span<const double> y, const QuantileFit &fit) {
    if (x.empty()) {
        return 0.0;
    }
    return total_loss(x, y, {fit.intercept, fit.slope}, fit.p) / static_cast<double>(x.size());
}

QuantileFit fit_quantile(std::span<const double> x, std::span<const double> y, double p) {
    if (x.size() != y.size()) {
        throw DomainError("quantile regression needs equally sized x and y");
    }
    if (x.empty()) {
        throw DomainError("quantile regression needs at least one point");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("quantile level must lie in (0, 1)");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw DomainError("quantile regression inputs must be finite");
        }
    }
    const std::size_t n = x.size();
    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    if (*xmin_it == *xmax_it) {
        return finish(p, n, {closest_to_zero(intercept_range(x, y, 0.0, p)), 0.0}, x, y);
    }

    double scale_x = 1.0;
    double scale_y = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        scale_x = std::max(scale_x, std::abs(x[i]));
        scale_y = std::max(scale_y, std::abs(y[i]));
    }

    // Start on the best horizontal line; it passes through a data point.
    Line line{intercept_range(x, y, 0.0, p).first, 0.0};
    double loss = total_loss(x, y, line, p);

    auto line_tol = [&](const Line &l) { return 1e-10 * (scale_y + std::abs(l.b) * scale_x + std::abs(l.a)); };
    const double deriv_tol = 1e-10 * static_cast<double>(n) * scale_x;
    const double loss_tol = 1e-13 * (loss + 1.0);

    const std::size_t max_steps = 8 * n + 64;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const VertexState st = analyse(x, y, line, p, line_tol(line));
        const Edge edge = steepest_edge(x, y, st, p, deriv_tol, false, line.b);
        if (edge.kind == EdgeKind::None) {
            break;
        }
        Line next = line;
        if (edge.kind == EdgeKind::Rotate) {
            bool any = false;
            const auto range = pivot_slope_range(x, y, edge.pivot_x, edge.pivot_y, p, any);
            if (!any) {
                break;
            }
            next.b = edge.direction > 0 ? range.first : range.second;
            if ((edge.direction > 0 && next.b <= line.b) || (edge.direction < 0 && next.b >= line.b)) {
                next.b = edge.direction > 0 ? range.second : range.first;
            }
            next.a = edge.pivot_y - next.b * edge.pivot_x;
        } else {
            const auto range = intercept_range(x, y, line.b, p);
            next.a = edge.kind == EdgeKind::ShiftUp ? range.second : range.first;
        }
        const double next_loss = total_loss(x, y, next, p);
        if (!(next_loss < loss - loss_tol)) {
            break;
        }
        line = next;
        loss = next_loss;
    }

    // Tie-break: among optimal lines walk flat rotation edges toward slope 0.
    for (std::size_t step = 0; step < max_steps && line.b != 0.0; ++step) {
        const VertexState st = analyse(x, y, line, p, line_tol(line));
        const Edge edge = steepest_edge(x, y, st, p, deriv_tol, true, line.b);
        if (edge.kind == EdgeKind::None) {
            break;
        }
        bool any = false;
        const auto range = pivot_slope_range(x, y, edge.pivot_x, edge.pivot_y, p, any);
        if (!any) {
            break;
        }
        Line next = line;
        next.b = closest_to_zero(range);
        if (!(std::abs(next.b) < std::abs(line.b))) {
            break;
        }
        next.a = edge.pivot_y - next.b * edge.pivot_x;
        const double next_loss = total_loss(x, y, next, p);
        if (next_loss > loss + loss_tol) {
            break;
        }
        line = next;
    }
    return finish(p, n, line, x, y);
}

} // namespace sauc
