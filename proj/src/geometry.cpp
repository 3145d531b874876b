#include "flatmin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "flatmin/dynamics.hpp"
#include "flatmin/error.hpp"

namespace flatmin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const LevelSetModel& require_level_set(const ProblemSpec& p) {
    if (!p.level_set) throw Error(ErrorKind::unsupported_check, p.name + " has no parametrized solution set");
    return *p.level_set;
}

Vector clamp_to_ball(Vector z, std::span<const double> center, double r) {
    const Vector d = subtract(z, center);
    const double nd = norm(d);
    if (nd <= r) return z;
    return axpy(center, r / nd, d);
}

struct Fit {
    double slope = kNaN;
    double intercept = kNaN;
    double r_squared = kNaN;
};

Fit linear_fit(std::span<const double> xs, std::span<const double> ys) {
    Fit fit;
    const std::size_t n = xs.size();
    if (n < 2) return fit;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace

double oscillation(const ProblemSpec& p, std::span<const double> x, double r, std::size_t samples) {
    if (!(r >= 0.0)) throw Error(ErrorKind::invalid_parameter, "oscillation radius must be nonnegative");
    if (x.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");
    if (r == 0.0) return 0.0;
    const double f0 = p.objective(x);
    auto gap = [&](std::span<const double> y) {
        const double v = std::abs(p.objective(y) - f0);
        return std::isnan(v) ? kInf : v;
    };

    const std::vector<Vector> unit = halton_ball(samples, p.dim);
    std::vector<std::pair<double, Vector>> scored;
    scored.reserve(unit.size());
    for (const Vector& h : unit) {
        Vector y = axpy(x, r, h);
        const double v = gap(y);
        scored.emplace_back(v, std::move(y));
    }
    const std::size_t top = std::min<std::size_t>(5, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });

    double best = top > 0 ? scored.front().first : 0.0;
    for (std::size_t c = 0; c < top; ++c) {
        auto [value, y] = scored[c];
        double step = 0.25 * r;
        for (int it = 0; it < 100 && std::isfinite(value); ++it) {
            bool improved = false;
            for (std::size_t i = 0; i < p.dim; ++i) {
                for (double s : {1.0, -1.0}) {
                    Vector z = y;
                    z[i] += s * step;
                    z = clamp_to_ball(std::move(z), x, r);
                    const double v = gap(z);
                    if (v > value) {
                        value = v;
                        y = std::move(z);
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        best = std::max(best, value);
    }
    return best;
}

std::vector<double> oscillation_profile(const ProblemSpec& p, std::span<const double> x, std::span<const double> radii,
                                        std::size_t samples) {
    std::vector<std::size_t> order(radii.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
    std::vector<double> out(radii.size(), 0.0);
    double running = 0.0;
    for (std::size_t i : order) {
        running = std::max(running, oscillation(p, x, radii[i], samples));
        out[i] = running;
    }
    return out;
}

bool flatter_or_equal(std::span<const double> osc_x, std::span<const double> osc_y) {
    if (osc_x.size() != osc_y.size()) throw Error(ErrorKind::invalid_parameter, "oscillation grids differ");
    for (std::size_t i = 0; i < osc_x.size(); ++i)
        if (!(osc_x[i] <= osc_y[i] * (1.0 + 1e-6) + 1e-12)) return false;
    return true;
}

FlatnessReport sharpness_profile(const ProblemSpec& p, std::size_t branch, std::span<const double> params,
                                 std::span<const double> radii, std::size_t oscillation_samples) {
    const LevelSetModel& ls = require_level_set(p);
    if (branch >= ls.branches().size()) throw Error(ErrorKind::invalid_parameter, "no such solution-set branch");
    if (!p.smooth() && !p.lipschitz_modulus)
        throw Error(ErrorKind::unsupported_check, p.name + " is nonsmooth without a Lipschitz modulus");

    FlatnessReport r;
    r.problem = p.name;
    r.measure = p.smooth() ? "lambda1" : "lip";
    r.radii.assign(radii.begin(), radii.end());
    for (double t : params) {
        FlatnessPoint pt;
        pt.branch = branch;
        pt.t = t;
        pt.point = ls.point(branch, t);
        pt.g = p.regularizer && p.regularizer->in_domain(pt.point) ? p.regularizer->value(pt.point)
               : p.regularizer                                     ? kInf
                                                                   : kNaN;
        try {
            pt.sharpness = p.smooth() ? top_eigenvalue(finite_diff_hessian(p.objective, pt.point))
                                      : p.lipschitz_modulus(pt.point);
            if (!radii.empty()) pt.oscillation = oscillation_profile(p, pt.point, radii, oscillation_samples);
        } catch (const Error& e) {
            pt.ok = false;
            pt.sharpness = kNaN;
            pt.error = e.what();
        }
        r.points.push_back(std::move(pt));
    }

    for (std::size_t i = 0; i < r.points.size(); ++i)
        if (r.points[i].ok && (!r.argmin || r.points[i].sharpness < r.points[*r.argmin].sharpness)) r.argmin = i;
    if (r.argmin && !p.flat_minima.empty()) {
        double best = kInf;
        for (std::size_t k = 0; k < p.flat_minima.size(); ++k) {
            const double d = distance(r.points[*r.argmin].point, p.flat_minima[k]);
            if (d < best) {
                best = d;
                r.nearest_flat_minimum = k;
            }
        }
        r.argmin_flat_distance = best;
    }

    if (!radii.empty() && r.points.size() <= 200) {
        const std::size_t n = r.points.size();
        r.preorder.assign(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                r.preorder[i][j] = r.points[i].ok && r.points[j].ok &&
                                   flatter_or_equal(r.points[i].oscillation, r.points[j].oscillation);
    }
    return r;
}

std::string flatness_csv(const FlatnessReport& report) {
    std::ostringstream out;
    const std::size_t dim = report.points.empty() ? 0 : report.points.front().point.size();
    out << "branch,t";
    for (std::size_t i = 1; i <= dim; ++i) out << ",x" << i;
    out << ',' << report.measure << ",g";
    for (double r : report.radii) out << ",osc_" << format_number(r);
    out << '\n';
    for (const FlatnessPoint& pt : report.points) {
        out << pt.branch << ',' << format_number(pt.t);
        for (double v : pt.point) out << ',' << format_number(v);
        out << ',' << format_number(pt.sharpness) << ',' << format_number(pt.g);
        for (std::size_t i = 0; i < report.radii.size(); ++i)
            out << ',' << format_number(i < pt.oscillation.size() ? pt.oscillation[i] : kNaN);
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------

ProjectionBoundReport projection_distance_bound_check(const ProblemSpec& p, std::span<const double> xbar,
                                                      std::span<const double> alpha_grid, std::size_t samples,
                                                      std::uint64_t seed, double radius) {
    const LevelSetModel& ls = require_level_set(p);
    if (xbar.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");
    if (alpha_grid.empty() || samples == 0) throw Error(ErrorKind::invalid_parameter, "empty sample or step grid");

    ProjectionBoundReport r;
    r.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
    r.worst_slack = kInf;
    const SelectionOptions sel{1e-9, 1e-12, true};
    Rng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        const Vector x = rng.in_ball(xbar, radius);
        std::vector<Vector> dirs;
        try {
            dirs = normalized_generators(p, x, sel);
        } catch (const Error&) {
            continue;
        }
        if (dirs.empty()) continue;
        const double dx = ls.distance_to(x);
        if (!std::isfinite(dx)) throw Error(ErrorKind::numeric_failure, p.name + ": distance oracle failed");
        ++r.samples;
        for (double alpha : alpha_grid)
            for (const Vector& u : dirs) {
                const double slack = ls.distance_to(axpy(x, -alpha, u)) + dx - 0.5 * alpha;
                if (slack < r.worst_slack) {
                    r.worst_slack = slack;
                    r.worst_point = x;
                    r.worst_alpha = alpha;
                }
            }
    }
    r.pass = r.samples > 0 && r.worst_slack >= -1e-9;
    return r;
}

SubregularityReport subregularity_estimate(const ProblemSpec& p, std::span<const double> xbar, std::size_t samples,
                                           std::uint64_t seed) {
    const LevelSetModel& ls = require_level_set(p);
    if (xbar.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");

    Rng rng(seed);
    std::vector<double> log_s, log_d;
    for (std::size_t s = 0; s < samples; ++s) {
        const double rho = std::pow(10.0, -rng.uniform(1.0, 4.0));
        const Vector y = axpy(xbar, rho, rng.unit_vector(p.dim));
        double min_norm = 0.0;
        if (p.kink_membership && p.kink_membership(y, 1e-12))
            min_norm = hull_distance(p.subgradient_generators(y, 1e-12));
        else
            min_norm = norm(p.gradient(y));
        const double d = ls.distance_to(y);
        if (!(d > 0.0) || !(min_norm > 0.0) || !std::isfinite(d) || !std::isfinite(min_norm)) continue;
        log_s.push_back(std::log(min_norm));
        log_d.push_back(std::log(d));
    }
    const Fit fit = linear_fit(log_s, log_d);
    if (!std::isfinite(fit.slope))
        throw Error(ErrorKind::insufficient_sampling, p.name + ": degenerate subregularity regression");
    // Sharp minima keep the subgradient norm bounded away from zero, so no power law is visible.
    if (fit.r_squared < 0.5)
        throw Error(ErrorKind::insufficient_sampling,
                    p.name + ": no power law between distance and subgradient norm (r^2 = " +
                        format_number(fit.r_squared) + ")");
    return {fit.slope, std::exp(fit.intercept), log_s.size(), fit.r_squared};
}

double normalized_projection_ratio(const ProblemSpec& p, std::span<const double> y) {
    const LevelSetModel& ls = require_level_set(p);
    const LevelSetProjection proj = ls.project(y);
    if (!(proj.distance > 0.0)) return 0.0;
    const std::vector<Vector> basis = ls.tangent_basis(proj.branch, proj.t);
    double worst = 0.0;
    for (const Vector& u : normalized_generators(p, y, SelectionOptions{1e-9, 1e-12, true})) {
        double sq = 0.0;
        for (const Vector& e : basis) sq += dot(e, u) * dot(e, u);
        worst = std::max(worst, std::sqrt(sq));
    }
    return worst / proj.distance;
}

NormalizedProjectionReport normalized_projection_formula_check(const ProblemSpec& p, std::span<const double> xbar,
                                                               std::size_t samples, std::uint64_t seed) {
    require_level_set(p);
    if (xbar.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");
    NormalizedProjectionReport r;
    std::vector<double> log_scale, log_ratio;
    for (int level = 1; level <= 4; ++level) {
        const double scale = std::pow(10.0, -level);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(level)));
        double worst = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            try {
                worst = std::max(worst, normalized_projection_ratio(p, rng.in_ball(xbar, scale)));
            } catch (const Error&) {
            }
        }
        r.scales.push_back(scale);
        r.max_ratio.push_back(worst);
        r.worst_ratio = std::max(r.worst_ratio, worst);
        if (worst > 0.0) {
            log_scale.push_back(std::log(scale));
            log_ratio.push_back(std::log(worst));
        }
    }
    const Fit fit = linear_fit(log_scale, log_ratio);
    r.slope = std::isfinite(fit.slope) ? fit.slope : 0.0;
    r.bounded = std::isfinite(r.worst_ratio) && r.slope >= -0.5;
    return r;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

nlohmann::json numbers(std::span<const double> v) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : v) out.push_back(number(x));
    return out;
}

}  // namespace

nlohmann::json to_json(const FlatnessReport& report) {
    nlohmann::json pts = nlohmann::json::array();
    for (const FlatnessPoint& pt : report.points) {
        nlohmann::json j{{"branch", pt.branch},
                         {"t", pt.t},
                         {"point", numbers(pt.point)},
                         {report.measure, number(pt.sharpness)},
                         {"g", number(pt.g)},
                         {"oscillation", numbers(pt.oscillation)},
                         {"ok", pt.ok}};
        if (!pt.ok) j["error"] = pt.error;
        pts.push_back(std::move(j));
    }
    nlohmann::json out{{"check", "flatness"},
                       {"problem", report.problem},
                       {"measure", report.measure},
                       {"radii", numbers(report.radii)},
                       {"points", pts}};
    if (report.argmin) {
        out["argmin"] = *report.argmin;
        out["argmin_point"] = numbers(report.points[*report.argmin].point);
        out["argmin_flat_distance"] = number(report.argmin_flat_distance);
    }
    return out;
}

nlohmann::json to_json(const ProjectionBoundReport& r) {
    return {{"check", "projection_distance_bound"},
            {"samples", r.samples},
            {"alpha_grid", numbers(r.alpha_grid)},
            {"worst_slack", number(r.worst_slack)},
            {"worst_point", numbers(r.worst_point)},
            {"worst_alpha", r.worst_alpha},
            {"pass", r.pass}};
}

nlohmann::json to_json(const SubregularityReport& r) {
    return {{"check", "subregularity"},
            {"tau", number(r.tau)},
            {"constant", number(r.constant)},
            {"samples", r.samples},
            {"r_squared", number(r.r_squared)}};
}

nlohmann::json to_json(const NormalizedProjectionReport& r) {
    return {{"check", "normalized_projection"},
            {"scales", numbers(r.scales)},
            {"max_ratio", numbers(r.max_ratio)},
            {"worst_ratio", number(r.worst_ratio)},
            {"slope", number(r.slope)},
            {"bounded", r.bounded}};
}

}  // namespace flatmin
