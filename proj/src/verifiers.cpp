#include "flatmin/verifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "flatmin/error.hpp"

namespace flatmin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const RegularizerSpec& require_regularizer(const ProblemSpec& p) {
    if (!p.regularizer) throw Error(ErrorKind::unsupported_check, p.name + " declares no implicit regularizer");
    return *p.regularizer;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double slope(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    if (n < 2) return kNaN;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : kNaN;
}

// g after q steps of length alpha, maximized over every generator choice.
double worst_regularizer_after(const ProblemSpec& p, const RegularizerSpec& reg, const Vector& x, double alpha,
                               std::size_t q, const SelectionOptions& sel) {
    if (q == 0) return reg.value(x);
    std::vector<Vector> dirs;
    try {
        dirs = normalized_generators(p, x, sel);
    } catch (const Error&) {
        return kInf;
    }
    if (dirs.empty()) return worst_regularizer_after(p, reg, x, alpha, 0, sel);
    double worst = -kInf;
    for (const Vector& u : dirs) {
        const double v = worst_regularizer_after(p, reg, axpy(x, -alpha, u), alpha, q - 1, sel);
        worst = std::isnan(v) ? kInf : std::max(worst, v);
    }
    return worst;
}

DLyapunovReport decrease_check(const ProblemSpec& p, std::span<const double> center, double radius,
                               std::span<const double> alpha_grid, std::size_t samples, std::size_t q,
                               std::uint64_t seed, const DLyapunovOptions& options) {
    const RegularizerSpec& reg = require_regularizer(p);
    if (center.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "center dimension mismatch");
    if (!(radius > 0.0)) throw Error(ErrorKind::invalid_parameter, "sampling radius must be positive");
    if (samples == 0 || q == 0) throw Error(ErrorKind::invalid_parameter, "need at least one sample and one step");
    if (alpha_grid.empty()) throw Error(ErrorKind::invalid_parameter, "empty step-size grid");
    for (double a : alpha_grid)
        if (!(a > 0.0)) throw Error(ErrorKind::invalid_parameter, "step sizes must be positive");

    DLyapunovReport r;
    r.problem = p.name;
    r.center.assign(center.begin(), center.end());
    r.radius = radius;
    r.steps = q;
    r.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
    r.claimed_p = options.claimed_p.value_or(reg.claimed_p);

    Rng rng(seed);
    std::vector<Vector> points;
    std::vector<double> g0;
    double g_scale = 1.0;
    for (std::size_t s = 0; s < samples; ++s) {
        Vector x = rng.in_ball(center, radius);
        const double g = reg.in_domain(x) ? reg.value(x) : kInf;
        if (!std::isfinite(g) || !std::isfinite(p.objective(x))) {
            ++r.skipped_samples;
            continue;
        }
        g_scale = std::max(g_scale, std::abs(g));
        points.push_back(std::move(x));
        g0.push_back(g);
    }
    if (2 * r.skipped_samples > samples)
        throw Error(ErrorKind::insufficient_domain, p.name + ": regularizer infinite on " +
                                                        std::to_string(r.skipped_samples) + " of " +
                                                        std::to_string(samples) + " samples");
    r.samples_per_alpha = points.size();

    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * g_scale;
    std::vector<double> log_a, log_d, ratios;
    for (double alpha : r.alpha_grid) {
        double worst = -kInf;
        for (std::size_t i = 0; i < points.size(); ++i)
            worst = std::max(worst, worst_regularizer_after(p, reg, points[i], alpha, q, options.selection) - g0[i]);
        const double ratio = worst / std::pow(alpha, r.claimed_p);
        const bool resolved = std::abs(worst) > floor;
        r.worst_decrease.push_back(worst);
        r.worst_ratio.push_back(ratio);
        r.resolved.push_back(resolved);
        if (!resolved) continue;
        ratios.push_back(-ratio);
        if (worst < 0.0) {
            log_a.push_back(std::log(alpha));
            log_d.push_back(std::log(-worst));
        }
    }
    r.fitted_p = slope(log_a, log_d);
    r.fitted_omega = median(ratios);

    std::vector<std::size_t> order(r.alpha_grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.alpha_grid[a] < r.alpha_grid[b]; });
    if (r.fitted_omega > 0.0) {
        for (std::size_t i : order) {
            if (!r.resolved[i]) continue;
            if (!(r.worst_ratio[i] <= -0.5 * r.fitted_omega)) break;
            r.alpha_bar = r.alpha_grid[i];
        }
    }
    const bool exponent_ok = std::isfinite(r.fitted_p) && std::abs(r.fitted_p - r.claimed_p) <= 0.125 * r.claimed_p;
    r.pass = r.fitted_omega > 0.0 && r.alpha_bar.has_value() && exponent_ok;

    const auto unresolved = std::count(r.resolved.begin(), r.resolved.end(), false);
    if (unresolved > 0)
        r.notes.push_back(std::to_string(unresolved) + " step sizes below the roundoff floor were excluded");
    if (!exponent_ok && std::isfinite(r.fitted_p)) r.notes.push_back("fitted exponent disagrees with the claimed p");
    if (static_cast<std::size_t>(std::max(reg.claimed_q, 1)) > q)
        r.notes.push_back("multi-step regime, see check_dlyapunov_multistep");
    return r;
}

}  // namespace

std::vector<double> default_alpha_grid() {
    std::vector<double> out;
    for (int j = 0; j <= 10; ++j) out.push_back(std::ldexp(0.1, -j));
    return out;
}

DLyapunovReport check_dlyapunov(const ProblemSpec& p, std::span<const double> center, double radius,
                                std::span<const double> alpha_grid, std::size_t samples, std::uint64_t seed,
                                const DLyapunovOptions& options) {
    return decrease_check(p, center, radius, alpha_grid, samples, 1, seed, options);
}

DLyapunovReport check_dlyapunov_multistep(const ProblemSpec& p, std::span<const double> center, double radius,
                                          std::span<const double> alpha_grid, std::size_t samples, std::size_t q,
                                          std::uint64_t seed, const DLyapunovOptions& options) {
    return decrease_check(p, center, radius, alpha_grid, samples, q, seed, options);
}

// ---------------------------------------------------------------------------

namespace {

std::optional<Vector> sample_flow_start(const ProblemSpec& p, Rng& rng) {
    const std::vector<Interval>& box = p.flow_box.empty() ? p.sampling_box : p.flow_box;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Vector x(p.dim);
        for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(box[i].lo, box[i].hi);
        if (p.admissible_init && !p.admissible_init(x, 0.05)) continue;
        if (p.kink_membership && p.kink_membership(x, 1e-6)) continue;
        return x;
    }
    return std::nullopt;
}

double relative_drift(const Vector& c, const Vector& c0) { return distance(c, c0) / std::max(norm(c0), 1.0); }

}  // namespace

ConservationReport check_conservation(const ProblemSpec& p, std::size_t trials, double horizon, double dt,
                                      std::uint64_t seed) {
    if (p.conserved.empty()) throw Error(ErrorKind::unsupported_check, p.name + " declares no conserved quantity");
    if (trials == 0) throw Error(ErrorKind::invalid_parameter, "need at least one trial");

    ConservationReport r;
    r.problem = p.name;
    r.trials = trials;
    r.horizon = horizon;
    r.dt = dt;
    for (const ConservedQuantity& c : p.conserved) r.quantities.push_back({c.label});

    const auto shared = std::make_shared<const ProblemSpec>(p);
    const StepSchedule schedule = StepSchedule::power(0.4, 4.0);
    r.ngd_steps = 1000;
    for (std::size_t k = 0; k < r.ngd_steps; ++k) r.ngd_sum_alpha_sq += schedule(k) * schedule(k);

    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, t));
        const std::optional<Vector> x0 = sample_flow_start(p, rng);
        if (!x0) {
            ++r.skipped;
            continue;
        }
        FlowResult full, half;
        try {
            full = gradient_flow(p, *x0, horizon, dt);
            half = gradient_flow(p, *x0, horizon, 0.5 * dt);
        } catch (const Error&) {
            ++r.skipped;
            continue;
        }
        if (full.status == FlowStatus::integration_failure || half.status == FlowStatus::integration_failure) {
            ++r.skipped;
            continue;
        }
        if (full.status == FlowStatus::kink || full.status == FlowStatus::piece_change ||
            half.status == FlowStatus::kink || half.status == FlowStatus::piece_change)
            ++r.truncated;
        ++r.used;

        RunConfig cfg;
        cfg.problem = shared;
        cfg.schedule = schedule;
        cfg.max_iters = r.ngd_steps;
        cfg.init = *x0;
        cfg.stop_at_target = false;
        cfg.seed = derive_seed(seed, t, 1);
        const TrajectoryRecord ngd = run_ngd(cfg);

        for (std::size_t qi = 0; qi < p.conserved.size(); ++qi) {
            const ConservedQuantity& c = p.conserved[qi];
            const Vector c0 = c.value(*x0);
            QuantityDrift& d = r.quantities[qi];
            for (const Vector& x : full.states) d.drift = std::max(d.drift, relative_drift(c.value(x), c0));
            for (const Vector& x : half.states) d.drift_half = std::max(d.drift_half, relative_drift(c.value(x), c0));
            for (const TrajectoryRow& row : ngd.rows)
                if (all_finite(row.x)) d.ngd_drift = std::max(d.ngd_drift, relative_drift(c.value(row.x), c0));
        }
    }

    // Below 1e-11 the drift is roundoff, which does not shrink with dt.
    constexpr double kRoundoffFloor = 1e-11;
    r.pass = r.used > 0;
    for (QuantityDrift& d : r.quantities) {
        d.halving_ratio = d.drift_half > 0.0 ? d.drift / d.drift_half : kInf;
        d.pass = r.used > 0 && d.drift <= r.drift_tol && (d.drift <= kRoundoffFloor || d.halving_ratio >= 8.0);
        r.pass = r.pass && d.pass;
    }
    return r;
}

// ---------------------------------------------------------------------------

RegularizerHypothesesReport check_regularizer_hypotheses(const ProblemSpec& p, std::size_t sample_count,
                                                         std::uint64_t seed) {
    const RegularizerSpec& reg = require_regularizer(p);
    if (!p.level_set) throw Error(ErrorKind::unsupported_check, p.name + " has no parametrized solution set");
    if (!reg.gradient) throw Error(ErrorKind::unsupported_check, p.name + " regularizer has no gradient");
    if (sample_count == 0) throw Error(ErrorKind::invalid_parameter, "need at least one sample");

    RegularizerHypothesesReport r;
    r.problem = p.name;
    r.descent_margin = kInf;
    r.curvature_margin = -kInf;
    const SelectionOptions sel{1e-9, 1e-12, true};
    auto usable = [&](std::span<const double> x, double& g) {
        if (!reg.in_domain(x)) return false;
        if (reg.saturated && reg.saturated(x)) return false;
        g = reg.value(x);
        return std::isfinite(g) && g > 0.0 && std::isfinite(p.objective(x));
    };

    Rng rng(derive_seed(seed, 0));
    for (std::size_t attempt = 0; attempt < 100 * sample_count && r.descent_samples < sample_count; ++attempt) {
        Vector x(p.dim);
        for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.sampling_box[i].lo, p.sampling_box[i].hi);
        double g = 0.0;
        if (!usable(x, g)) continue;
        const Vector grad_g = reg.gradient(x);
        if (!all_finite(grad_g)) continue;
        const double scale = std::max(norm(grad_g), std::numeric_limits<double>::min());
        for (const Vector& v : normalized_generators(p, x, sel)) {
            const double m = dot(grad_g, v) / scale;
            if (m < r.descent_margin) {
                r.descent_margin = m;
                r.worst_descent_point = x;
            }
        }
        ++r.descent_samples;
    }

    const auto& branches = p.level_set->branches();
    Rng lrng(derive_seed(seed, 1));
    for (std::size_t attempt = 0; attempt < 100 * sample_count && r.curvature_samples < sample_count; ++attempt) {
        const std::size_t b = lrng.index(branches.size());
        const Vector x = branches[b].point(lrng.uniform(branches[b].params.lo, branches[b].params.hi));
        const bool near_flat = std::any_of(p.flat_minima.begin(), p.flat_minima.end(),
                                           [&](const Vector& z) { return distance(x, z) < r.exclusion_radius; });
        double g = 0.0;
        if (near_flat || !usable(x, g)) continue;
        SymmetricMatrix h;
        std::vector<Vector> dirs;
        try {
            h = finite_diff_hessian(reg.value, x);
            dirs = normalized_generators(p, x, sel);
        } catch (const Error&) {
            continue;
        }
        if (dirs.empty()) continue;
        const double scale = std::max(g, h.frobenius_norm());
        for (const Vector& u : dirs) {
            const double m = h.quadratic_form(u) / scale;
            if (m > r.curvature_margin) {
                r.curvature_margin = m;
                r.worst_curvature_point = x;
            }
        }
        ++r.curvature_samples;
    }
    // an empty sample set (e.g. g vanishing on the whole solution set) is a negative result
    r.descent_holds = r.descent_samples > 0 && r.descent_margin >= -1e-8;
    r.curvature_holds = r.curvature_samples > 0 && r.curvature_margin <= -1e-6;
    r.pass = r.descent_holds && r.curvature_holds;
    return r;
}

// ---------------------------------------------------------------------------

namespace {

struct Cluster {
    Vector center;
    std::size_t count = 0;
};

constexpr double kMergeRadius = 1e-3;
constexpr std::size_t kMaxClusters = 16;

std::vector<Cluster> cluster_directions(const std::vector<Vector>& dirs) {
    std::vector<Cluster> clusters;
    for (const Vector& d : dirs) {
        auto it = std::find_if(clusters.begin(), clusters.end(),
                               [&](const Cluster& c) { return distance(c.center, d) <= kMergeRadius; });
        if (it == clusters.end()) {
            clusters.push_back({d, 1});
            continue;
        }
        const double w = 1.0 / static_cast<double>(++it->count);
        for (std::size_t i = 0; i < d.size(); ++i) it->center[i] += w * (d[i] - it->center[i]);
    }
    std::stable_sort(clusters.begin(), clusters.end(),
                     [](const Cluster& a, const Cluster& b) { return a.count > b.count; });
    if (clusters.size() > kMaxClusters) clusters.resize(kMaxClusters);
    return clusters;
}

std::vector<Vector> sampled_directions(const ProblemSpec& p, std::span<const double> x, double radius,
                                       std::size_t samples, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vector> dirs;
    for (std::size_t s = 0; s < samples; ++s) {
        const Vector y = rng.in_ball(x, radius);
        if (p.kink_membership && p.kink_membership(y, 0.0)) continue;
        if (!std::isfinite(p.objective(y))) continue;
        const Vector g = p.gradient(y);
        const double ng = norm(g);
        if (!(ng > 0.0) || !std::isfinite(ng)) continue;
        dirs.push_back(scaled(g, 1.0 / ng));
    }
    return dirs;
}

}  // namespace

StationarityReport fermat_check(const ProblemSpec& p, std::span<const double> x, std::span<const double> radii,
                                std::size_t samples, double tol, std::uint64_t seed) {
    if (x.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");
    if (p.dim > 4) throw Error(ErrorKind::unsupported_check, "hull membership is limited to dimension 4");
    if (radii.empty()) throw Error(ErrorKind::invalid_parameter, "need at least one radius");

    StationarityReport r;
    r.point.assign(x.begin(), x.end());
    r.tol = tol;
    std::vector<double> sorted(radii.begin(), radii.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::optional<std::size_t> decisive;
    for (std::size_t level = 0; level < sorted.size(); ++level) {
        const std::vector<Vector> dirs = sampled_directions(p, x, sorted[level], samples, derive_seed(seed, level));
        StationarityLevel lv{sorted[level], dirs.size(), 0, kNaN};
        if (!dirs.empty()) {
            const std::vector<Cluster> clusters = cluster_directions(dirs);
            std::vector<Vector> centers;
            for (const Cluster& c : clusters) centers.push_back(c.center);
            lv.clusters = centers.size();
            lv.hull_distance = hull_distance(centers);
            decisive = level;
            r.generators = std::move(centers);
        }
        r.levels.push_back(lv);
    }
    if (!decisive) throw Error(ErrorKind::insufficient_sampling, p.name + ": no smooth samples near the point");
    r.generator_count = r.levels[*decisive].clusters;
    r.hull_distance = r.levels[*decisive].hull_distance;
    r.is_critical = r.hull_distance <= tol;
    return r;
}

SpanReport strict_minimum_span_check(const ProblemSpec& p, std::span<const double> xbar, std::uint64_t seed) {
    if (xbar.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "point dimension mismatch");
    const auto with_jacobian = std::find_if(p.conserved.begin(), p.conserved.end(),
                                            [](const ConservedQuantity& c) { return static_cast<bool>(c.jacobian); });
    if (with_jacobian == p.conserved.end())
        throw Error(ErrorKind::unsupported_check, p.name + " has no conserved quantity with a Jacobian");

    // exact generators when the problem knows them; sampled limits are only accurate to the ball radius
    std::vector<Vector> columns = normalized_generators(p, xbar, SelectionOptions{1e-9, 1e-12, true});
    if (columns.empty()) {
        const std::vector<Vector> dirs = sampled_directions(p, xbar, 1e-10, 400, seed);
        if (dirs.empty())
            throw Error(ErrorKind::insufficient_sampling, p.name + ": no smooth samples near the point");
        for (const Cluster& c : cluster_directions(dirs)) columns.push_back(c.center);
    }
    const std::size_t generator_count = columns.size();
    for (const ConservedQuantity& c : p.conserved) {
        if (!c.jacobian) continue;
        const Matrix j = c.jacobian(xbar);
        for (std::size_t i = 0; i < j.rows(); ++i) columns.push_back(j.row(i));
    }
    const Matrix stacked = Matrix::from_columns(columns);

    SpanReport r;
    r.dim = p.dim;
    r.generator_count = generator_count;
    r.singular_values = svd_small(stacked).sigma;
    r.rank = numerical_rank(stacked, 1e-8);
    r.passes = r.rank == p.dim;
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

nlohmann::json to_json(const DLyapunovReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < r.alpha_grid.size(); ++i)
        rows.push_back({{"alpha", r.alpha_grid[i]},
                        {"worst_decrease", number(r.worst_decrease[i])},
                        {"worst_ratio", number(r.worst_ratio[i])},
                        {"resolved", static_cast<bool>(r.resolved[i])}});
    return {{"check", r.steps == 1 ? "dlyapunov" : "dlyapunov_multistep"},
            {"problem", r.problem},
            {"center", numbers(r.center)},
            {"radius", r.radius},
            {"steps", r.steps},
            {"samples_per_alpha", r.samples_per_alpha},
            {"skipped_samples", r.skipped_samples},
            {"claimed_p", r.claimed_p},
            {"grid", rows},
            {"fitted_p", number(r.fitted_p)},
            {"fitted_omega", number(r.fitted_omega)},
            {"alpha_bar", r.alpha_bar ? nlohmann::json(*r.alpha_bar) : nlohmann::json(nullptr)},
            {"notes", r.notes},
            {"pass", r.pass}};
}

nlohmann::json to_json(const ConservationReport& r) {
    nlohmann::json qs = nlohmann::json::array();
    for (const QuantityDrift& d : r.quantities)
        qs.push_back({{"label", d.label},
                      {"drift", number(d.drift)},
                      {"drift_half_dt", number(d.drift_half)},
                      {"halving_ratio", number(d.halving_ratio)},
                      {"ngd_drift", number(d.ngd_drift)},
                      {"pass", d.pass}});
    return {{"check", "conservation"},
            {"problem", r.problem},
            {"trials", r.trials},
            {"used", r.used},
            {"skipped", r.skipped},
            {"truncated", r.truncated},
            {"horizon", r.horizon},
            {"dt", r.dt},
            {"drift_tol", r.drift_tol},
            {"ngd_steps", r.ngd_steps},
            {"ngd_sum_alpha_sq", r.ngd_sum_alpha_sq},
            {"quantities", qs},
            {"pass", r.pass}};
}

nlohmann::json to_json(const RegularizerHypothesesReport& r) {
    return {{"check", "regularizer_hypotheses"},
            {"problem", r.problem},
            {"descent_samples", r.descent_samples},
            {"curvature_samples", r.curvature_samples},
            {"descent_margin", number(r.descent_margin)},
            {"curvature_margin", number(r.curvature_margin)},
            {"worst_descent_point", numbers(r.worst_descent_point)},
            {"worst_curvature_point", numbers(r.worst_curvature_point)},
            {"exclusion_radius", r.exclusion_radius},
            {"descent_holds", r.descent_holds},
            {"curvature_holds", r.curvature_holds},
            {"pass", r.pass}};
}

nlohmann::json to_json(const StationarityReport& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const StationarityLevel& lv : r.levels)
        levels.push_back({{"radius", lv.radius},
                          {"smooth_samples", lv.smooth_samples},
                          {"clusters", lv.clusters},
                          {"hull_distance", number(lv.hull_distance)}});
    return {{"check", "fermat"},
            {"point", numbers(r.point)},
            {"generator_count", r.generator_count},
            {"hull_distance", number(r.hull_distance)},
            {"tol", r.tol},
            {"is_critical", r.is_critical},
            {"levels", levels}};
}

nlohmann::json to_json(const SpanReport& r) {
    return {{"check", "strict_minimum_span"},
            {"rank", r.rank},
            {"dim", r.dim},
            {"generator_count", r.generator_count},
            {"singular_values", numbers(r.singular_values)},
            {"passes", r.passes}};
}

}  // namespace flatmin
