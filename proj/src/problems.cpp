#include "flatmin/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flatmin/error.hpp"

namespace flatmin {

LevelSetModel::LevelSetModel(std::vector<LevelSetBranch> branches,
                             std::function<double(std::span<const double>)> analytic_distance)
    : branches_(std::move(branches)), analytic_distance_(std::move(analytic_distance)) {
    if (branches_.empty()) throw Error(ErrorKind::invalid_parameter, "level set needs at least one branch");
}

Vector LevelSetModel::point(std::size_t branch, double t) const { return branches_.at(branch).point(t); }

Vector LevelSetModel::unit_tangent(std::size_t branch, double t) const {
    const Vector v = branches_.at(branch).tangent(t);
    const double nv = norm(v);
    if (!(nv > 0.0)) throw Error(ErrorKind::degenerate_basis, "level set tangent vanishes");
    return scaled(v, 1.0 / nv);
}

std::vector<Vector> LevelSetModel::tangent_basis(std::size_t branch, double t) const {
    return {unit_tangent(branch, t)};
}

namespace {

struct BranchFit {
    double t;
    double dist;
};

BranchFit project_branch(const LevelSetBranch& br, std::span<const double> x) {
    auto dist = [&](double t) { return distance(br.point(t), x); };
    constexpr int kGrid = 400;
    const double lo = br.params.lo, hi = br.params.hi;
    const double step = (hi - lo) / kGrid;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double d = dist(lo + step * i);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    double a = lo + step * std::max(best - 1, 0);
    double b = lo + step * std::min(best + 1, kGrid);

    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = dist(c), fd = dist(d);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * (1.0 + std::abs(a)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = dist(d);
        }
    }
    BranchFit fit{0.5 * (a + b), dist(0.5 * (a + b))};

    // secant on <point(t) - x, tangent(t)> = 0 sharpens the foot point
    auto ortho = [&](double t) {
        const Vector tan = br.tangent(t);
        return dot(subtract(br.point(t), x), tan) / std::max(norm(tan), 1e-300);
    };
    double t0 = fit.t, t1 = fit.t + 1e-6 * (1.0 + std::abs(fit.t));
    double h0 = ortho(t0), h1 = ortho(t1);
    for (int it = 0; it < 30 && h1 != h0; ++it) {
        const double t2 = t1 - h1 * (t1 - t0) / (h1 - h0);
        if (!std::isfinite(t2) || !br.params.contains(t2)) break;
        t0 = t1;
        h0 = h1;
        t1 = t2;
        h1 = ortho(t1);
        if (std::abs(t1 - t0) <= 1e-15 * (1.0 + std::abs(t1))) break;
    }
    const double refined = dist(t1);
    if (br.params.contains(t1) && refined <= fit.dist) fit = {t1, refined};
    return fit;
}

}  // namespace

LevelSetProjection LevelSetModel::project(std::span<const double> x) const {
    LevelSetProjection out;
    out.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        const BranchFit fit = project_branch(branches_[i], x);
        if (fit.dist < out.distance) {
            out.branch = i;
            out.t = fit.t;
            out.distance = fit.dist;
        }
    }
    out.foot = branches_[out.branch].point(out.t);
    return out;
}

double LevelSetModel::distance_to(std::span<const double> x) const {
    if (analytic_distance_) return analytic_distance_(x);
    return project(x).distance;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Vector> normalize_nonzero(const std::vector<Vector>& vs, double floor) {
    std::vector<Vector> out;
    for (const Vector& v : vs) {
        const double nv = norm(v);
        if (nv > floor && std::isfinite(nv)) out.push_back(scaled(v, 1.0 / nv));
    }
    return out;
}

void require_finite_objective(const ProblemSpec& p, std::span<const double> x) {
    if (x.size() != p.dim)
        throw Error(ErrorKind::invalid_parameter, p.name + " expects dimension " + std::to_string(p.dim));
    if (!all_finite(x) || !std::isfinite(p.objective(x)))
        throw Error(ErrorKind::evaluation_domain, p.name + ": objective is not finite at the iterate");
}

}  // namespace

std::vector<Vector> normalized_generators(const ProblemSpec& p, std::span<const double> x,
                                          const SelectionOptions& options) {
    require_finite_objective(p, x);
    if (p.kink_membership && p.kink_membership(x, options.kink_tol))
        return normalize_nonzero(p.subgradient_generators(x, options.kink_tol), 0.0);
    const Vector g = p.gradient(x);
    const double ng = norm(g);
    if (ng >= options.grad_floor && std::isfinite(ng)) return {scaled(g, 1.0 / ng)};
    if (options.use_limit_directions && p.limit_directions) return normalize_nonzero(p.limit_directions(x), 0.0);
    return {};
}

Selection subgradient_select(const ProblemSpec& p, std::span<const double> x, SelectionRule rule, Rng& rng,
                             const SelectionOptions& options) {
    require_finite_objective(p, x);
    auto pick = [&](const std::vector<Vector>& dirs, const char* kind) {
        const std::size_t i = rule == SelectionRule::uniform_random ? rng.index(dirs.size()) : 0;
        return Selection{dirs[i], std::string(kind) + ":" + std::to_string(i) + "/" + std::to_string(dirs.size()),
                         false};
    };
    const Selection critical{Vector(p.dim, 0.0), "critical", true};

    if (p.kink_membership && p.kink_membership(x, options.kink_tol)) {
        const auto dirs = normalize_nonzero(p.subgradient_generators(x, options.kink_tol), 0.0);
        if (dirs.empty()) return critical;
        if (dirs.size() == 1) return {dirs.front(), "kink:0/1", false};
        return pick(dirs, "kink");
    }
    const Vector g = p.gradient(x);
    const double ng = norm(g);
    if (ng >= options.grad_floor && std::isfinite(ng)) return {scaled(g, 1.0 / ng), "smooth", false};
    if (options.use_limit_directions && p.limit_directions) {
        const auto dirs = normalize_nonzero(p.limit_directions(x), 0.0);
        if (!dirs.empty()) return pick(dirs, "limit");
    }
    return critical;
}

// ---------------------------------------------------------------------------

ProblemSpec change_of_variables(const ProblemSpec& p, const Matrix& u) {
    const std::size_t n = p.dim;
    if (u.rows() != n || u.cols() != n)
        throw Error(ErrorKind::invalid_parameter, "change of variables needs a square matrix of order " +
                                                      std::to_string(n));
    const Matrix utu = u.transpose() * u;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(utu(i, j) - (i == j ? 1.0 : 0.0)) > 1e-10)
                throw Error(ErrorKind::invalid_parameter, "change of variables matrix is not orthogonal");

    const Matrix ut = u.transpose();
    auto fwd = [u](std::span<const double> x) { return u * x; };
    auto back = [ut](std::span<const double> v) { return ut * v; };
    auto back_all = [ut](const std::vector<Vector>& vs) {
        std::vector<Vector> out;
        out.reserve(vs.size());
        for (const Vector& v : vs) out.push_back(ut * v);
        return out;
    };

    ProblemSpec q = p;
    q.name = p.name + "_rotated";
    q.formula = p.formula + " composed with an orthogonal map";
    q.objective = [f = p.objective, fwd](std::span<const double> x) { return f(fwd(x)); };
    q.gradient = [g = p.gradient, fwd, back](std::span<const double> x) { return back(g(fwd(x))); };
    if (p.kink_membership)
        q.kink_membership = [k = p.kink_membership, fwd](std::span<const double> x, double tol) {
            return k(fwd(x), tol);
        };
    if (p.subgradient_generators)
        q.subgradient_generators = [s = p.subgradient_generators, fwd, back_all](std::span<const double> x,
                                                                                 double tol) {
            return back_all(s(fwd(x), tol));
        };
    if (p.limit_directions)
        q.limit_directions = [l = p.limit_directions, fwd, back_all](std::span<const double> x) {
            return back_all(l(fwd(x)));
        };
    if (p.smooth_piece)
        q.smooth_piece = [s = p.smooth_piece, fwd](std::span<const double> x) { return s(fwd(x)); };
    if (p.regularizer) {
        const RegularizerSpec& r = *p.regularizer;
        RegularizerSpec rr = r;
        rr.value = [v = r.value, fwd](std::span<const double> x) { return v(fwd(x)); };
        rr.gradient = [g = r.gradient, fwd, back](std::span<const double> x) { return back(g(fwd(x))); };
        rr.in_domain = [d = r.in_domain, fwd](std::span<const double> x) { return d(fwd(x)); };
        if (r.saturated) rr.saturated = [s = r.saturated, fwd](std::span<const double> x) { return s(fwd(x)); };
        q.regularizer = std::move(rr);
    }
    q.conserved.clear();
    for (const ConservedQuantity& c : p.conserved) {
        ConservedQuantity cc{c.label, [v = c.value, fwd](std::span<const double> x) { return v(fwd(x)); }, {}};
        if (c.jacobian)
            cc.jacobian = [j = c.jacobian, fwd, u](std::span<const double> x) { return j(fwd(x)) * u; };
        q.conserved.push_back(std::move(cc));
    }
    q.flat_minima = back_all(p.flat_minima);
    if (p.admissible_init)
        q.admissible_init = [a = p.admissible_init, fwd](std::span<const double> x, double m) {
            return a(fwd(x), m);
        };
    if (p.level_set) {
        std::vector<LevelSetBranch> branches;
        for (const LevelSetBranch& b : p.level_set->branches())
            branches.push_back({b.params, [pt = b.point, back](double t) { return back(pt(t)); },
                                [tg = b.tangent, back](double t) { return back(tg(t)); }});
        std::function<double(std::span<const double>)> dist;
        if (p.level_set->has_analytic_distance())
            dist = [ls = *p.level_set, fwd](std::span<const double> x) { return ls.distance_to(fwd(x)); };
        q.level_set = LevelSetModel(std::move(branches), std::move(dist));
    }
    if (p.lipschitz_modulus)
        q.lipschitz_modulus = [l = p.lipschitz_modulus, fwd](std::span<const double> x) { return l(fwd(x)); };
    return q;
}

std::string to_string(SelectionRule rule) {
    return rule == SelectionRule::uniform_random ? "uniform_random" : "lexicographic_first";
}

SelectionRule selection_rule_from_string(const std::string& name) {
    if (name == "uniform_random" || name == "uniform") return SelectionRule::uniform_random;
    if (name == "lexicographic_first" || name == "lexicographic") return SelectionRule::lexicographic_first;
    throw Error(ErrorKind::invalid_parameter, "unknown selection rule '" + name + "'");
}

}  // namespace flatmin
