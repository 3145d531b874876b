// Acceptance criteria; one line per criterion. Arguments select criteria by name.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "flatmin/error.hpp"
#include "flatmin/geometry.hpp"
#include "flatmin/harness.hpp"
#include "flatmin/verifiers.hpp"

using namespace flatmin;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    std::function<Outcome()> run;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ProblemPtr share(ProblemSpec p) { return std::make_shared<const ProblemSpec>(std::move(p)); }

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

constexpr std::uint64_t kSeed = 1;

Outcome hyperbola_capture() {
    constexpr std::size_t trials = 100, required = 95;
    constexpr double radius = 1e-2, time_limit = 10.0;
    const auto start = Clock::now();
    const ScoreRowSpec spec{"hyperbola_xy", share(hyperbola_xy()), StepSchedule::power(0.4, 4.0), 20000, radius, 200};
    const ScoreRow row = score_row(spec, kSeed, 0, trials);
    const double elapsed = seconds_since(start);
    return {row.captured >= required && elapsed <= time_limit,
            std::to_string(row.captured) + "/" + std::to_string(trials) + " within " + fmt(radius) + " of +-(1,1) (" +
                std::to_string(row.captured_per_target[0]) + " at (1,1)), " + fmt(elapsed, 3) + " s (limit " +
                fmt(time_limit) + " s)"};
}

Outcome table1_scoreboard() {
    constexpr std::size_t trials = 50;
    constexpr double required = 0.9, time_limit = 120.0;
    Table1Options opt;
    opt.radius = 2e-2;
    opt.only = {"parabola", "cubic", "conic_ellipse", "monomial", "abs_3d"};
    const auto start = Clock::now();
    const Scoreboard board = reproduce_table1(kSeed, trials, opt);
    const double elapsed = seconds_since(start);
    bool ok = elapsed <= time_limit;
    std::string detail;
    for (const ScoreRow& r : board.rows) {
        ok = ok && r.captured_fraction() >= required;
        detail += r.label + " " + std::to_string(r.captured) + "/" + std::to_string(r.trials) + ", ";
    }
    return {ok, detail + fmt(elapsed, 3) + " s (limit " + fmt(time_limit) + " s)"};
}

Outcome implicit_explicit() {
    constexpr std::size_t pairs = 20;
    constexpr double tol = 5e-2, required = 0.9;
    const ProblemPtr p = share(hyperbola_xy());
    std::size_t agree = 0, gd_failures = 0;
    for (std::size_t t = 0; t < pairs; ++t) {
        Rng init_rng(derive_seed(kSeed, 7, t));
        RunConfig cfg;
        cfg.problem = p;
        cfg.max_iters = 20000;
        cfg.init = sample_initial_point(*p, cfg.init_margin, init_rng);
        cfg.seed = derive_seed(kSeed, 8, t);
        cfg.record_rows = false;
        cfg.schedule = StepSchedule::power(0.4, 4.0);
        const TrajectoryRecord ngd = run_ngd(cfg);
        cfg.schedule = StepSchedule::constant(0.1);
        TrajectoryRecord gd;
        try {
            gd = run_gd(cfg, 0.1);
        } catch (const Error&) {
            ++gd_failures;
            continue;
        }
        if (ngd.nearest_target && gd.nearest_target && *ngd.nearest_target == *gd.nearest_target &&
            ngd.target_distance <= tol && gd.target_distance <= tol)
            ++agree;
    }
    const double frac = static_cast<double>(agree) / pairs;
    return {frac >= required, std::to_string(agree) + "/" + std::to_string(pairs) +
                                  " pairs end within " + fmt(tol) + " of the same flat minimum (" +
                                  std::to_string(gd_failures) + " GD runs failed)"};
}

Outcome dlyapunov_exponents() {
    constexpr double lo2 = 1.8, hi2 = 2.2, lo4 = 3.5, hi4 = 4.5;
    const ProblemSpec hyp = hyperbola_xy();
    Rng rng(5);
    double pmin = 1e300, pmax = -1e300;
    bool ok = true;
    for (int i = 0; i < 20; ++i) {
        double t = rng.uniform(1.25, 2.5);
        if (rng.uniform() < 0.5) t = 1.0 / t;
        const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
        DLyapunovOptions opt;
        opt.claimed_p = 2.0;
        const auto r = check_dlyapunov(hyp, Vector{s * t, s / t}, 0.02, default_alpha_grid(), 100,
                                       derive_seed(5, static_cast<std::uint64_t>(i)), opt);
        pmin = std::min(pmin, r.fitted_p);
        pmax = std::max(pmax, r.fitted_p);
        ok = ok && r.pass && r.fitted_p >= lo2 && r.fitted_p <= hi2;
    }
    DLyapunovOptions opt4;
    opt4.claimed_p = 4.0;
    const auto quartic =
        check_dlyapunov_multistep(quartic_y4(), Vector{1.0, 0.05}, 0.1, default_alpha_grid(), 1000, 2, kSeed, opt4);
    ok = ok && quartic.fitted_p >= lo4 && quartic.fitted_p <= hi4;
    return {ok, "hyperbola p in [" + fmt(pmin) + ", " + fmt(pmax) + "] over 20 centers (need [" + fmt(lo2) + ", " +
                    fmt(hi2) + "]); quartic q=2 p = " + fmt(quartic.fitted_p) + " (need [" + fmt(lo4) + ", " +
                    fmt(hi4) + "])"};
}

Outcome dlyapunov_decrease_constant() {
    constexpr double lo = 5.8, hi = 8.6;
    DLyapunovOptions opt;
    opt.claimed_p = 2.0;
    const auto r = check_dlyapunov(hyperbola_xy(), Vector{2.0, 1.0}, 1e-3, default_alpha_grid(), 200, kSeed, opt);
    return {r.fitted_omega >= lo && r.fitted_omega <= hi,
            "omega at (2,1) = " + fmt(r.fitted_omega) + " (need [" + fmt(lo) + ", " + fmt(hi) +
                "]; unit-length steps give 2g/(x^2+y^2) = 3.6)"};
}

Outcome conservation() {
    constexpr std::size_t flows = 20;
    bool ok = true;
    std::string detail;
    for (const ProblemSpec& p : catalog()) {
        if (p.conserved.empty()) continue;
        const ConservationReport r = check_conservation(p, flows, 5.0, 1e-3, kSeed);
        double worst = 0.0;
        for (const QuantityDrift& q : r.quantities) worst = std::max(worst, q.drift);
        ok = ok && r.pass && r.used == flows;
        detail += p.name + " " + fmt(worst, 2) + (r.pass ? "" : " FAIL") + ", ";
    }
    return {ok, "max relative drift per problem: " + detail.substr(0, detail.size() - 2)};
}

Outcome sharpness() {
    const double lambda = top_eigenvalue(finite_diff_hessian(hyperbola_xy().objective, Vector{1.0, 1.0}));
    const bool hyp_ok = std::abs(lambda - 4.0) <= 1e-4;

    std::vector<double> xs;
    for (int i = 0; i <= 900; ++i) xs.push_back(0.3 + 1e-3 * i);
    const FlatnessReport cub = sharpness_profile(cubic(), 0, xs);
    auto closed = [](double x) { return 18.0 * (std::pow(x, 4) + std::pow(std::abs(x * x * x - 1.0), 4.0 / 3.0)); };
    double closed_err = 0.0;
    std::size_t closed_argmin = 0;
    for (std::size_t i = 0; i < cub.points.size(); ++i) {
        const double x = cub.points[i].t;
        closed_err = std::max(closed_err, std::abs(cub.points[i].sharpness - closed(x)) / closed(x));
        if (closed(x) < closed(xs[closed_argmin])) closed_argmin = i;
    }
    const double cub_x = cub.points[*cub.argmin].t;
    const bool cub_ok = std::abs(cub_x - std::cbrt(0.5)) <= 1e-2 && std::abs(xs[closed_argmin] - std::cbrt(0.5)) <= 1e-2 &&
                        closed_err <= 1e-3;

    std::vector<double> taus;
    for (int i = 0; i <= 2000; ++i) taus.push_back(-1.0 + 1e-3 * i);
    const FlatnessReport abs3 = sharpness_profile(abs_3d(), 0, taus);
    const double t_abs = abs3.points[*abs3.argmin].point[1];
    const bool abs_ok = std::abs(t_abs - std::pow(2.0, 0.25)) <= 1e-2;

    return {hyp_ok && cub_ok && abs_ok,
            "lambda1(1,1) = " + fmt(lambda, 10) + "; cubic argmin x = " + fmt(cub_x) + " (closed form " +
                fmt(xs[closed_argmin]) + ", max rel err " + fmt(closed_err, 2) + "); abs_3d argmin t = " +
                fmt(t_abs) + " vs 2^(1/4) = " + fmt(std::pow(2.0, 0.25))};
}

Outcome least_squares_bias() {
    constexpr double tol = 1e-6;
    Rng gen(3);
    Matrix a(4, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) a(i, j) = gen.normal();
    Vector b(4);
    for (double& v : b) v = gen.normal();
    Rng lam_rng(derive_seed(3, 1));
    Vector lambda(4);
    for (double& v : lambda) v = lam_rng.normal();
    const Vector x0 = a.transpose() * lambda;

    RunConfig cfg;
    cfg.problem = share(least_squares(a, b));
    const double s1 = svd_small(a).sigma.front();
    cfg.schedule = StepSchedule::constant(0.4 / (s1 * s1));
    cfg.max_iters = 100000;
    cfg.init = x0;
    cfg.stop_at_target = false;
    cfg.record_rows = false;
    const TrajectoryRecord rec = run_gd(cfg, 0.0);
    const double err = distance(rec.terminal, least_squares_limit(a, b, x0));
    const double err_min_norm = distance(rec.terminal, cfg.problem->flat_minima.front());
    return {err <= tol && err_min_norm <= tol,
            "|x_inf - limit| = " + fmt(err, 3) + ", |x_inf - min-norm solution| = " + fmt(err_min_norm, 3)};
}

Outcome criticality() {
    bool ok = true;
    std::string detail;
    for (const ProblemSpec& p : {hyperbola_xy(), parabola(), monomial({1, 2}), abs_3d()}) {
        std::size_t critical_minima = 0;
        for (const Vector& z : p.flat_minima)
            if (fermat_check(p, z, std::vector<double>{1e-2, 1e-4, 1e-6}, 400, 1e-3, kSeed).is_critical)
                ++critical_minima;
        Rng rng(derive_seed(kSeed, 11));
        std::size_t probes = 0, false_positive = 0;
        while (probes < 100) {
            Vector x(p.dim);
            for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.sampling_box[i].lo, p.sampling_box[i].hi);
            if (p.kink_membership && p.kink_membership(x, 1e-6)) continue;
            if (norm(p.gradient(x)) <= 0.1) continue;
            ++probes;
            if (fermat_check(p, x, std::vector<double>{1e-2, 1e-4, 1e-6}, 400, 1e-3, derive_seed(kSeed, probes))
                    .is_critical)
                ++false_positive;
        }
        ok = ok && critical_minima == p.flat_minima.size() && false_positive == 0;
        detail += p.name + " " + std::to_string(critical_minima) + "/" + std::to_string(p.flat_minima.size()) +
                  " minima critical, " + std::to_string(false_positive) + "/100 probes critical; ";
    }
    return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome geometry_bounds() {
    std::vector<double> alphas;
    for (int j = 0; j <= 10; ++j) alphas.push_back(std::ldexp(0.05, -j));
    const ProblemSpec par = parabola(), qua = quartic_y4();
    const auto pb = projection_distance_bound_check(par, par.flat_minima.front(), alphas, 1000, kSeed);
    const auto qb = projection_distance_bound_check(qua, qua.flat_minima.front(), alphas, 1000, kSeed);
    const SubregularityReport sub = subregularity_estimate(qua, qua.flat_minima.front(), 400, kSeed);
    const bool ok = pb.pass && qb.pass && pb.worst_slack >= -1e-9 && qb.worst_slack >= -1e-9 && sub.tau >= 0.9 &&
                    sub.tau <= 1.1;
    return {ok, "projection slack parabola " + fmt(pb.worst_slack, 3) + ", quartic " + fmt(qb.worst_slack, 3) +
                    " (need >= -1e-9); quartic tau = " + fmt(sub.tau) + " (need [0.9, 1.1])"};
}

Outcome determinism_equivariance() {
    bool identical = true;
    for (const ProblemSpec& p : {hyperbola_xy(), abs_3d(), rank1_l1()}) {
        RunConfig cfg;
        cfg.problem = share(p);
        cfg.seed = 42;
        cfg.max_iters = 3000;
        cfg.stop_at_target = false;
        identical = identical && trajectory_csv(run_ngd(cfg)) == trajectory_csv(run_ngd(cfg));
    }
    Table1Options opt;
    opt.max_iters = 20000;
    opt.only = {"hyperbola_xy", "abs_3d"};
    const std::string board = to_json(reproduce_table1(9, 8, opt)).dump();
    opt.threads = 2;
    identical = identical && board == to_json(reproduce_table1(9, 8, opt)).dump();

    const double th = 0.9;
    const Matrix u(2, 2, {std::cos(th), -std::sin(th), std::sin(th), std::cos(th)});
    const Matrix ut = u.transpose();
    double worst = 0.0;
    for (const ProblemSpec& p : {hyperbola_xy(), cubic(), conic(2, 1), parabola(), monomial({1, 2})}) {
        RunConfig cfg;
        cfg.problem = share(p);
        cfg.max_iters = 100;
        cfg.stop_at_target = false;
        cfg.seed = 4;
        cfg.init = Vector{0.7, -0.4};
        const TrajectoryRecord orig = run_ngd(cfg);
        cfg.problem = share(change_of_variables(p, u));
        cfg.init = ut * Vector{0.7, -0.4};
        const TrajectoryRecord rot = run_ngd(cfg);
        if (orig.rows.size() != rot.rows.size()) return {false, p.name + ": rotated run has a different length"};
        for (std::size_t i = 0; i < orig.rows.size(); ++i)
            worst = std::max(worst, distance(rot.rows[i].x, ut * orig.rows[i].x));
    }
    return {identical && worst <= 1e-10, std::string(identical ? "byte-identical" : "DIFFERENT") +
                                             " trajectories and scoreboards per seed; equivariance error " +
                                             fmt(worst, 3) + " over 100 steps (need <= 1e-10)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"hyperbola_capture", hyperbola_capture},
        {"table1_scoreboard", table1_scoreboard},
        {"implicit_explicit", implicit_explicit},
        {"dlyapunov_exponents", dlyapunov_exponents},
        {"dlyapunov_decrease_constant", dlyapunov_decrease_constant},
        {"conservation", conservation},
        {"sharpness", sharpness},
        {"least_squares_bias", least_squares_bias},
        {"criticality", criticality},
        {"geometry_bounds", geometry_bounds},
        {"determinism_equivariance", determinism_equivariance},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    for (const std::string& w : wanted)
        if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.name == w; })) {
            std::fprintf(stderr, "unknown criterion '%s'; known:", w.c_str());
            for (const Criterion& c : criteria) std::fprintf(stderr, " %s", c.name.c_str());
            std::fprintf(stderr, "\n");
            return 2;
        }

    std::size_t failed = 0;
    for (const Criterion& c : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s %-28s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), seconds_since(start),
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
