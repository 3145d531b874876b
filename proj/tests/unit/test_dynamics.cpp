#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "flatmin/dynamics.hpp"
#include "flatmin/error.hpp"

using namespace flatmin;

namespace {

ProblemPtr share(ProblemSpec p) { return std::make_shared<const ProblemSpec>(std::move(p)); }

Matrix rotation(double theta) {
    return Matrix(2, 2, {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)});
}

}  // namespace

TEST_CASE("step schedules") {
    const StepSchedule s = StepSchedule::power(0.4, 4);
    CHECK(s(0) == doctest::Approx(0.4));
    CHECK(s(15) == doctest::Approx(0.2));
    for (std::size_t k = 0; k < 1000; ++k) CHECK(s(k + 1) < s(k));
    const StepSchedule c = StepSchedule::power(0.1, std::numeric_limits<double>::infinity());
    CHECK(c.kind() == StepSchedule::Kind::constant);
    CHECK(c(0) == 0.1);
    CHECK(c(123456) == 0.1);
    CHECK_THROWS_AS(StepSchedule::power(-1, 2), Error);
    CHECK_THROWS_AS(StepSchedule::power(1, 0.5), Error);
}

TEST_CASE("squared step sums diverge for gamma >= 2") {
    for (double gamma : {2.0, 3.0, 4.0}) {
        const StepSchedule s = StepSchedule::power(0.5, gamma);
        double sum = 0.0;
        std::size_t next_check = 10;
        for (std::size_t k = 0; k < 1000000; ++k) {
            sum += s(k) * s(k);
            if (k + 1 == next_check) {
                // integral comparison: sum_{k<K} (k+1)^(-2/gamma) >= int_1^{K+1} t^(-2/gamma) dt
                const double K = static_cast<double>(k + 1);
                const double e = 1.0 - 2.0 / gamma;
                const double bound = 0.25 * (e == 0.0 ? std::log(K + 1.0) : (std::pow(K + 1.0, e) - 1.0) / e);
                CHECK(sum >= bound);
                next_check *= 10;
            }
        }
        CHECK(sum > (gamma == 2.0 ? 3.0 : 10.0));
    }
}

TEST_CASE("ngd_step examples") {
    const ProblemSpec hyp = hyperbola_xy();
    Rng rng(0);
    const StepResult r = ngd_step(hyp, Vector{2, 1}, 0.4, SelectionRule::uniform_random, rng);
    CHECK(r.x[0] == doctest::Approx(2 - 0.4 / std::sqrt(5.0)).epsilon(1e-15));
    CHECK(r.x[1] == doctest::Approx(1 - 0.8 / std::sqrt(5.0)).epsilon(1e-15));

    const StepResult c = ngd_step(parabola(), Vector{1.5, 2.25}, 0.3, SelectionRule::uniform_random, rng);
    CHECK(c.critical);
    CHECK(c.tag == "critical");
    CHECK(c.x == Vector{1.5, 2.25});

    CHECK_THROWS_AS(ngd_step(hyp, Vector{2, 1}, 0.0, SelectionRule::uniform_random, rng), Error);
}

TEST_CASE("non-critical steps move exactly alpha") {
    for (const ProblemSpec& p : catalog()) {
        CAPTURE(p.name);
        Rng rng(21);
        for (int i = 0; i < 200; ++i) {
            Vector x(p.dim);
            for (std::size_t d = 0; d < p.dim; ++d) x[d] = rng.uniform(p.sampling_box[d].lo, p.sampling_box[d].hi);
            const double alpha = rng.uniform(1e-4, 0.5);
            const StepResult s = ngd_step(p, x, alpha, SelectionRule::uniform_random, rng);
            if (!s.critical) CHECK(std::abs(distance(s.x, x) - alpha) <= 1e-12);
        }
    }
}

TEST_CASE("run_ngd reaches the flat minima of the hyperbola") {
    RunConfig cfg;
    cfg.problem = share(hyperbola_xy());
    cfg.schedule = StepSchedule::power(0.4, 4);
    cfg.max_iters = 20000;
    cfg.init = Vector{2.5, 0.8};
    cfg.seed = 1;
    const TrajectoryRecord rec = run_ngd(cfg);
    CHECK(rec.captured());
    CHECK(distance(rec.terminal, Vector{1, 1}) <= 1e-2);
}

TEST_CASE("run_ngd reaches the flat minima of x*y^2") {
    RunConfig cfg;
    cfg.problem = share(monomial({1, 2}));
    cfg.schedule = StepSchedule::power(0.5, 3);
    cfg.max_iters = 300000;
    cfg.init = Vector{2.0, std::pow(2.0, -0.5) + 0.05};
    const TrajectoryRecord rec = run_ngd(cfg);
    REQUIRE(rec.captured());
    const Vector& z = cfg.problem->flat_minima[*rec.nearest_target];
    CHECK(z[0] == doctest::Approx(std::pow(2.0, -1.0 / 3.0)));
    CHECK(std::abs(z[1]) == doctest::Approx(std::pow(2.0, 1.0 / 6.0)));
}

TEST_CASE("constant steps oscillate boundedly near the flat minima") {
    RunConfig cfg;
    cfg.problem = share(hyperbola_xy());
    cfg.schedule = StepSchedule::constant(0.1);
    cfg.max_iters = 20000;
    cfg.init = Vector{2.5, 0.8};
    cfg.stop_at_target = false;
    const TrajectoryRecord rec = run_ngd(cfg);
    CHECK(rec.status == RunStatus::max_iters);
    double tail_max = 0.0;
    for (std::size_t i = rec.rows.size() / 2; i < rec.rows.size(); ++i)
        tail_max = std::max(tail_max, std::min(distance(rec.rows[i].x, Vector{1, 1}),
                                               distance(rec.rows[i].x, Vector{-1, -1})));
    CHECK(tail_max < 0.5);
    CHECK(tail_max > 0.0);
}

TEST_CASE("run_gd on the explicitly regularized hyperbola") {
    RunConfig cfg;
    cfg.problem = share(hyperbola_xy());
    cfg.schedule = StepSchedule::constant(0.1);
    cfg.max_iters = 20000;
    cfg.init = Vector{2.5, 0.8};
    cfg.stop_at_target = false;
    const TrajectoryRecord rec = run_gd(cfg, 0.1);
    CHECK(rec.status == RunStatus::max_iters);
    CHECK(std::min(distance(rec.terminal, Vector{1, 1}), distance(rec.terminal, Vector{-1, -1})) <= 5e-2);
}

TEST_CASE("run_gd implicit bias of least squares") {
    Rng gen(3);
    Matrix a(4, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) a(i, j) = gen.normal();
    Vector b(4);
    for (double& v : b) v = gen.normal();
    const ProblemSpec ls = least_squares_default();
    const Vector x0 = a.transpose() * Vector{0.3, -0.2, 0.5, 0.1};
    RunConfig cfg;
    cfg.problem = share(ls);
    const double s1 = svd_small(a).sigma.front();
    cfg.schedule = StepSchedule::constant(0.4 / (s1 * s1));
    cfg.max_iters = 100000;
    cfg.init = x0;
    cfg.stop_at_target = false;
    cfg.record_rows = false;
    const TrajectoryRecord rec = run_gd(cfg, 0.0);
    CHECK(distance(rec.terminal, least_squares_limit(a, b, x0)) <= 1e-8);
    CHECK(distance(rec.terminal, ls.flat_minima.front()) <= 1e-8);
}

TEST_CASE("run_gd decays geometrically on |x|^2") {
    RunConfig cfg;
    cfg.problem = share(least_squares(Matrix::identity(3), Vector{0, 0, 0}));
    cfg.schedule = StepSchedule::constant(0.05);
    cfg.max_iters = 50;
    cfg.init = Vector{1, -2, 3};
    cfg.stop_at_target = false;
    const TrajectoryRecord rec = run_gd(cfg, 0.0);
    for (std::size_t i = 1; i < rec.rows.size(); ++i)
        CHECK(norm(rec.rows[i].x) == doctest::Approx(0.9 * norm(rec.rows[i - 1].x)).epsilon(1e-12));
}

TEST_CASE("gradient flow conserves the catalog quantities") {
    const FlowResult hyp = gradient_flow(hyperbola_xy(), Vector{2, 1}, 5.0, 1e-3);
    CHECK((hyp.status == FlowStatus::completed || hyp.status == FlowStatus::gradient_floor));
    CHECK(hyp.states.size() > 100);
    for (const Vector& x : hyp.states) CHECK(std::abs(x[0] * x[0] - x[1] * x[1] - 3.0) <= 1e-6);

    const FlowResult par = gradient_flow(parabola(), Vector{1, 2}, 5.0, 1e-3);
    const double c0 = std::exp(4.0);
    for (const Vector& x : par.states) CHECK(std::abs(x[0] * std::exp(2 * x[1]) - c0) <= 1e-6 * c0);
}

TEST_CASE("gradient flow has fourth order error on a linear field") {
    // f = |x|^2 / 2 has flow x0 exp(-t)
    const double h = 1.0 / std::sqrt(2.0);
    const ProblemSpec half_sq = least_squares(Matrix(2, 2, {h, 0, 0, h}), Vector{0, 0});
    const Vector x0{1.0, -0.5};
    auto error_at = [&](double dt) {
        const FlowResult r = gradient_flow(half_sq, x0, 1.0, dt);
        return distance(r.states.back(), scaled(x0, std::exp(-1.0)));
    };
    const double e1 = error_at(0.1), e2 = error_at(0.05);
    CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("gradient flow halts at kinks and smooth-piece changes") {
    const FlowResult r = gradient_flow(abs_3d(), Vector{0.5, 1.5, 0.9}, 5.0, 1e-3);
    CHECK(r.status != FlowStatus::completed);
    CHECK_THROWS_AS(gradient_flow(abs_3d(), Vector{0.0, 1.0, 1.0}, 1.0, 1e-3), Error);
}

TEST_CASE("runs are deterministic per seed") {
    RunConfig cfg;
    cfg.problem = share(abs_3d());
    cfg.max_iters = 3000;
    cfg.seed = 99;
    const std::string a = trajectory_csv(run_ngd(cfg));
    const std::string b = trajectory_csv(run_ngd(cfg));
    CHECK(a == b);
    cfg.seed = 100;
    CHECK(trajectory_csv(run_ngd(cfg)) != a);
}

TEST_CASE("trajectory csv layout") {
    RunConfig cfg;
    cfg.problem = share(hyperbola_xy());
    cfg.max_iters = 25;
    cfg.stop_at_target = false;
    cfg.init = Vector{2.0, 1.0};
    const TrajectoryRecord rec = run_ngd(cfg);
    const std::string csv = trajectory_csv(rec);
    CHECK(csv.rfind("k,x1,x2,f,g,grad_norm,alpha,tag\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 26);
    CHECK(rec.rows.size() == 26);
    for (const TrajectoryRow& row : rec.rows) CHECK(row.alpha == cfg.schedule(row.k));
    const auto j = trajectory_summary(rec);
    CHECK(j["status"] == "max-iters");
    CHECK(j["iterations"] == 25);
}

TEST_CASE("NGD is equivariant under orthogonal changes of variables") {
    const Matrix u = rotation(0.9);
    const Matrix ut = u.transpose();
    for (const ProblemSpec& p : {hyperbola_xy(), cubic(), conic(2, 1), parabola()}) {
        CAPTURE(p.name);
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
        REQUIRE(orig.rows.size() == rot.rows.size());
        for (std::size_t i = 0; i < orig.rows.size(); ++i)
            CHECK(distance(rot.rows[i].x, ut * orig.rows[i].x) <= 1e-10);
    }
}
