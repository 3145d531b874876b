#include <cmath>

#include "doctest.h"
#include "flatmin/error.hpp"
#include "flatmin/verifiers.hpp"

using namespace flatmin;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::usage;
}

}  // namespace

TEST_CASE("default step-size grid") {
    const auto grid = default_alpha_grid();
    REQUIRE(grid.size() == 11);
    CHECK(grid.front() == 0.1);
    CHECK(grid.back() == doctest::Approx(0.1 / 1024));
}

TEST_CASE("hyperbola regularizer decreases at rate alpha^2") {
    const ProblemSpec p = hyperbola_xy();
    const auto r = check_dlyapunov(p, Vector{2, 1}, 1e-3, default_alpha_grid(), 200, 1);
    CHECK(r.pass);
    CHECK(r.fitted_p == doctest::Approx(2.0).epsilon(0.05));
    // a unit step along (y, x)/|(x, y)| maps x^2 - y^2 to (x^2 - y^2)(1 - alpha^2/(x^2 + y^2))
    CHECK(r.fitted_omega == doctest::Approx(2.0 * 9.0 / 5.0).epsilon(0.01));
    CHECK(r.alpha_bar == 0.1);
    CHECK(r.notes.empty());
}

TEST_CASE("hyperbola decrease holds at solution-set centers") {
    const ProblemSpec p = hyperbola_xy();
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        double t = rng.uniform(1.25, 2.5);
        if (rng.uniform() < 0.5) t = 1.0 / t;
        const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const Vector c{s * t, s / t};
        const auto r = check_dlyapunov(p, c, 0.02, default_alpha_grid(), 100, derive_seed(5, i));
        CAPTURE(c);
        CHECK(r.pass);
        CHECK(r.fitted_p >= 1.8);
        CHECK(r.fitted_p <= 2.2);
    }
}

TEST_CASE("quartic regularizer needs two steps") {
    const ProblemSpec p = quartic_y4();
    const auto one = check_dlyapunov(p, Vector{1, 0.05}, 0.1, default_alpha_grid(), 300, 1);
    CHECK_FALSE(one.pass);
    CHECK(std::find(one.notes.begin(), one.notes.end(), "multi-step regime, see check_dlyapunov_multistep") !=
          one.notes.end());
    const auto two = check_dlyapunov_multistep(p, Vector{1, 0.05}, 0.1, default_alpha_grid(), 1000, 2, 1);
    CHECK(two.pass);
    CHECK(two.fitted_p == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("one-step multistep check equals the single-step check") {
    const ProblemSpec p = hyperbola_xy();
    const auto a = check_dlyapunov(p, Vector{2, 1}, 0.05, default_alpha_grid(), 50, 9);
    const auto b = check_dlyapunov_multistep(p, Vector{2, 1}, 0.05, default_alpha_grid(), 50, 1, 9);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("abs_3d regularizer decreases at rate alpha^2 across kinks") {
    const auto r = check_dlyapunov(abs_3d(), Vector{0, 1, 1}, 1e-2, default_alpha_grid(), 200, 2);
    CHECK(r.pass);
    CHECK(r.fitted_p == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("decrease check negative results") {
    ProblemSpec constant = hyperbola_xy();
    constant.regularizer->value = [](std::span<const double>) { return 1.0; };
    const auto flat = check_dlyapunov(constant, Vector{2, 1}, 0.01, default_alpha_grid(), 50, 1);
    CHECK(flat.fitted_omega == doctest::Approx(0.0));
    CHECK_FALSE(flat.pass);

    DLyapunovOptions wrong;
    wrong.claimed_p = 3.0;
    CHECK_FALSE(check_dlyapunov(hyperbola_xy(), Vector{2, 1}, 0.01, default_alpha_grid(), 50, 1, wrong).pass);

    ProblemSpec nowhere = hyperbola_xy();
    nowhere.regularizer->in_domain = [](std::span<const double>) { return false; };
    CHECK(kind_of([&] { check_dlyapunov(nowhere, Vector{2, 1}, 0.01, default_alpha_grid(), 50, 1); }) ==
          ErrorKind::insufficient_domain);
    CHECK(kind_of([&] { check_dlyapunov(least_squares_default(), Vector(6, 0.0), 0.1, default_alpha_grid(), 5, 1); }) ==
          ErrorKind::unsupported_check);
}

TEST_CASE("conservation along gradient flows") {
    for (const ProblemSpec& p : catalog()) {
        if (p.conserved.empty()) continue;
        CAPTURE(p.name);
        const auto r = check_conservation(p, 5, 5.0, 1e-3, 7);
        CHECK(r.pass);
        CHECK(r.used + r.skipped == 5);
        for (const QuantityDrift& d : r.quantities) {
            CHECK(d.drift <= 1e-6);
            if (d.drift > 1e-11) CHECK(d.halving_ratio >= 8.0);
        }
    }
    CHECK(kind_of([] { check_conservation(quartic_y4(), 3, 1.0, 1e-3, 1); }) == ErrorKind::unsupported_check);
}

TEST_CASE("regularizer curvature on the parabola matches the closed form") {
    const ProblemSpec p = parabola();
    const double x = 0.7, y = x * x;
    const SymmetricMatrix h = finite_diff_hessian(p.regularizer->value, Vector{x, y});
    const Vector u = scaled(Vector{2 * x, -1}, 1.0 / std::sqrt(4 * x * x + 1));
    CHECK(h.quadratic_form(u) == doctest::Approx(-8 * x * x * std::exp(4 * y) / (4 * x * x + 1)).epsilon(1e-5));
}

TEST_CASE("regularizer hypotheses") {
    for (const char* name : {"parabola", "conic", "hyperbola_xy", "abs_3d", "monomial"}) {
        CAPTURE(name);
        const auto r = check_regularizer_hypotheses(make_problem(name), 200, 3);
        CHECK(r.descent_holds);
        CHECK(std::abs(r.descent_margin) <= 1e-8);
        CHECK(r.curvature_holds);
        CHECK(r.curvature_margin <= -1e-6);
    }
    ProblemSpec degenerate = parabola();
    degenerate.regularizer->value = degenerate.objective;
    degenerate.regularizer->gradient = degenerate.gradient;
    const auto d = check_regularizer_hypotheses(degenerate, 100, 3);
    CHECK(d.descent_holds);
    CHECK(d.curvature_samples == 0);
    CHECK_FALSE(d.curvature_holds);

    // f + 1 keeps the Hessian of f, which is positive semidefinite at minima
    ProblemSpec shifted = parabola();
    shifted.regularizer->value = [f = shifted.objective](std::span<const double> x) { return f(x) + 1.0; };
    shifted.regularizer->gradient = shifted.gradient;
    const auto s = check_regularizer_hypotheses(shifted, 100, 3);
    CHECK(s.descent_holds);
    CHECK(s.curvature_margin > 0.0);
    CHECK_FALSE(s.pass);
    CHECK(kind_of([] { check_regularizer_hypotheses(quadric(), 10, 1); }) == ErrorKind::unsupported_check);
}

TEST_CASE("fermat check examples") {
    const ProblemSpec h = hyperbola_xy();
    const auto at_min = fermat_check(h, Vector{1, 1});
    CHECK(at_min.is_critical);
    CHECK(at_min.generator_count == 2);
    const auto off = fermat_check(h, Vector{2, 1});
    CHECK_FALSE(off.is_critical);
    CHECK(off.hull_distance == doctest::Approx(1.0).epsilon(1e-6));
    const double t = std::pow(2.0, 0.25);
    const auto kink = fermat_check(abs_3d(), Vector{0, t, 1 / t});
    CHECK(kink.is_critical);
    CHECK(kink.generator_count == 4);
    CHECK(kind_of([] { fermat_check(matfac_default(), Vector(8, 0.5)); }) == ErrorKind::unsupported_check);
}

TEST_CASE("fermat check at flat minima and non-critical probes") {
    for (const char* name : {"hyperbola_xy", "parabola", "monomial", "abs_3d"}) {
        const ProblemSpec p = make_problem(name);
        CAPTURE(name);
        for (const Vector& z : p.flat_minima) CHECK(fermat_check(p, z).is_critical);
        Rng rng(11);
        int probes = 0;
        while (probes < 100) {
            Vector x(p.dim);
            for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.sampling_box[i].lo, p.sampling_box[i].hi);
            if (norm(p.gradient(x)) <= 0.1) continue;
            ++probes;
            CHECK_FALSE(fermat_check(p, x, std::vector<double>{1e-2, 1e-4, 1e-6}, 50).is_critical);
        }
    }
}

TEST_CASE("strict minimum span check") {
    const auto m11 = strict_minimum_span_check(monomial({1, 1}), Vector{1, 1});
    CHECK(m11.passes);
    CHECK(m11.rank == 2);
    const ProblemSpec m12 = monomial({1, 2});
    for (const Vector& z : m12.flat_minima) CHECK(strict_minimum_span_check(m12, z).passes);

    ProblemSpec trivial = parabola();
    trivial.conserved = {{"0", [](std::span<const double>) { return Vector{0.0}; },
                          [](std::span<const double>) { return Matrix(1, 2, 0.0); }}};
    const auto r = strict_minimum_span_check(trivial, Vector{0, 0});
    CHECK_FALSE(r.passes);
    CHECK(r.rank == 1);
}

TEST_CASE("reports serialize to json") {
    const auto j = to_json(check_dlyapunov(hyperbola_xy(), Vector{2, 1}, 0.01, default_alpha_grid(), 20, 1));
    CHECK(j["check"] == "dlyapunov");
    CHECK(j["grid"].size() == 11);
    CHECK(j.contains("fitted_omega"));
    CHECK(to_json(fermat_check(hyperbola_xy(), Vector{1, 1}))["is_critical"] == true);
}
