#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "flatmin/error.hpp"
#include "flatmin/problems.hpp"

namespace flatmin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.141592653589793;

double sqr(double v) { return v * v; }
double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::string num(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? " " : "") + num(values[i]);
    return out;
}

std::vector<Interval> box(std::size_t dim, double lo, double hi) { return std::vector<Interval>(dim, {lo, hi}); }

std::vector<Vector> plus_minus(const Vector& v) { return {v, scaled(v, -1.0)}; }

using ResidualField = std::function<double(std::span<const double>)>;

// f = scale * F^2 for a smooth residual F. On [F = 0] the normalized
// subdifferential is {-grad F/|grad F|, +grad F/|grad F|}.
ProblemSpec squared_residual(std::string name, std::string formula, std::size_t dim, ResidualField residual,
                             VectorField residual_grad, double scale = 1.0) {
    ProblemSpec p;
    p.name = std::move(name);
    p.formula = std::move(formula);
    p.dim = dim;
    p.objective = [residual, scale](std::span<const double> x) { return scale * sqr(residual(x)); };
    p.gradient = [residual, residual_grad, scale](std::span<const double> x) {
        return scaled(residual_grad(x), 2.0 * scale * residual(x));
    };
    p.kink_membership = [](std::span<const double>, double) { return false; };
    p.subgradient_generators = [g = p.gradient](std::span<const double> x, double) {
        return std::vector<Vector>{g(x)};
    };
    p.limit_directions = [residual_grad](std::span<const double> x) {
        const Vector d = residual_grad(x);
        return std::vector<Vector>{scaled(d, -1.0), d};
    };
    p.sampling_box = box(dim, -3.0, 3.0);
    p.flow_box = box(dim, -1.5, 1.5);
    p.admissible_init = [residual](std::span<const double> x, double m) { return std::abs(residual(x)) >= m; };
    return p;
}

// Curve s*(e^tau, e^(-k tau)) family used by hyperbolas and monomials.
LevelSetBranch exponential_branch(Vector signs, Vector rates, Interval params) {
    auto pt = [signs, rates](double tau) {
        Vector v(signs.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = signs[i] * std::exp(rates[i] * tau);
        return v;
    };
    auto tg = [signs, rates](double tau) {
        Vector v(signs.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = signs[i] * rates[i] * std::exp(rates[i] * tau);
        return v;
    };
    return {params, pt, tg};
}

}  // namespace

ProblemSpec hyperbola_xy() {
    ProblemSpec p = squared_residual(
        "hyperbola_xy", "(x1*x2 - 1)^2", 2, [](std::span<const double> x) { return x[0] * x[1] - 1.0; },
        [](std::span<const double> x) { return Vector{x[1], x[0]}; });
    p.regularizer = RegularizerSpec{
        "(x1^2 - x2^2)^2",
        [](std::span<const double> x) { return sqr(x[0] * x[0] - x[1] * x[1]); },
        [](std::span<const double> x) {
            const double c = x[0] * x[0] - x[1] * x[1];
            return Vector{4.0 * c * x[0], -4.0 * c * x[1]};
        },
        [](std::span<const double>) { return true; },
        2.0, 1, {}};
    p.conserved.push_back({"x1^2 - x2^2",
                           [](std::span<const double> x) { return Vector{x[0] * x[0] - x[1] * x[1]}; },
                           [](std::span<const double> x) { return Matrix(1, 2, {2.0 * x[0], -2.0 * x[1]}); }});
    p.flat_minima = plus_minus({1.0, 1.0});
    p.level_set = LevelSetModel({exponential_branch({1, 1}, {1, -1}, {-4, 4}),
                                 exponential_branch({-1, -1}, {1, -1}, {-4, 4})});
    p.admissible_init = [](std::span<const double> x, double m) {
        return std::abs(x[0] * x[1] - 1.0) >= m && std::abs(x[0] * x[0] - x[1] * x[1]) >= m;
    };
    return p;
}

ProblemSpec quartic_y4() {
    ProblemSpec p;
    p.name = "quartic_y4";
    p.formula = "x2^2 + x1^2*x2^4";
    p.dim = 2;
    p.objective = [](std::span<const double> x) { return sqr(x[1]) + sqr(x[0]) * std::pow(x[1], 4); };
    p.gradient = [](std::span<const double> x) {
        const double y3 = x[1] * x[1] * x[1];
        return Vector{2.0 * x[0] * y3 * x[1], 2.0 * x[1] + 4.0 * x[0] * x[0] * y3};
    };
    p.kink_membership = [](std::span<const double>, double) { return false; };
    p.subgradient_generators = [g = p.gradient](std::span<const double> x, double) {
        return std::vector<Vector>{g(x)};
    };
    // grad f / |grad f| -> (0, sgn y) as y -> 0
    p.limit_directions = [](std::span<const double>) { return std::vector<Vector>{{0.0, -1.0}, {0.0, 1.0}}; };
    p.regularizer = RegularizerSpec{"|x1|",
                                    [](std::span<const double> x) { return std::abs(x[0]); },
                                    [](std::span<const double> x) { return Vector{sign_of(x[0]), 0.0}; },
                                    [](std::span<const double>) { return true; },
                                    4.0, 2, {}};
    p.flat_minima = {{0.0, 0.0}};
    p.sampling_box = box(2, -3.0, 3.0);
    p.flow_box = box(2, -1.5, 1.5);
    p.admissible_init = [](std::span<const double> x, double m) { return std::abs(x[1]) >= m; };
    p.level_set = LevelSetModel(
        {{{-5.0, 5.0}, [](double t) { return Vector{t, 0.0}; }, [](double) { return Vector{1.0, 0.0}; }}},
        [](std::span<const double> x) { return std::abs(x[1]); });
    return p;
}

ProblemSpec parabola() {
    ProblemSpec p = squared_residual(
        "parabola", "(x1^2 - x2)^2", 2, [](std::span<const double> x) { return x[0] * x[0] - x[1]; },
        [](std::span<const double> x) { return Vector{2.0 * x[0], -1.0}; });
    p.regularizer = RegularizerSpec{
        "x1^2*exp(4*x2)",
        [](std::span<const double> x) { return x[0] * x[0] * std::exp(4.0 * x[1]); },
        [](std::span<const double> x) {
            const double e = std::exp(4.0 * x[1]);
            return Vector{2.0 * x[0] * e, 4.0 * x[0] * x[0] * e};
        },
        [](std::span<const double>) { return true; },
        2.0, 1, {}};
    p.conserved.push_back({"x1*exp(2*x2)",
                           [](std::span<const double> x) { return Vector{x[0] * std::exp(2.0 * x[1])}; },
                           [](std::span<const double> x) {
                               const double e = std::exp(2.0 * x[1]);
                               return Matrix(1, 2, {e, 2.0 * x[0] * e});
                           }});
    p.flat_minima = {{0.0, 0.0}};
    p.sampling_box = box(2, -2.0, 2.0);
    p.level_set = LevelSetModel(
        {{{-4.0, 4.0}, [](double t) { return Vector{t, t * t}; }, [](double t) { return Vector{1.0, 2.0 * t}; }}});
    return p;
}

ProblemSpec cubic() {
    ProblemSpec p = squared_residual(
        "cubic", "(x1^3 - x2^3 - 1)^2", 2,
        [](std::span<const double> x) { return x[0] * x[0] * x[0] - x[1] * x[1] * x[1] - 1.0; },
        [](std::span<const double> x) { return Vector{3.0 * x[0] * x[0], -3.0 * x[1] * x[1]}; });
    // g = exp(-sgn(x1+x2)(1/x1 + 1/x2)) = exp(-|x1+x2|/(x1 x2)), extended by 0 on the axes
    auto exponent = [](std::span<const double> x) { return -std::abs(x[0] + x[1]) / (x[0] * x[1]); };
    p.regularizer = RegularizerSpec{
        "exp(-sgn(x1+x2)*(1/x1 + 1/x2)), 0 on x1*x2 = 0",
        [exponent](std::span<const double> x) {
            if (x[0] == 0.0 || x[1] == 0.0) return 0.0;
            return std::exp(std::clamp(exponent(x), -700.0, 700.0));
        },
        [exponent](std::span<const double> x) {
            if (x[0] == 0.0 || x[1] == 0.0) return Vector{0.0, 0.0};
            const double g = std::exp(std::clamp(exponent(x), -700.0, 700.0));
            const double s = x[0] + x[1] >= 0 ? 1.0 : -1.0;
            return Vector{s * g / (x[0] * x[0]), s * g / (x[1] * x[1])};
        },
        [](std::span<const double>) { return true; },
        2.0, 1,
        [exponent](std::span<const double> x) {
            return x[0] != 0.0 && x[1] != 0.0 && std::abs(exponent(x)) > 700.0;
        }};
    p.conserved.push_back({"-1/x1 - 1/x2",
                           [](std::span<const double> x) { return Vector{-1.0 / x[0] - 1.0 / x[1]}; },
                           [](std::span<const double> x) {
                               return Matrix(1, 2, {1.0 / (x[0] * x[0]), 1.0 / (x[1] * x[1])});
                           }});
    p.flat_minima = {{std::pow(2.0, -1.0 / 3.0), -std::pow(2.0, -1.0 / 3.0)}};
    p.sampling_box = {{0.05, 2.0}, {-2.0, -0.05}};
    p.flow_box = {{0.2, 1.5}, {-1.5, -0.2}};
    p.admissible_init = [r = p.admissible_init](std::span<const double> x, double m) {
        return r(x, m) && std::abs(x[0]) >= m && std::abs(x[1]) >= m;
    };
    p.level_set = LevelSetModel({{{-3.0, 3.0}, [](double t) { return Vector{t, std::cbrt(t * t * t - 1.0)}; },
                                  [](double t) {
                                      const double y = std::cbrt(t * t * t - 1.0);
                                      return Vector{y * y, t * t};
                                  }}});
    return p;
}

ProblemSpec conic(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || a == 0.0 || b == 0.0 || a == b || (a < 0 && b < 0))
        throw Error(ErrorKind::invalid_parameter,
                    "conic(a,b) needs nonzero a != b, not both negative; got a=" + num(a) + ", b=" + num(b));
    const bool y_flat = (a > b && b > 0) || (a < 0 && b > 0);  // flat minima on the x2 axis
    ProblemSpec p = squared_residual(
        "conic", "(a*x1^2 + b*x2^2 - 1)^2", 2,
        [a, b](std::span<const double> x) { return a * x[0] * x[0] + b * x[1] * x[1] - 1.0; },
        [a, b](std::span<const double> x) { return Vector{2.0 * a * x[0], 2.0 * b * x[1]}; });
    p.parameters = {{"a", num(a)}, {"b", num(b)}};

    // The conserved ratio |x|^b/|y|^a when the flat minima sit on the y axis;
    // the roles of the coordinates swap otherwise.
    const std::size_t num_i = y_flat ? 0 : 1, den_i = y_flat ? 1 : 0;
    const double num_e = y_flat ? b : a, den_e = y_flat ? a : b;
    auto ratio = [=](std::span<const double> x) {
        if (x[den_i] == 0.0) return kInf;
        return std::pow(std::abs(x[num_i]), num_e) / std::pow(std::abs(x[den_i]), den_e);
    };
    auto ratio_grad = [=](std::span<const double> x) {
        Vector g(2, 0.0);
        const double xn = x[num_i], xd = x[den_i];
        if (xd == 0.0) return Vector{kInf, kInf};
        const double an = std::abs(xn), ad = std::abs(xd);
        g[num_i] = xn == 0.0 ? 0.0 : num_e * sign_of(xn) * std::pow(an, num_e - 1.0) / std::pow(ad, den_e);
        g[den_i] = -den_e * sign_of(xd) * std::pow(an, num_e) / std::pow(ad, den_e + 1.0);
        return g;
    };
    const std::string label = y_flat ? "|x1|^b/|x2|^a" : "|x2|^a/|x1|^b";
    p.regularizer = RegularizerSpec{label, ratio, ratio_grad,
                                    [den_i](std::span<const double> x) { return x[den_i] != 0.0; }, 2.0, 1, {}};
    p.conserved.push_back({label, [ratio](std::span<const double> x) { return Vector{ratio(x)}; },
                           [ratio_grad](std::span<const double> x) {
                               const Vector g = ratio_grad(x);
                               return Matrix(1, 2, {g[0], g[1]});
                           }});
    if (y_flat)
        p.flat_minima = plus_minus({0.0, 1.0 / std::sqrt(b)});
    else
        p.flat_minima = plus_minus({1.0 / std::sqrt(a), 0.0});
    p.admissible_init = [r = p.admissible_init](std::span<const double> x, double m) {
        return r(x, m) && std::abs(x[0]) >= m && std::abs(x[1]) >= m;
    };

    std::vector<LevelSetBranch> branches;
    if (a > 0 && b > 0) {
        const double sa = 1.0 / std::sqrt(a), sb = 1.0 / std::sqrt(b);
        branches.push_back({{-kPi, kPi}, [=](double t) { return Vector{sa * std::cos(t), sb * std::sin(t)}; },
                            [=](double t) { return Vector{-sa * std::sin(t), sb * std::cos(t)}; }});
    } else {
        // solve for the coordinate whose coefficient is positive
        const std::size_t free_i = a > 0 ? 1 : 0, solved_i = a > 0 ? 0 : 1;
        const double cf = a > 0 ? b : a, cs = a > 0 ? a : b;
        for (double s : {1.0, -1.0}) {
            branches.push_back({{-5.0, 5.0},
                                [=](double t) {
                                    Vector v(2);
                                    v[free_i] = t;
                                    v[solved_i] = s * std::sqrt((1.0 - cf * t * t) / cs);
                                    return v;
                                },
                                [=](double t) {
                                    Vector v(2);
                                    const double xs = s * std::sqrt((1.0 - cf * t * t) / cs);
                                    v[free_i] = xs;
                                    v[solved_i] = -cf * t / cs;
                                    return v;
                                }});
        }
    }
    p.level_set = LevelSetModel(std::move(branches));
    return p;
}

ProblemSpec quadric(std::vector<double> a) {
    const std::size_t n = a.size();
    if (n < 2) throw Error(ErrorKind::invalid_parameter, "quadric needs at least two coefficients");
    double m = kInf;
    for (double ai : a) {
        if (!std::isfinite(ai)) throw Error(ErrorKind::invalid_parameter, "quadric coefficients must be finite");
        if (ai > 0) m = std::min(m, ai);
    }
    if (!std::isfinite(m)) throw Error(ErrorKind::invalid_parameter, "quadric needs a positive coefficient");
    std::vector<std::size_t> in_i, out_i;
    for (std::size_t i = 0; i < n; ++i) (a[i] == m ? in_i : out_i).push_back(i);

    ProblemSpec p = squared_residual(
        "quadric", "(sum_i a_i*x_i^2 - 1)^2 / 2", n,
        [a](std::span<const double> x) {
            double s = -1.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i] * x[i];
            return s;
        },
        [a](std::span<const double> x) {
            Vector g(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * a[i] * x[i];
            return g;
        },
        0.5);
    p.parameters = {{"a", join(a)}};

    // C_i = |x_i| / |x_I|^(a_i/m) with I the indices of the smallest positive coefficient
    auto sub_norm = [in_i](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i : in_i) s += x[i] * x[i];
        return std::sqrt(s);
    };
    auto cvalue = [a, m, sub_norm](std::span<const double> x) {
        const double r = sub_norm(x);
        Vector c(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) c[i] = r == 0.0 ? kInf : std::abs(x[i]) / std::pow(r, a[i] / m);
        return c;
    };
    auto cjac = [a, m, in_i, sub_norm](std::span<const double> x) {
        const std::size_t n = a.size();
        const double r = sub_norm(x);
        Matrix j(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = a[i] / m;
            const double re = std::pow(r, e);
            j(i, i) += sign_of(x[i]) / re;
            for (std::size_t k : in_i) j(i, k) += -e * std::abs(x[i]) * x[k] / (re * r * r);
        }
        return j;
    };
    p.conserved.push_back({"|x_i|/|x_I|^(a_i/min a+)", cvalue, cjac});
    p.regularizer = RegularizerSpec{
        "sum over i outside I of |x_i|/|x_I|^(a_i/min a+)",
        [cvalue, out_i](std::span<const double> x) {
            const Vector c = cvalue(x);
            double s = 0.0;
            for (std::size_t i : out_i) s += c[i];
            return s;
        },
        [cjac, out_i, n](std::span<const double> x) {
            const Matrix j = cjac(x);
            Vector g(n, 0.0);
            for (std::size_t i : out_i)
                for (std::size_t k = 0; k < n; ++k) g[k] += j(i, k);
            return g;
        },
        [sub_norm](std::span<const double> x) { return sub_norm(x) > 0.0; },
        2.0, 1, {}};
    Vector e(n, 0.0);
    e[in_i.front()] = 1.0 / std::sqrt(m);
    p.flat_minima = plus_minus(e);
    p.admissible_init = [r = p.admissible_init](std::span<const double> x, double margin) {
        return r(x, margin) && std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v) >= margin; });
    };
    return p;
}

ProblemSpec monomial(std::vector<int> exponents) {
    const std::size_t n = exponents.size();
    if (n < 2) throw Error(ErrorKind::invalid_parameter, "monomial needs at least two exponents");
    if (n > 16) throw Error(ErrorKind::invalid_parameter, "monomial supports at most 16 variables");
    for (int e : exponents)
        if (e < 1) throw Error(ErrorKind::invalid_parameter, "monomial exponents must be positive integers");
    const Vector ups(exponents.begin(), exponents.end());

    auto product = [ups](std::span<const double> x) {
        double s = 1.0;
        for (std::size_t i = 0; i < ups.size(); ++i) s *= std::pow(x[i], ups[i]);
        return s;
    };
    ProblemSpec p = squared_residual(
        "monomial", "(x^v - 1)^2", n, [product](std::span<const double> x) { return product(x) - 1.0; },
        [ups](std::span<const double> x) {
            Vector g(ups.size());
            for (std::size_t i = 0; i < ups.size(); ++i) {
                double s = ups[i] * std::pow(x[i], ups[i] - 1.0);
                for (std::size_t j = 0; j < ups.size(); ++j)
                    if (j != i) s *= std::pow(x[j], ups[j]);
                g[i] = s;
            }
            return g;
        });
    p.parameters = {{"v", join(ups)}};

    // C_i = v_n x_i^2 - v_i x_n^2, i < n
    auto cvalue = [ups](std::span<const double> x) {
        const std::size_t last = ups.size() - 1;
        Vector c(last);
        for (std::size_t i = 0; i < last; ++i) c[i] = ups[last] * x[i] * x[i] - ups[i] * x[last] * x[last];
        return c;
    };
    auto cjac = [ups](std::span<const double> x) {
        const std::size_t last = ups.size() - 1;
        Matrix j(last, ups.size());
        for (std::size_t i = 0; i < last; ++i) {
            j(i, i) = 2.0 * ups[last] * x[i];
            j(i, last) = -2.0 * ups[i] * x[last];
        }
        return j;
    };
    p.conserved.push_back({"v_n*x_i^2 - v_i*x_n^2", cvalue, cjac});
    p.regularizer = RegularizerSpec{"|C(x)|^2/4",
                                    [cvalue](std::span<const double> x) {
                                        const Vector c = cvalue(x);
                                        return dot(c, c) / 4.0;
                                    },
                                    [cvalue, cjac](std::span<const double> x) {
                                        return scaled(cjac(x).transpose() * cvalue(x), 0.5);
                                    },
                                    [](std::span<const double>) { return true; },
                                    2.0, 1, {}};

    const double total = std::accumulate(ups.begin(), ups.end(), 0.0);
    double log_den = 0.0;
    for (double u : ups) log_den += u * std::log(u);
    const double den = std::exp(log_den / (2.0 * total));
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        Vector z(n);
        int parity = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool neg = (mask >> (n - 1 - i)) & 1U;
            z[i] = (neg ? -1.0 : 1.0) * std::sqrt(ups[i]) / den;
            if (neg) parity += exponents[i];
        }
        if (parity % 2 == 0) p.flat_minima.push_back(z);
    }
    p.admissible_init = [product](std::span<const double> x, double m) {
        const double v = product(x);
        return v >= m && std::abs(v - 1.0) >= m;
    };
    if (n == 2) {
        std::vector<LevelSetBranch> branches;
        for (double s0 : {1.0, -1.0})
            for (double s1 : {1.0, -1.0}) {
                const bool on_set = std::pow(s0, ups[0]) * std::pow(s1, ups[1]) > 0;
                if (on_set) branches.push_back(exponential_branch({s0, s1}, {1.0, -ups[0] / ups[1]}, {-4, 4}));
            }
        p.level_set = LevelSetModel(std::move(branches));
    }
    return p;
}

ProblemSpec abs_3d() {
    ProblemSpec p;
    p.name = "abs_3d";
    p.formula = "|x1*x3| + |x2*x3 - 1|";
    p.dim = 3;
    p.objective = [](std::span<const double> x) { return std::abs(x[0] * x[2]) + std::abs(x[1] * x[2] - 1.0); };
    auto combine = [](std::span<const double> x, double l1, double l2) {
        return Vector{l1 * x[2], l2 * x[2], l1 * x[0] + l2 * x[1]};
    };
    p.gradient = [combine](std::span<const double> x) {
        return combine(x, sign_of(x[0] * x[2]), sign_of(x[1] * x[2] - 1.0));
    };
    p.kink_membership = [](std::span<const double> x, double tol) {
        return std::abs(x[0] * x[2]) <= tol || std::abs(x[1] * x[2] - 1.0) <= tol;
    };
    p.subgradient_generators = [combine](std::span<const double> x, double tol) {
        auto signs = [tol](double r) {
            return std::abs(r) <= tol ? std::vector<double>{-1.0, 1.0} : std::vector<double>{sign_of(r)};
        };
        std::vector<Vector> out;
        for (double l1 : signs(x[0] * x[2]))
            for (double l2 : signs(x[1] * x[2] - 1.0)) out.push_back(combine(x, l1, l2));
        return out;
    };
    p.smooth_piece = [](std::span<const double> x) {
        return static_cast<long>(x[0] * x[2] > 0) + 2L * static_cast<long>(x[1] * x[2] - 1.0 > 0);
    };
    const double c_flat = std::sqrt(2.0) / 2.0;
    auto cq = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1] - x[2] * x[2]; };
    p.regularizer = RegularizerSpec{"(x1^2 + x2^2 - x3^2 - sqrt(2)/2)^2/4",
                                    [=](std::span<const double> x) { return sqr(cq(x) - c_flat) / 4.0; },
                                    [=](std::span<const double> x) {
                                        const double d = cq(x) - c_flat;
                                        return Vector{d * x[0], d * x[1], -d * x[2]};
                                    },
                                    [](std::span<const double>) { return true; },
                                    2.0, 1, {}};
    p.conserved.push_back({"x1^2 + x2^2 - x3^2", [cq](std::span<const double> x) { return Vector{cq(x)}; },
                           [](std::span<const double> x) {
                               return Matrix(1, 3, {2.0 * x[0], 2.0 * x[1], -2.0 * x[2]});
                           }});
    const double t = std::pow(2.0, 0.25);
    p.flat_minima = plus_minus({0.0, t, 1.0 / t});
    p.sampling_box = box(3, -3.0, 3.0);
    p.flow_box = box(3, -1.5, 1.5);
    p.admissible_init = [](std::span<const double> x, double m) {
        return std::abs(x[0] * x[2]) >= m && std::abs(x[1] * x[2] - 1.0) >= m;
    };
    p.level_set = LevelSetModel({exponential_branch({0, 1, 1}, {0, 1, -1}, {-3, 3}),
                                 exponential_branch({0, -1, -1}, {0, 1, -1}, {-3, 3})});
    p.lipschitz_modulus = [](std::span<const double> x) {
        return std::sqrt(2.0 * x[2] * x[2] + sqr(std::abs(x[0]) + std::abs(x[1])));
    };
    return p;
}

namespace {

// max over Lambda in {-1,1}^{m x n} of |(Lambda v / t, Lambda^T u t)|
double rank1_lip_on_solution_set(const Vector& u, const Vector& v, double t) {
    const std::size_t m = u.size(), n = v.size();
    double best = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << (m * n)); ++mask) {
        double s = 0.0;
        Vector col(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double l = (mask >> (i * n + j)) & 1U ? 1.0 : -1.0;
                r += l * v[j] / t;
                col[j] += l * u[i] * t;
            }
            s += r * r;
        }
        s += dot(col, col);
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

}  // namespace

ProblemSpec rank1_l1(Vector u, Vector v) {
    const std::size_t m = u.size(), n = v.size();
    if (m == 0 || n == 0 || m * n > 12)
        throw Error(ErrorKind::invalid_parameter, "rank1_l1 needs 1 <= m*n <= 12");
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += ((mask >> i) & 1U ? 1.0 : -1.0) * u[i];
        if (std::abs(s) < 1e-12) throw Error(ErrorKind::invalid_parameter, "rank1_l1 needs a^T u != 0 for all signs a");
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += ((mask >> j) & 1U ? 1.0 : -1.0) * v[j];
        if (std::abs(s) < 1e-12) throw Error(ErrorKind::invalid_parameter, "rank1_l1 needs v^T b != 0 for all signs b");
    }

    ProblemSpec p;
    p.name = "rank1_l1";
    p.formula = "||x y^T - u v^T||_1";
    p.dim = m + n;
    p.parameters = {{"u", join(u)}, {"v", join(v)}};
    auto residual = [u, v, m, n](std::span<const double> z, std::size_t i, std::size_t j) {
        return z[i] * z[m + j] - u[i] * v[j];
    };
    p.objective = [residual, m, n](std::span<const double> z) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) s += std::abs(residual(z, i, j));
        return s;
    };
    // (Lambda y, Lambda^T x) for a sign matrix Lambda
    auto combine = [m, n](std::span<const double> z, const std::vector<double>& lam) {
        Vector g(m + n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                g[i] += lam[i * n + j] * z[m + j];
                g[m + j] += lam[i * n + j] * z[i];
            }
        return g;
    };
    p.gradient = [=](std::span<const double> z) {
        std::vector<double> lam(m * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) lam[i * n + j] = sign_of(residual(z, i, j));
        return combine(z, lam);
    };
    p.kink_membership = [=](std::span<const double> z, double tol) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (std::abs(residual(z, i, j)) <= tol) return true;
        return false;
    };
    p.subgradient_generators = [=](std::span<const double> z, double tol) {
        std::vector<double> lam(m * n);
        std::vector<std::size_t> kinks;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double r = residual(z, i, j);
                if (std::abs(r) <= tol) kinks.push_back(i * n + j);
                lam[i * n + j] = sign_of(r);
            }
        std::vector<Vector> out;
        const std::size_t k = kinks.size();
        for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
            for (std::size_t b = 0; b < k; ++b) lam[kinks[b]] = (mask >> (k - 1 - b)) & 1U ? 1.0 : -1.0;
            out.push_back(combine(z, lam));
        }
        return out;
    };
    p.smooth_piece = [=](std::span<const double> z) {
        long id = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) id = 2 * id + (residual(z, i, j) > 0 ? 1 : 0);
        return id;
    };
    p.lipschitz_modulus = [gens = p.subgradient_generators](std::span<const double> z) {
        double best = 0.0;
        for (const Vector& g : gens(z, 1e-9)) best = std::max(best, norm(g));
        return best;
    };
    auto cq = [m](std::span<const double> z) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += (i < m ? 1.0 : -1.0) * z[i] * z[i];
        return s;
    };
    p.conserved.push_back({"|x|^2 - |y|^2", [cq](std::span<const double> z) { return Vector{cq(z)}; },
                           [m](std::span<const double> z) {
                               Matrix j(1, z.size());
                               for (std::size_t i = 0; i < z.size(); ++i) j(0, i) = (i < m ? 2.0 : -2.0) * z[i];
                               return j;
                           }});
    p.regularizer = RegularizerSpec{"(|x|^2 - |y|^2)^2/4",
                                    [cq](std::span<const double> z) { return sqr(cq(z)) / 4.0; },
                                    [cq, m](std::span<const double> z) {
                                        const double c = cq(z);
                                        Vector g(z.size());
                                        for (std::size_t i = 0; i < z.size(); ++i) g[i] = (i < m ? c : -c) * z[i];
                                        return g;
                                    },
                                    [](std::span<const double>) { return true; },
                                    2.0, 1, {}};

    // flat minima: minimize lip f along (u t, v / t) by golden section in log t
    auto lip_at = [&](double log_t) { return rank1_lip_on_solution_set(u, v, std::exp(log_t)); };
    double lo = -4.0, hi = 4.0;
    constexpr double kInvPhi = 0.6180339887498949;
    double c = hi - kInvPhi * (hi - lo), d = lo + kInvPhi * (hi - lo);
    double fc = lip_at(c), fd = lip_at(d);
    while (hi - lo > 1e-12) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - kInvPhi * (hi - lo);
            fc = lip_at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + kInvPhi * (hi - lo);
            fd = lip_at(d);
        }
    }
    const double t_flat = std::exp(0.5 * (lo + hi));
    Vector flat(m + n);
    for (std::size_t i = 0; i < m; ++i) flat[i] = u[i] * t_flat;
    for (std::size_t j = 0; j < n; ++j) flat[m + j] = v[j] / t_flat;
    p.flat_minima = plus_minus(flat);
    p.parameters["t_flat"] = num(t_flat);

    p.sampling_box = box(m + n, -3.0, 3.0);
    p.flow_box = box(m + n, -1.5, 1.5);
    p.admissible_init = [=](std::span<const double> z, double margin) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (std::abs(residual(z, i, j)) < margin) return false;
        return true;
    };
    Vector signs_pos(m + n), rates(m + n);
    for (std::size_t i = 0; i < m + n; ++i) {
        const double base = i < m ? u[i] : v[i - m];
        signs_pos[i] = base;
        rates[i] = i < m ? 1.0 : -1.0;
    }
    p.level_set = LevelSetModel({exponential_branch(signs_pos, rates, {-3, 3}),
                                 exponential_branch(scaled(signs_pos, -1.0), rates, {-3, 3})});
    return p;
}

namespace {

struct RowSpace {
    std::vector<Vector> basis;  // orthonormal basis of the row space of A
    Vector pseudo_solution;     // A^+ b
};

RowSpace row_space(const Matrix& a, std::span<const double> b) {
    const SvdResult s = svd_small(a);
    RowSpace out;
    out.pseudo_solution.assign(a.cols(), 0.0);
    const double tol = 1e-12 * std::max(s.sigma.front(), 1e-300) * static_cast<double>(std::max(a.rows(), a.cols()));
    for (std::size_t k = 0; k < s.sigma.size(); ++k) {
        if (s.sigma[k] <= tol) continue;
        const Vector vk = s.v.column(k);
        out.basis.push_back(vk);
        const double coef = dot(s.u.column(k), b) / s.sigma[k];
        out.pseudo_solution = axpy(out.pseudo_solution, coef, vk);
    }
    return out;
}

Vector kernel_projection(const std::vector<Vector>& row_basis, std::span<const double> x) {
    Vector out(x.begin(), x.end());
    for (const Vector& r : row_basis) out = axpy(out, -dot(r, x), r);
    return out;
}

}  // namespace

Vector least_squares_limit(const Matrix& a, std::span<const double> b, std::span<const double> x0) {
    if (b.size() != a.rows() || x0.size() != a.cols())
        throw Error(ErrorKind::invalid_parameter, "least_squares_limit shape mismatch");
    const RowSpace rs = row_space(a, b);
    return axpy(rs.pseudo_solution, 1.0, kernel_projection(rs.basis, x0));
}

ProblemSpec least_squares(Matrix a, Vector b) {
    if (a.rows() == 0 || a.cols() == 0 || b.size() != a.rows())
        throw Error(ErrorKind::invalid_parameter, "least_squares needs nonempty A and b with matching rows");
    const std::size_t n = a.cols();
    const RowSpace rs = row_space(a, b);
    ProblemSpec p;
    p.name = "least_squares";
    p.formula = "|A x - b|^2";
    p.dim = n;
    p.parameters = {{"rows", std::to_string(a.rows())},
                    {"cols", std::to_string(n)},
                    {"A", join(a.data())},
                    {"b", join(b)}};
    p.objective = [a, b](std::span<const double> x) {
        const Vector r = subtract(a * x, b);
        return dot(r, r);
    };
    const Matrix at = a.transpose();
    p.gradient = [a, at, b](std::span<const double> x) { return scaled(at * subtract(a * x, b), 2.0); };
    p.kink_membership = [](std::span<const double>, double) { return false; };
    p.subgradient_generators = [g = p.gradient](std::span<const double> x, double) {
        return std::vector<Vector>{g(x)};
    };
    p.conserved.push_back({"P_{Ker A}(x)",
                           [basis = rs.basis](std::span<const double> x) { return kernel_projection(basis, x); },
                           [basis = rs.basis, n](std::span<const double>) {
                               Matrix pk = Matrix::identity(n);
                               for (const Vector& r : basis)
                                   for (std::size_t i = 0; i < n; ++i)
                                       for (std::size_t j = 0; j < n; ++j) pk(i, j) -= r[i] * r[j];
                               return pk;
                           }});
    p.flat_minima = {rs.pseudo_solution};
    const Vector res = subtract(a * rs.pseudo_solution, b);
    p.min_value = dot(res, res);
    p.sampling_box = box(n, -3.0, 3.0);
    p.flow_box = box(n, -1.5, 1.5);
    p.admissible_init = [](std::span<const double>, double) { return true; };
    return p;
}

ProblemSpec least_squares_default() {
    Rng rng(3);
    Matrix a(4, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) a(i, j) = rng.normal();
    Vector b(4);
    for (double& v : b) v = rng.normal();
    return least_squares(std::move(a), std::move(b));
}

ProblemSpec matfac(Matrix target, std::size_t rank) {
    const std::size_t m = target.rows(), n = target.cols();
    if (m == 0 || n == 0 || rank == 0 || rank > std::min(m, n))
        throw Error(ErrorKind::invalid_parameter, "matfac needs 1 <= r <= min(rows, cols)");
    const std::size_t r = rank, nx = m * r, dim = nx + r * n;
    // z = (X row-major m x r, Y row-major r x n)
    auto unpack = [=](std::span<const double> z) {
        return std::pair{Matrix(m, r, Vector(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(nx))),
                         Matrix(r, n, Vector(z.begin() + static_cast<std::ptrdiff_t>(nx), z.end()))};
    };
    ProblemSpec p;
    p.name = "matfac";
    p.formula = "||X Y - M||_F^2";
    p.dim = dim;
    p.parameters = {{"rows", std::to_string(m)},
                    {"cols", std::to_string(n)},
                    {"M", join(target.data())},
                    {"r", std::to_string(r)}};
    p.objective = [=](std::span<const double> z) {
        const auto [x, y] = unpack(z);
        const Matrix e = x * y;
        double s = 0.0;
        for (std::size_t k = 0; k < e.data().size(); ++k) s += sqr(e.data()[k] - target.data()[k]);
        return s;
    };
    p.gradient = [=](std::span<const double> z) {
        const auto [x, y] = unpack(z);
        Matrix e = x * y;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) e(i, j) -= target(i, j);
        const Matrix gx = e * y.transpose();
        const Matrix gy = x.transpose() * e;
        Vector g;
        g.reserve(dim);
        for (double v : gx.data()) g.push_back(2.0 * v);
        for (double v : gy.data()) g.push_back(2.0 * v);
        return g;
    };
    p.kink_membership = [](std::span<const double>, double) { return false; };
    p.subgradient_generators = [g = p.gradient](std::span<const double> z, double) {
        return std::vector<Vector>{g(z)};
    };
    // upper triangle of X^T X - Y Y^T
    p.conserved.push_back({"X^T X - Y Y^T",
                           [=](std::span<const double> z) {
                               const auto [x, y] = unpack(z);
                               const Matrix c = x.transpose() * x;
                               const Matrix d = y * y.transpose();
                               Vector out;
                               for (std::size_t a = 0; a < r; ++a)
                                   for (std::size_t b = a; b < r; ++b) out.push_back(c(a, b) - d(a, b));
                               return out;
                           },
                           [=](std::span<const double> z) {
                               Matrix j(r * (r + 1) / 2, dim);
                               std::size_t row = 0;
                               for (std::size_t a = 0; a < r; ++a)
                                   for (std::size_t b = a; b < r; ++b, ++row) {
                                       for (std::size_t i = 0; i < m; ++i) {
                                           j(row, i * r + a) += z[i * r + b];
                                           j(row, i * r + b) += z[i * r + a];
                                       }
                                       for (std::size_t k = 0; k < n; ++k) {
                                           j(row, nx + a * n + k) -= z[nx + b * n + k];
                                           j(row, nx + b * n + k) -= z[nx + a * n + k];
                                       }
                                   }
                               return j;
                           }});
    // balanced factorization X = U sqrt(S), Y = sqrt(S) V^T
    const SvdResult s = svd_small(target);
    Vector flat(dim, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
        const double root = std::sqrt(s.sigma[k]);
        for (std::size_t i = 0; i < m; ++i) flat[i * r + k] = s.u(i, k) * root;
        for (std::size_t j = 0; j < n; ++j) flat[nx + k * n + j] = root * s.v(j, k);
    }
    p.flat_minima = {flat};
    p.min_value = std::max(0.0, p.objective(flat));
    p.sampling_box = box(dim, -2.0, 2.0);
    p.flow_box = box(dim, -1.0, 1.0);
    p.admissible_init = [](std::span<const double>, double) { return true; };
    return p;
}

ProblemSpec matfac_default() { return matfac(Matrix(2, 2, {2.0, 1.0, 1.0, 3.0}), 2); }

std::vector<std::string> catalog_names() {
    return {"hyperbola_xy", "quartic_y4", "parabola", "cubic",         "conic", "quadric",
            "monomial",     "abs_3d",     "rank1_l1", "least_squares", "matfac"};
}

ProblemSpec make_problem(const std::string& name) {
    if (name == "hyperbola_xy") return hyperbola_xy();
    if (name == "quartic_y4") return quartic_y4();
    if (name == "parabola") return parabola();
    if (name == "cubic") return cubic();
    if (name == "conic") return conic();
    if (name == "quadric") return quadric();
    if (name == "monomial") return monomial();
    if (name == "abs_3d") return abs_3d();
    if (name == "rank1_l1") return rank1_l1();
    if (name == "least_squares") return least_squares_default();
    if (name == "matfac") return matfac_default();
    throw Error(ErrorKind::invalid_parameter, "unknown problem '" + name + "'");
}

std::vector<ProblemSpec> catalog() {
    std::vector<ProblemSpec> out;
    for (const std::string& name : catalog_names()) out.push_back(make_problem(name));
    return out;
}

}  // namespace flatmin
