#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flatmin/numerics.hpp"

namespace flatmin {

using Predicate = std::function<bool(std::span<const double>)>;
using TolerancePredicate = std::function<bool(std::span<const double>, double)>;
using GeneratorOracle = std::function<std::vector<Vector>(std::span<const double>, double)>;
using DirectionOracle = std::function<std::vector<Vector>(std::span<const double>)>;
using JacobianOracle = std::function<Matrix(std::span<const double>)>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double t) const noexcept { return lo <= t && t <= hi; }
};

struct RegularizerSpec {
    std::string formula;
    ScalarField value;      ///< may return +inf off its domain
    VectorField gradient;   ///< valid off the regularizer's own singular set
    Predicate in_domain;    ///< value < inf
    double claimed_p = 2.0;
    int claimed_q = 1;
    Predicate saturated;    ///< optional: evaluation clamped an exponent
};

struct ConservedQuantity {
    std::string label;
    VectorField value;
    JacobianOracle jacobian;  ///< optional; one row per component
};

/// One smooth branch t -> point(t) of a one-dimensional solution set.
struct LevelSetBranch {
    Interval params;
    std::function<Vector(double)> point;
    std::function<Vector(double)> tangent;  ///< nonzero, parallel to d point / dt
};

struct LevelSetProjection {
    std::size_t branch = 0;
    double t = 0.0;
    Vector foot;
    double distance = 0.0;
};

/// Solution set [f = min f] described as a union of parametrized curves.
class LevelSetModel {
public:
    LevelSetModel() = default;
    explicit LevelSetModel(std::vector<LevelSetBranch> branches,
                           std::function<double(std::span<const double>)> analytic_distance = {});

    const std::vector<LevelSetBranch>& branches() const noexcept { return branches_; }
    Vector point(std::size_t branch, double t) const;
    /// Unit tangent at the parametrized point.
    Vector unit_tangent(std::size_t branch, double t) const;
    std::vector<Vector> tangent_basis(std::size_t branch, double t) const;

    /// Nearest point over the parameter boxes: grid scan, golden section,
    /// then secant refinement of the orthogonality condition.
    LevelSetProjection project(std::span<const double> x) const;
    /// Analytic distance when the problem supplies one, else project().distance.
    double distance_to(std::span<const double> x) const;
    bool has_analytic_distance() const noexcept { return static_cast<bool>(analytic_distance_); }

private:
    std::vector<LevelSetBranch> branches_;
    std::function<double(std::span<const double>)> analytic_distance_;
};

struct ProblemSpec {
    std::string name;
    std::string formula;
    std::size_t dim = 0;
    ScalarField objective;
    VectorField gradient;
    TolerancePredicate kink_membership;
    GeneratorOracle subgradient_generators;
    /// Limits of grad f / |grad f| at points where the gradient vanishes on
    /// the solution set; absent when the problem does not know them.
    DirectionOracle limit_directions;
    /// Identifier of the smooth piece containing x; absent for smooth f.
    std::function<long(std::span<const double>)> smooth_piece;
    std::optional<RegularizerSpec> regularizer;
    std::vector<ConservedQuantity> conserved;
    std::vector<Vector> flat_minima;
    double min_value = 0.0;
    std::vector<Interval> sampling_box;
    std::vector<Interval> flow_box;
    /// Initialization filter given a margin around singular sets.
    TolerancePredicate admissible_init;
    std::optional<LevelSetModel> level_set;
    ScalarField lipschitz_modulus;  ///< nonsmooth problems only
    std::map<std::string, std::string> parameters;

    bool smooth() const noexcept { return !static_cast<bool>(smooth_piece); }
};

using ProblemPtr = std::shared_ptr<const ProblemSpec>;

// Catalog factories. Each throws invalid_parameter for unusable parameters.
ProblemSpec hyperbola_xy();
ProblemSpec quartic_y4();
ProblemSpec parabola();
ProblemSpec cubic();
ProblemSpec conic(double a = 2.0, double b = 1.0);
ProblemSpec quadric(std::vector<double> a = {1.0, 2.0, 3.0});
ProblemSpec monomial(std::vector<int> exponents = {1, 2});
ProblemSpec abs_3d();
ProblemSpec rank1_l1(Vector u = {1.0, 2.0}, Vector v = {1.0, 3.0});
ProblemSpec least_squares(Matrix a, Vector b);
ProblemSpec least_squares_default();
ProblemSpec matfac(Matrix m, std::size_t rank);
ProblemSpec matfac_default();

std::vector<ProblemSpec> catalog();
std::vector<std::string> catalog_names();

/// Lookup by catalog name with default parameters.
ProblemSpec make_problem(const std::string& name);

/// A^+ b + P_{Ker A}(x0): the limit of gradient descent on |Ax-b|^2 from x0.
Vector least_squares_limit(const Matrix& a, std::span<const double> b, std::span<const double> x0);

enum class SelectionRule { uniform_random, lexicographic_first };

struct SelectionOptions {
    double kink_tol = 1e-9;
    double grad_floor = 1e-12;
    /// Use ProblemSpec::limit_directions where the gradient falls below the
    /// floor instead of reporting a critical point.
    bool use_limit_directions = false;
};

struct Selection {
    Vector direction;  ///< unit norm, or zero when critical
    std::string tag;   ///< "smooth", "kink:i/n", "limit:i/n" or "critical"
    bool critical = false;
};

/// One element of the normalized subdifferential at x.
Selection subgradient_select(const ProblemSpec& p, std::span<const double> x, SelectionRule rule, Rng& rng,
                             const SelectionOptions& options = {});

/// All normalized generators at x (the Bouligand set at kinks, the normalized
/// gradient or its limits otherwise). Zero generators are dropped.
std::vector<Vector> normalized_generators(const ProblemSpec& p, std::span<const double> x,
                                          const SelectionOptions& options = {});

/// f~(x) = f(Ux) with every oracle transformed accordingly.
ProblemSpec change_of_variables(const ProblemSpec& p, const Matrix& u);

std::string to_string(SelectionRule rule);
SelectionRule selection_rule_from_string(const std::string& name);

}  // namespace flatmin
