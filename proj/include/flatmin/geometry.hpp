#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "flatmin/numerics.hpp"
#include "flatmin/problems.hpp"

namespace flatmin {

/// sup over the closed r-ball of |f - f(x)|: Halton points in the ball, then
/// coordinate ascent from the five best candidates.
double oscillation(const ProblemSpec& p, std::span<const double> x, double r, std::size_t samples = 1000);

/// Oscillation over a radius grid; each entry also takes the maximum found at
/// smaller radii, so the profile is nondecreasing in r.
std::vector<double> oscillation_profile(const ProblemSpec& p, std::span<const double> x, std::span<const double> radii,
                                        std::size_t samples = 1000);

/// x is at least as flat as y on the grid: osc_x(r) <= osc_y(r)(1 + 1e-6) + 1e-12 for every r.
bool flatter_or_equal(std::span<const double> osc_x, std::span<const double> osc_y);

struct FlatnessPoint {
    std::size_t branch = 0;
    double t = 0.0;
    Vector point;
    double sharpness = 0.0;  ///< top Hessian eigenvalue or Lipschitz modulus
    double g = 0.0;          ///< regularizer value, NaN without one
    std::vector<double> oscillation;
    bool ok = true;
    std::string error;
};

struct FlatnessReport {
    std::string problem;
    std::string measure;  ///< "lambda1" or "lip"
    std::vector<double> radii;
    std::vector<FlatnessPoint> points;
    std::optional<std::size_t> argmin;
    std::optional<std::size_t> nearest_flat_minimum;
    double argmin_flat_distance = 0.0;
    /// preorder[i][j]: point i is at least as flat as point j; filled for at most 200 points
    std::vector<std::vector<bool>> preorder;
};

/// Sharpness (finite-difference top Hessian eigenvalue, or the analytic
/// Lipschitz modulus for nonsmooth problems) along one branch of the solution set.
FlatnessReport sharpness_profile(const ProblemSpec& p, std::size_t branch, std::span<const double> params,
                                 std::span<const double> radii = {}, std::size_t oscillation_samples = 500);

std::string flatness_csv(const FlatnessReport& report);
nlohmann::json to_json(const FlatnessReport& report);

struct ProjectionBoundReport {
    std::size_t samples = 0;
    std::vector<double> alpha_grid;
    double worst_slack = 0.0;  ///< min of d(x + alpha u, M) + d(x, M) - alpha/2
    Vector worst_point;
    double worst_alpha = 0.0;
    bool pass = false;
};

/// Samples points within `radius` of xbar and checks
/// d(x - alpha u, M) + d(x, M) >= alpha/2 for every normalized generator u.
ProjectionBoundReport projection_distance_bound_check(const ProblemSpec& p, std::span<const double> xbar,
                                                      std::span<const double> alpha_grid, std::size_t samples,
                                                      std::uint64_t seed, double radius = 0.05);

struct SubregularityReport {
    double tau = 0.0;       ///< d(x, M) ~ constant * dist(0, subdifferential)^tau
    double constant = 0.0;
    std::size_t samples = 0;
    double r_squared = 0.0;
};

/// Log-log regression of the distance to the solution set against the
/// minimal-norm subgradient over samples in annuli 1e-4 <= |x - xbar| <= 1e-1.
SubregularityReport subregularity_estimate(const ProblemSpec& p, std::span<const double> xbar, std::size_t samples,
                                           std::uint64_t seed);

/// max over normalized generators u at y of |P_T(u)| / d(y, M), T the tangent
/// line at the nearest solution point; 0 when y lies on M.
double normalized_projection_ratio(const ProblemSpec& p, std::span<const double> y);

struct NormalizedProjectionReport {
    std::vector<double> scales;
    std::vector<double> max_ratio;
    double worst_ratio = 0.0;
    double slope = 0.0;  ///< of log max_ratio against log scale
    bool bounded = false;
};

/// Ratio maxima on balls of radius 1e-1 .. 1e-4 around xbar; bounded when the
/// maxima do not grow faster than scale^-1/2 as the scale shrinks.
NormalizedProjectionReport normalized_projection_formula_check(const ProblemSpec& p, std::span<const double> xbar,
                                                               std::size_t samples, std::uint64_t seed);

nlohmann::json to_json(const ProjectionBoundReport& r);
nlohmann::json to_json(const SubregularityReport& r);
nlohmann::json to_json(const NormalizedProjectionReport& r);

}  // namespace flatmin
