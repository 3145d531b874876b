#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "flatmin/dynamics.hpp"
#include "flatmin/numerics.hpp"
#include "flatmin/problems.hpp"

namespace flatmin {

/// 0.1 * 2^-j for j = 0..10, descending.
std::vector<double> default_alpha_grid();

struct DLyapunovOptions {
    std::optional<double> claimed_p;  ///< defaults to the regularizer's claim
    SelectionOptions selection{1e-9, 1e-12, true};
};

struct DLyapunovReport {
    std::string problem;
    Vector center;
    double radius = 0.0;
    std::size_t steps = 1;  ///< q
    std::vector<double> alpha_grid;
    std::size_t samples_per_alpha = 0;
    std::size_t skipped_samples = 0;  ///< g infinite at the sample
    double claimed_p = 0.0;
    std::vector<double> worst_decrease;  ///< max over samples of g(x+) - g(x)
    std::vector<double> worst_ratio;     ///< worst_decrease / alpha^claimed_p
    std::vector<bool> resolved;          ///< decrease above the roundoff floor
    double fitted_p = 0.0;
    double fitted_omega = 0.0;
    std::optional<double> alpha_bar;  ///< largest grid alpha below which the decrease holds
    bool pass = false;
    std::vector<std::string> notes;
};

/// Worst-case one-step decrease of the regularizer over a ball of sampled
/// starting points, all generator selections at kinks.
DLyapunovReport check_dlyapunov(const ProblemSpec& p, std::span<const double> center, double radius,
                                std::span<const double> alpha_grid, std::size_t samples, std::uint64_t seed,
                                const DLyapunovOptions& options = {});

/// Same as check_dlyapunov over q consecutive steps of constant length.
DLyapunovReport check_dlyapunov_multistep(const ProblemSpec& p, std::span<const double> center, double radius,
                                          std::span<const double> alpha_grid, std::size_t samples, std::size_t q,
                                          std::uint64_t seed, const DLyapunovOptions& options = {});

struct QuantityDrift {
    std::string label;
    double drift = 0.0;       ///< max relative drift at dt
    double drift_half = 0.0;  ///< max relative drift at dt/2
    double halving_ratio = 0.0;
    double ngd_drift = 0.0;   ///< discrete analog along NGD runs
    bool pass = false;
};

struct ConservationReport {
    std::string problem;
    std::size_t trials = 0;
    std::size_t used = 0;
    std::size_t skipped = 0;  ///< flows that failed to start or integrate
    std::size_t truncated = 0;  ///< flows that stopped at a kink or piece change
    double horizon = 0.0;
    double dt = 0.0;
    double drift_tol = 1e-6;
    double ngd_sum_alpha_sq = 0.0;
    std::size_t ngd_steps = 0;
    std::vector<QuantityDrift> quantities;
    bool pass = false;
};

/// Relative drift |C(x_t) - C(x_0)| / max(|C(x_0)|, 1) of every conserved quantity
/// along seeded RK4 flows, at dt and dt/2.
ConservationReport check_conservation(const ProblemSpec& p, std::size_t trials, double horizon, double dt,
                                      std::uint64_t seed);

struct RegularizerHypothesesReport {
    std::string problem;
    std::size_t descent_samples = 0;
    std::size_t curvature_samples = 0;
    double descent_margin = 0.0;    ///< min of <grad g, v> / |grad g| over generators v
    double curvature_margin = 0.0;  ///< max of <H_g u, u> / max(g, |H_g|) on the solution set
    Vector worst_descent_point;
    Vector worst_curvature_point;
    double exclusion_radius = 0.05;
    bool descent_holds = false;
    bool curvature_holds = false;
    bool pass = false;
};

/// Samples the two regularizer hypotheses of the attractor theorem: g is
/// nonincreasing along every generator, and strictly concave along the
/// normalized generators on the solution set away from the flat minima.
RegularizerHypothesesReport check_regularizer_hypotheses(const ProblemSpec& p, std::size_t sample_count,
                                                         std::uint64_t seed);

struct StationarityLevel {
    double radius = 0.0;
    std::size_t smooth_samples = 0;
    std::size_t clusters = 0;
    double hull_distance = 0.0;
};

struct StationarityReport {
    Vector point;
    std::size_t generator_count = 0;
    double hull_distance = 0.0;
    double tol = 0.0;
    bool is_critical = false;
    std::vector<StationarityLevel> levels;
    std::vector<Vector> generators;  ///< cluster centers at the decisive radius
};

/// Clusters normalized gradients sampled on shrinking balls and tests whether
/// 0 lies in their convex hull; the smallest radius decides.
StationarityReport fermat_check(const ProblemSpec& p, std::span<const double> x,
                                std::span<const double> radii = std::vector<double>{1e-2, 1e-4, 1e-6},
                                std::size_t samples = 400, double tol = 1e-3, std::uint64_t seed = 0);

struct SpanReport {
    std::size_t rank = 0;
    std::size_t dim = 0;
    std::vector<double> singular_values;
    std::size_t generator_count = 0;
    bool passes = false;
};

/// Rank of [normalized generators | rows of C'(xbar)] with threshold 1e-8 * sigma_1.
SpanReport strict_minimum_span_check(const ProblemSpec& p, std::span<const double> xbar, std::uint64_t seed = 0);

nlohmann::json to_json(const DLyapunovReport& r);
nlohmann::json to_json(const ConservationReport& r);
nlohmann::json to_json(const RegularizerHypothesesReport& r);
nlohmann::json to_json(const StationarityReport& r);
nlohmann::json to_json(const SpanReport& r);

}  // namespace flatmin
