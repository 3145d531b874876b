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

/// alpha_k = beta / (k+1)^(1/gamma); gamma = inf gives the constant schedule.
class StepSchedule {
public:
    enum class Kind { power, constant };

    static StepSchedule power(double beta, double gamma);
    static StepSchedule constant(double beta);

    Kind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }
    double gamma() const noexcept { return gamma_; }
    double operator()(std::size_t k) const;
    std::string describe() const;

private:
    StepSchedule(Kind kind, double beta, double gamma) : kind_(kind), beta_(beta), gamma_(gamma) {}

    Kind kind_;
    double beta_;
    double gamma_;
};

struct StepResult {
    Vector x;
    std::string tag;
    bool critical = false;
};

/// x - alpha * u for one element u of the normalized subdifferential.
StepResult ngd_step(const ProblemSpec& p, std::span<const double> x, double alpha, SelectionRule rule, Rng& rng,
                    const SelectionOptions& options = {});

enum class RunStatus { max_iters, critical, diverged, converged_to_target, evaluation_error };

std::string to_string(RunStatus status);

struct TrajectoryRow {
    std::size_t k = 0;
    Vector x;
    double f = 0.0;
    double g = 0.0;  ///< regularizer value, NaN without one, may be +inf
    double grad_norm = 0.0;
    double alpha = 0.0;
    std::string tag;
};

struct RunConfig {
    ProblemPtr problem;
    StepSchedule schedule = StepSchedule::power(0.4, 4.0);
    std::size_t max_iters = 20000;
    std::uint64_t seed = 0;
    std::optional<Vector> init;  ///< box-uniform over admissible points when absent
    double init_margin = 0.05;
    std::vector<Vector> targets;  ///< defaults to the problem's flat minima
    double target_radius = 1e-2;
    std::size_t dwell = 200;
    bool stop_at_target = true;
    std::optional<double> divergence_radius;  ///< default 1e3 * (1 + |x0|)
    SelectionRule rule = SelectionRule::uniform_random;
    SelectionOptions selection{1e-9, 1e-12, true};
    bool record_rows = true;
};

struct TrajectoryRecord {
    std::string problem;
    std::string method;  ///< "ngd" or "gd"
    std::string schedule;
    std::uint64_t seed = 0;
    Vector init;
    std::vector<TrajectoryRow> rows;
    RunStatus status = RunStatus::max_iters;
    std::string message;
    Vector terminal;
    std::size_t iterations = 0;
    std::optional<std::size_t> nearest_target;
    double target_distance = 0.0;
    double target_radius = 0.0;

    /// Terminal point within the target radius of some target.
    bool captured() const noexcept { return nearest_target.has_value() && target_distance <= target_radius; }
};

/// Box-uniform initial point satisfying the problem's admissibility filter.
Vector sample_initial_point(const ProblemSpec& p, double margin, Rng& rng);

TrajectoryRecord run_ngd(const RunConfig& cfg);

/// Gradient descent on f + lambda * g with the configured schedule as step size.
TrajectoryRecord run_gd(const RunConfig& cfg, double lambda);

enum class FlowStatus { completed, kink, piece_change, gradient_floor, integration_failure };

std::string to_string(FlowStatus status);

struct FlowOptions {
    double kink_tol = 1e-6;
    double grad_floor = 1e-12;
    std::size_t sample_every = 1;
};

struct FlowResult {
    std::vector<double> times;
    std::vector<Vector> states;
    FlowStatus status = FlowStatus::completed;
    std::string message;
};

/// Classical RK4 on x' = -grad f(x) with fixed step dt up to time T.
FlowResult gradient_flow(const ProblemSpec& p, std::span<const double> x0, double horizon, double dt,
                         const FlowOptions& options = {});

std::string trajectory_csv(const TrajectoryRecord& record);
nlohmann::json trajectory_summary(const TrajectoryRecord& record);

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

}  // namespace flatmin
