#include "flatmin/dynamics.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "flatmin/error.hpp"

namespace flatmin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Nearest {
    std::optional<std::size_t> index;
    double dist = std::numeric_limits<double>::infinity();
};

Nearest nearest_target(const std::vector<Vector>& targets, std::span<const double> x) {
    Nearest out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = distance(targets[i], x);
        if (d < out.dist) {
            out.dist = d;
            out.index = i;
        }
    }
    return out;
}

double regularizer_value(const ProblemSpec& p, std::span<const double> x) {
    return p.regularizer ? p.regularizer->value(x) : kNaN;
}

double safe_grad_norm(const ProblemSpec& p, std::span<const double> x) {
    const Vector g = p.gradient(x);
    return norm(g);
}

// Shared loop of the NGD and GD engines. `advance` maps (k, x, alpha) to the
// next iterate and its tag.
template <class Advance>
TrajectoryRecord run_engine(const RunConfig& cfg, const char* method, Advance&& advance, Rng& rng) {
    if (!cfg.problem) throw Error(ErrorKind::invalid_parameter, "run configuration has no problem");
    if (cfg.max_iters < 1) throw Error(ErrorKind::invalid_parameter, "max_iters must be at least 1");
    const ProblemSpec& p = *cfg.problem;

    TrajectoryRecord rec;
    rec.problem = p.name;
    rec.method = method;
    rec.schedule = cfg.schedule.describe();
    rec.seed = cfg.seed;
    rec.target_radius = cfg.target_radius;
    if (cfg.init) {
        if (cfg.init->size() != p.dim)
            throw Error(ErrorKind::invalid_parameter, "initial point has dimension " +
                                                          std::to_string(cfg.init->size()) + ", expected " +
                                                          std::to_string(p.dim));
        rec.init = *cfg.init;
    } else {
        rec.init = sample_initial_point(p, cfg.init_margin, rng);
    }
    const std::vector<Vector>& targets = cfg.targets.empty() ? p.flat_minima : cfg.targets;
    const double div_radius = cfg.divergence_radius.value_or(1e3 * (1.0 + norm(rec.init)));
    if (!(div_radius > 0.0)) throw Error(ErrorKind::invalid_parameter, "divergence radius must be positive");

    Vector x = rec.init;
    std::size_t dwell_count = 0;
    std::optional<std::size_t> dwell_target;
    double last_step = 0.0;
    std::size_t k = 0;
    rec.status = RunStatus::max_iters;

    auto record_row = [&](const Vector& at, double alpha, const std::string& tag) {
        if (!cfg.record_rows) return;
        TrajectoryRow row;
        row.k = k;
        row.x = at;
        row.f = p.objective(at);
        row.g = regularizer_value(p, at);
        row.grad_norm = safe_grad_norm(p, at);
        row.alpha = alpha;
        row.tag = tag;
        rec.rows.push_back(std::move(row));
    };

    try {
        for (; k < cfg.max_iters; ++k) {
            const double alpha = cfg.schedule(k);
            StepResult step = advance(k, x, alpha);
            record_row(x, alpha, step.tag);
            if (step.critical) {
                rec.status = RunStatus::critical;
                break;
            }
            last_step = distance(step.x, x);
            x = std::move(step.x);
            if (!all_finite(x) || norm(x) > div_radius) {
                rec.status = RunStatus::diverged;
                ++k;
                break;
            }
            if (cfg.stop_at_target && !targets.empty()) {
                const Nearest near = nearest_target(targets, x);
                if (near.dist <= cfg.target_radius + last_step && near.index == dwell_target) {
                    ++dwell_count;
                } else if (near.dist <= cfg.target_radius + last_step) {
                    dwell_target = near.index;
                    dwell_count = 1;
                } else {
                    dwell_count = 0;
                    dwell_target.reset();
                }
                if (dwell_count >= cfg.dwell && near.dist <= cfg.target_radius) {
                    rec.status = RunStatus::converged_to_target;
                    ++k;
                    break;
                }
            }
        }
        if (rec.status != RunStatus::critical) {
            const std::string tag = rec.status == RunStatus::max_iters ? "end" : to_string(rec.status);
            record_row(x, cfg.schedule(k), tag);
        }
    } catch (const Error& e) {
        rec.status = RunStatus::evaluation_error;
        rec.message = e.what();
    }
    rec.iterations = k;
    rec.terminal = x;
    const Nearest near = nearest_target(targets, x);
    rec.nearest_target = near.index;
    rec.target_distance = near.dist;
    return rec;
}

}  // namespace

StepSchedule StepSchedule::power(double beta, double gamma) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw Error(ErrorKind::invalid_parameter, "step schedule beta must be positive and finite");
    if (std::isinf(gamma) && gamma > 0) return constant(beta);
    if (!(gamma >= 1.0)) throw Error(ErrorKind::invalid_parameter, "step schedule gamma must lie in [1, inf]");
    return StepSchedule(Kind::power, beta, gamma);
}

StepSchedule StepSchedule::constant(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw Error(ErrorKind::invalid_parameter, "step schedule beta must be positive and finite");
    return StepSchedule(Kind::constant, beta, std::numeric_limits<double>::infinity());
}

double StepSchedule::operator()(std::size_t k) const {
    if (kind_ == Kind::constant) return beta_;
    return beta_ / std::pow(static_cast<double>(k) + 1.0, 1.0 / gamma_);
}

std::string StepSchedule::describe() const {
    if (kind_ == Kind::constant) return format_number(beta_);
    return format_number(beta_) + "/(k+1)^(1/" + format_number(gamma_) + ")";
}

StepResult ngd_step(const ProblemSpec& p, std::span<const double> x, double alpha, SelectionRule rule, Rng& rng,
                    const SelectionOptions& options) {
    if (!(alpha > 0.0)) throw Error(ErrorKind::invalid_parameter, "step size must be positive");
    const Selection s = subgradient_select(p, x, rule, rng, options);
    if (s.critical) return {Vector(x.begin(), x.end()), s.tag, true};
    return {axpy(x, -alpha, s.direction), s.tag, false};
}

std::string to_string(RunStatus status) {
    switch (status) {
    case RunStatus::max_iters: return "max-iters";
    case RunStatus::critical: return "critical";
    case RunStatus::diverged: return "diverged";
    case RunStatus::converged_to_target: return "converged-to-target";
    case RunStatus::evaluation_error: return "evaluation-error";
    }
    return "unknown";
}

Vector sample_initial_point(const ProblemSpec& p, double margin, Rng& rng) {
    constexpr int kAttempts = 100000;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        Vector x(p.dim);
        for (std::size_t i = 0; i < p.dim; ++i) x[i] = rng.uniform(p.sampling_box[i].lo, p.sampling_box[i].hi);
        if (!p.admissible_init || p.admissible_init(x, margin)) return x;
    }
    throw Error(ErrorKind::insufficient_sampling, p.name + ": no admissible initial point found in the sampling box");
}

TrajectoryRecord run_ngd(const RunConfig& cfg) {
    Rng rng(cfg.seed);
    const ProblemSpec* p = cfg.problem.get();
    auto advance = [&](std::size_t, const Vector& x, double alpha) {
        return ngd_step(*p, x, alpha, cfg.rule, rng, cfg.selection);
    };
    return run_engine(cfg, "ngd", advance, rng);
}

TrajectoryRecord run_gd(const RunConfig& cfg, double lambda) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_parameter, "lambda must be nonnegative");
    if (cfg.problem && lambda > 0.0 && !cfg.problem->regularizer)
        throw Error(ErrorKind::invalid_parameter, cfg.problem->name + " has no regularizer for lambda > 0");
    Rng rng(cfg.seed);
    const ProblemSpec* p = cfg.problem.get();
    auto advance = [&](std::size_t, const Vector& x, double alpha) {
        if (!std::isfinite(p->objective(x)))
            throw Error(ErrorKind::evaluation_domain, p->name + ": objective is not finite at the iterate");
        Vector g = p->gradient(x);
        if (lambda > 0.0) g = axpy(g, lambda, p->regularizer->gradient(x));
        if (!all_finite(g)) throw Error(ErrorKind::evaluation_domain, p->name + ": gradient is not finite");
        return StepResult{axpy(x, -alpha, g), "gd", false};
    };
    return run_engine(cfg, "gd", advance, rng);
}

std::string to_string(FlowStatus status) {
    switch (status) {
    case FlowStatus::completed: return "completed";
    case FlowStatus::kink: return "kink";
    case FlowStatus::piece_change: return "piece-change";
    case FlowStatus::gradient_floor: return "gradient-floor";
    case FlowStatus::integration_failure: return "integration-failure";
    }
    return "unknown";
}

FlowResult gradient_flow(const ProblemSpec& p, std::span<const double> x0, double horizon, double dt,
                         const FlowOptions& options) {
    if (!(horizon > 0.0) || !(dt > 0.0) || dt > horizon)
        throw Error(ErrorKind::invalid_parameter, "gradient flow needs 0 < dt <= T");
    if (x0.size() != p.dim) throw Error(ErrorKind::invalid_parameter, "initial point dimension mismatch");
    if (p.kink_membership && p.kink_membership(x0, options.kink_tol))
        throw Error(ErrorKind::invalid_parameter, p.name + ": flow must start off the kink set");

    FlowResult out;
    Vector x(x0.begin(), x0.end());
    out.times.push_back(0.0);
    out.states.push_back(x);
    const long piece = p.smooth_piece ? p.smooth_piece(x) : 0;
    const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    const std::size_t every = std::max<std::size_t>(options.sample_every, 1);

    auto field = [&](const Vector& z) { return scaled(p.gradient(z), -1.0); };
    for (std::size_t s = 1; s <= steps; ++s) {
        const Vector k1 = field(x);
        if (norm(k1) < options.grad_floor) {
            out.status = FlowStatus::gradient_floor;
            out.message = "gradient below floor at t=" + format_number(static_cast<double>(s - 1) * dt);
            break;
        }
        // every stage must stay on the starting piece, otherwise the step mixes gradients of two pieces
        auto leaves_piece = [&](const Vector& z) {
            if (p.kink_membership && p.kink_membership(z, options.kink_tol)) {
                out.status = FlowStatus::kink;
                out.message = "entered the kink neighborhood at t=" + format_number(static_cast<double>(s) * dt);
                return true;
            }
            if (p.smooth_piece && p.smooth_piece(z) != piece) {
                out.status = FlowStatus::piece_change;
                out.message = "left the initial smooth piece at t=" + format_number(static_cast<double>(s) * dt);
                return true;
            }
            return false;
        };
        const Vector z2 = axpy(x, 0.5 * dt, k1);
        if (leaves_piece(z2)) break;
        const Vector k2 = field(z2);
        const Vector z3 = axpy(x, 0.5 * dt, k2);
        if (leaves_piece(z3)) break;
        const Vector k3 = field(z3);
        const Vector z4 = axpy(x, dt, k3);
        if (leaves_piece(z4)) break;
        const Vector k4 = field(z4);
        Vector next = x;
        for (std::size_t i = 0; i < x.size(); ++i) next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!all_finite(next) || !std::isfinite(p.objective(next))) {
            out.status = FlowStatus::integration_failure;
            out.message = "non-finite state at t=" + format_number(static_cast<double>(s) * dt);
            break;
        }
        if (leaves_piece(next)) break;
        x = std::move(next);
        if (s % every == 0 || s == steps) {
            out.times.push_back(static_cast<double>(s) * dt);
            out.states.push_back(x);
        }
    }
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trajectory_csv(const TrajectoryRecord& record) {
    std::ostringstream out;
    const std::size_t n = record.init.size();
    out << "k";
    for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
    out << ",f,g,grad_norm,alpha,tag\n";
    for (const TrajectoryRow& row : record.rows) {
        out << row.k;
        for (double v : row.x) out << ',' << format_number(v);
        out << ',' << format_number(row.f) << ',' << format_number(row.g) << ',' << format_number(row.grad_norm)
            << ',' << format_number(row.alpha) << ',' << row.tag << '\n';
    }
    return out.str();
}

namespace {

nlohmann::json vector_json(std::span<const double> v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double c : v) arr.push_back(std::isfinite(c) ? nlohmann::json(c) : nlohmann::json(format_number(c)));
    return arr;
}

}  // namespace

nlohmann::json trajectory_summary(const TrajectoryRecord& record) {
    nlohmann::json j;
    j["problem"] = record.problem;
    j["method"] = record.method;
    j["schedule"] = record.schedule;
    j["seed"] = record.seed;
    j["init"] = vector_json(record.init);
    j["status"] = to_string(record.status);
    if (!record.message.empty()) j["message"] = record.message;
    j["iterations"] = record.iterations;
    j["terminal"] = vector_json(record.terminal);
    j["target_radius"] = record.target_radius;
    j["captured"] = record.captured();
    if (record.nearest_target) {
        j["nearest_flat_minimum_index"] = *record.nearest_target;
        j["distance"] = record.target_distance;
    } else {
        j["nearest_flat_minimum_index"] = nullptr;
        j["distance"] = nullptr;
    }
    return j;
}

}  // namespace flatmin
