#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flatmin/error.hpp"
#include "flatmin/harness.hpp"
#include "flatmin/verifiers.hpp"

using namespace flatmin;

namespace {

constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

std::string commas_to_spaces(std::string s) {
    std::replace(s.begin(), s.end(), ',', ' ');
    return s;
}

// Flags override the --config file key by key.
struct Settings {
    std::string config_path;
    std::map<std::string, std::string> flags;

    Config resolve(const std::set<std::string>& allowed) const {
        Config c = config_path.empty() ? Config{} : Config::load(config_path);
        for (const auto& [k, v] : flags) c.set(k, v);
        for (const auto& [k, v] : c.entries())
            if (!allowed.count(k) && !(k.rfind("param.", 0) == 0 && allowed.count("param")))
                throw Error(ErrorKind::usage, "option '" + k + "' does not apply to this subcommand");
        return c;
    }
};

void add_flag(CLI::App* app, Settings& s, const std::string& name, const std::string& key, const std::string& help,
              bool list = false) {
    app->add_option_function<std::string>(
        name,
        [&s, key, list](const std::string& v) { s.flags[key] = list ? commas_to_spaces(v) : v; }, help);
}

void add_params(CLI::App* app, Settings& s) {
    app->add_option_function<std::vector<std::string>>(
           "--param",
           [&s](const std::vector<std::string>& kvs) {
               for (const std::string& kv : kvs) {
                   const auto eq = kv.find('=');
                   if (eq == std::string::npos || eq == 0)
                       throw CLI::ValidationError("--param", "expected key=value, got '" + kv + "'");
                   s.flags["param." + kv.substr(0, eq)] = commas_to_spaces(kv.substr(eq + 1));
               }
           },
           "problem parameter key=value (repeatable), e.g. a=2 or v=1,2")
        ->allow_extra_args(false);
}

void add_config(CLI::App* app, Settings& s) {
    app->add_option("--config", s.config_path, "key = value file; flags override its entries")
        ->check(CLI::ExistingFile);
}

ProblemSpec problem_from(const Config& c) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : c.entries())
        if (k.rfind("param.", 0) == 0) params[k.substr(6)] = v;
    return make_problem(c.get_or("problem", "hyperbola_xy"), params);
}

std::size_t count_of(const Config& c, const std::string& key, std::int64_t fallback, std::int64_t minimum = 1) {
    const std::int64_t v = c.get_int(key, fallback);
    if (v < minimum) throw Error(ErrorKind::usage, key + " must be at least " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
}

std::string vector_text(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + format_number(x[i]);
    return s + ")";
}

int cmd_list() {
    std::printf("%-14s %-4s %-24s %s\n", "name", "dim", "flat minima", "objective");
    for (const ProblemSpec& p : catalog()) {
        std::string flats;
        for (const Vector& z : p.flat_minima) flats += (flats.empty() ? "" : " ") + vector_text(z);
        if (flats.empty()) flats = "-";
        std::printf("%-14s %-4zu %-24s %s\n", p.name.c_str(), p.dim, flats.c_str(), p.formula.c_str());
    }
    return 0;
}

int cmd_run(const Settings& s) {
    const Config c = s.resolve(
        {"problem", "param", "beta", "gamma", "iters", "seed", "init", "lambda", "out", "radius", "dwell", "stop"});
    RunConfig run;
    run.problem = std::make_shared<const ProblemSpec>(problem_from(c));
    run.schedule = StepSchedule::power(c.get_double("beta", 0.4), c.get_double("gamma", 4.0));
    run.max_iters = count_of(c, "iters", 20000);
    run.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
    const std::string init = c.get_or("init", "box");
    if (init != "box") {
        const Vector x0 = c.get_doubles("init");
        if (x0.size() != run.problem->dim)
            throw Error(ErrorKind::usage, "--init needs " + std::to_string(run.problem->dim) + " coordinates");
        run.init = x0;
    }
    run.target_radius = c.get_double("radius", 1e-2);
    run.dwell = count_of(c, "dwell", 200, 0);
    run.stop_at_target = c.get_bool("stop", true);

    const bool gd = c.has("lambda");
    const TrajectoryRecord rec = gd ? run_gd(run, c.get_double("lambda", 0.0)) : run_ngd(run);
    const std::filesystem::path out = c.get_or("out", "out");
    const std::string stem = (gd ? "gd_" : "ngd_") + rec.problem;
    emit_plot_data(rec, out / (stem + ".csv"));
    write_text(out / (stem + ".json"), trajectory_summary(rec).dump(2) + "\n");

    std::printf("%s %s on %s, %s\n", rec.method.c_str(), rec.schedule.c_str(), rec.problem.c_str(),
                to_string(rec.status).c_str());
    std::printf("iterations %zu, terminal %s\n", rec.iterations, vector_text(rec.terminal).c_str());
    if (rec.nearest_target)
        std::printf("nearest flat minimum %s at distance %s\n",
                    vector_text(run.problem->flat_minima[*rec.nearest_target]).c_str(),
                    format_number(rec.target_distance).c_str());
    std::printf("wrote %s\n", (out / (stem + ".csv")).string().c_str());
    return rec.status == RunStatus::evaluation_error ? exit_failure : 0;
}

int cmd_verify(const Settings& s) {
    const Config c = s.resolve(
        {"problem", "param", "check", "claimed_p", "center", "radius", "samples", "trials", "seed", "out"});
    const ProblemSpec p = problem_from(c);
    VerifyOptions opt;
    if (c.has("center")) {
        opt.center = c.get_doubles("center");
        if (opt.center->size() != p.dim)
            throw Error(ErrorKind::usage, "--center needs " + std::to_string(p.dim) + " coordinates");
    }
    opt.radius = c.get_double("radius", opt.radius);
    opt.samples = count_of(c, "samples", static_cast<std::int64_t>(opt.samples));
    opt.trials = count_of(c, "trials", static_cast<std::int64_t>(opt.trials));
    opt.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
    if (c.has("claimed_p")) opt.claimed_p = c.get_double("claimed_p", 2.0);
    std::vector<std::string> checks = c.get_words("check");
    if (checks.empty()) checks = {"all"};

    const std::vector<VerifyOutcome> outcomes = run_verifiers(p, checks, opt);
    nlohmann::json reports = nlohmann::json::array();
    bool ok = true;
    std::printf("%-22s %s\n", "check", "result");
    for (const VerifyOutcome& o : outcomes) {
        reports.push_back(o.report);
        ok = ok && o.pass;
        std::printf("%-22s %s\n", o.check.c_str(), o.skipped ? "skipped" : o.pass ? "pass" : "FAIL");
    }
    const std::filesystem::path path = std::filesystem::path(c.get_or("out", "out")) / ("verify_" + p.name + ".json");
    write_text(path, reports.dump(2) + "\n");
    std::printf("wrote %s\n", path.string().c_str());
    return ok ? 0 : exit_failure;
}

int cmd_flatness(const Settings& s) {
    const Config c = s.resolve({"problem", "param", "branch", "t_range", "points", "radii", "samples", "out"});
    const ProblemSpec p = problem_from(c);
    if (!p.level_set) throw Error(ErrorKind::usage, p.name + " has no parametrized solution set");
    const std::size_t branch = count_of(c, "branch", 0, 0);
    if (branch >= p.level_set->branches().size())
        throw Error(ErrorKind::usage, "branch must be below " + std::to_string(p.level_set->branches().size()));
    const Interval full = p.level_set->branches()[branch].params;
    std::vector<double> range = c.has("t_range") ? c.get_doubles("t_range") : std::vector<double>{full.lo, full.hi};
    if (range.size() != 2 || !(range[0] <= range[1])) throw Error(ErrorKind::usage, "--t-range needs lo,hi");
    const std::size_t n = count_of(c, "points", 101, 2);
    std::vector<double> ts;
    for (std::size_t i = 0; i < n; ++i) ts.push_back(range[0] + (range[1] - range[0]) * i / (n - 1));
    const std::vector<double> radii = c.get_doubles("radii");
    const FlatnessReport rep = sharpness_profile(p, branch, ts, radii, count_of(c, "samples", 500));

    const std::filesystem::path path =
        std::filesystem::path(c.get_or("out", "out")) / ("flatness_" + p.name + ".csv");
    emit_plot_data(rep, path);
    if (rep.argmin) {
        const FlatnessPoint& best = rep.points[*rep.argmin];
        std::printf("flattest sampled point %s, %s %s\n", vector_text(best.point).c_str(), rep.measure.c_str(),
                    format_number(best.sharpness).c_str());
        if (rep.nearest_flat_minimum)
            std::printf("distance to declared flat minimum %s\n", format_number(rep.argmin_flat_distance).c_str());
    }
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_reproduce(const Settings& s) {
    const Config c = s.resolve({"experiment", "problem", "param", "beta", "gamma", "trials", "seed", "iters",
                                "radius", "dwell", "out", "verify"});
    const ExperimentConfig cfg = ExperimentConfig::from_config(c);
    const ExperimentResult res = run_experiment(cfg);
    for (std::size_t i = 0; i < res.datasets.size(); ++i) {
        const DatasetCheck& d = res.dataset_checks[i];
        std::printf("%-48s %6zu rows  %s\n", res.datasets[i].string().c_str(), d.rows,
                    d.ok ? "ok" : ("FAIL " + d.message).c_str());
    }
    if (res.scoreboard) {
        int width = 3;
        for (const ScoreRow& r : res.scoreboard->rows) width = std::max(width, static_cast<int>(r.label.size()));
        std::printf("\n%-*s %-26s %8s %8s %8s %8s\n", width, "row", "schedule", "trials", "captured", "fraction",
                    "median");
        for (const ScoreRow& r : res.scoreboard->rows)
            std::printf("%-*s %-26s %8zu %8zu %8.3f %8.0f\n", width, r.label.c_str(), r.schedule.c_str(), r.trials,
                        r.captured, r.captured_fraction(), r.median_iterations);
    }
    for (const VerifyOutcome& v : res.verifications)
        std::printf("verify %-22s %s\n", v.check.c_str(), v.skipped ? "skipped" : v.pass ? "pass" : "FAIL");
    return res.ok() ? 0 : exit_failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normalized gradient descent toward flat minima, with numerical verifiers"};
    app.require_subcommand(1);
    Settings s;

    CLI::App* list = app.add_subcommand("list", "List the problem catalog");

    CLI::App* run = app.add_subcommand("run", "Run NGD (or GD on f + lambda g) and write the trajectory");
    add_config(run, s);
    add_flag(run, s, "--problem", "problem", "catalog problem name");
    add_params(run, s);
    add_flag(run, s, "--beta", "beta", "step scale beta");
    add_flag(run, s, "--gamma", "gamma", "step exponent gamma, inf for a constant step");
    add_flag(run, s, "--iters", "iters", "iteration budget");
    add_flag(run, s, "--seed", "seed", "random seed");
    add_flag(run, s, "--init", "init", "\"box\" or comma-separated coordinates", true);
    add_flag(run, s, "--lambda", "lambda", "run GD on f + lambda g instead of NGD");
    add_flag(run, s, "--radius", "radius", "capture radius around flat minima");
    add_flag(run, s, "--dwell", "dwell", "iterations inside the radius before stopping");
    run->add_flag_callback("--no-stop", [&s] { s.flags["stop"] = "false"; }, "run the full budget after capture");
    add_flag(run, s, "--out", "out", "output directory");

    CLI::App* verify = app.add_subcommand("verify", "Run numerical verifiers and write JSON reports");
    add_config(verify, s);
    add_flag(verify, s, "--problem", "problem", "catalog problem name");
    add_params(verify, s);
    verify->add_option_function<std::vector<std::string>>(
        "--check",
        [&s](const std::vector<std::string>& v) {
            std::string joined;
            for (const std::string& w : v) joined += (joined.empty() ? "" : " ") + commas_to_spaces(w);
            s.flags["check"] = joined;
        },
        "verifier name (repeatable): dlyapunov conservation hypotheses fermat span projection subregularity "
        "normalized_projection all");
    add_flag(verify, s, "--claimed-p", "claimed_p", "decrease exponent to test");
    add_flag(verify, s, "--center", "center", "decrease-check center, comma-separated", true);
    add_flag(verify, s, "--radius", "radius", "decrease-check ball radius");
    add_flag(verify, s, "--samples", "samples", "samples per check");
    add_flag(verify, s, "--trials", "trials", "gradient flows for the conservation check");
    add_flag(verify, s, "--seed", "seed", "random seed");
    add_flag(verify, s, "--out", "out", "output directory");

    CLI::App* flat = app.add_subcommand("flatness", "Sharpness and oscillation along the solution set");
    add_config(flat, s);
    add_flag(flat, s, "--problem", "problem", "catalog problem name");
    add_params(flat, s);
    add_flag(flat, s, "--branch", "branch", "solution-set branch index");
    add_flag(flat, s, "--t-range", "t_range", "parameter range lo,hi", true);
    add_flag(flat, s, "--points", "points", "number of grid points");
    add_flag(flat, s, "--radii", "radii", "oscillation radii, comma-separated", true);
    add_flag(flat, s, "--samples", "samples", "oscillation samples per radius");
    add_flag(flat, s, "--out", "out", "output directory");

    CLI::App* repro = app.add_subcommand("reproduce", "Write figure datasets and scoreboards");
    add_config(repro, s);
    add_flag(repro, s, "--experiment", "experiment",
             "fig1 fig_quartic fig_parabola fig_cubic fig6b fig_conic fig_monomial table1 scoreboard all");
    add_flag(repro, s, "--problem", "problem", "problem for the scoreboard experiment");
    add_params(repro, s);
    add_flag(repro, s, "--beta", "beta", "scoreboard step scales, comma-separated", true);
    add_flag(repro, s, "--gamma", "gamma", "scoreboard step exponents, comma-separated", true);
    add_flag(repro, s, "--trials", "trials", "trials per scoreboard row");
    add_flag(repro, s, "--seed", "seed", "master seed");
    add_flag(repro, s, "--iters", "iters", "iteration budget per run");
    add_flag(repro, s, "--radius", "radius", "capture radius");
    add_flag(repro, s, "--dwell", "dwell", "capture dwell");
    add_flag(repro, s, "--verify", "verify", "verifiers to run on --problem, comma-separated", true);
    add_flag(repro, s, "--out", "out", "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (list->parsed()) return cmd_list();
        if (run->parsed()) return cmd_run(s);
        if (verify->parsed()) return cmd_verify(s);
        if (flat->parsed()) return cmd_flatness(s);
        if (repro->parsed()) return cmd_reproduce(s);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool usage = e.kind() == ErrorKind::usage || e.kind() == ErrorKind::invalid_parameter;
        return usage ? exit_usage : exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_usage;
}
