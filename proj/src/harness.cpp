#include "flatmin/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "flatmin/error.hpp"
#include "flatmin/verifiers.hpp"

namespace flatmin {

namespace {

std::vector<double> reals_of(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        try {
            out.push_back(parse_real(w));
        } catch (const Error&) {
            throw Error(ErrorKind::invalid_parameter, "parameter '" + key + "' expects reals, got '" + w + "'");
        }
    }
    if (out.empty()) throw Error(ErrorKind::invalid_parameter, "parameter '" + key + "' is empty");
    return out;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (const std::string& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

}  // namespace

ProblemSpec make_problem(const std::string& name, const std::map<std::string, std::string>& params) {
    if (params.empty()) return make_problem(name);
    auto allow = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : params)
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
                throw Error(ErrorKind::invalid_parameter, name + " has no parameter '" + k + "'");
    };
    auto list = [&](const char* key, std::vector<double> fallback) {
        const auto it = params.find(key);
        return it == params.end() ? fallback : reals_of(key, it->second);
    };
    auto scalar = [&](const char* key, double fallback) {
        const std::vector<double> v = list(key, {fallback});
        if (v.size() != 1) throw Error(ErrorKind::invalid_parameter, std::string("parameter '") + key + "' is a scalar");
        return v.front();
    };
    if (name == "conic") {
        allow({"a", "b"});
        return conic(scalar("a", 2.0), scalar("b", 1.0));
    }
    if (name == "quadric") {
        allow({"a"});
        return quadric(list("a", {1.0, 2.0, 3.0}));
    }
    if (name == "monomial") {
        allow({"v"});
        std::vector<int> v;
        for (double e : list("v", {1.0, 2.0})) {
            if (e != std::round(e)) throw Error(ErrorKind::invalid_parameter, "monomial exponents must be integers");
            v.push_back(static_cast<int>(e));
        }
        return monomial(v);
    }
    if (name == "rank1_l1") {
        allow({"u", "v"});
        return rank1_l1(list("u", {1.0, 2.0}), list("v", {1.0, 3.0}));
    }
    make_problem(name);
    throw Error(ErrorKind::invalid_parameter, name + " takes no parameters");
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (trials == 0) throw Error(ErrorKind::invalid_parameter, "trial count must be at least 1");
    const auto names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end())
        throw Error(ErrorKind::invalid_parameter, "unknown experiment '" + experiment + "'");
    make_problem(problem, params);
    if (schedules.empty()) throw Error(ErrorKind::invalid_parameter, "schedule grid is empty");
    for (const ScheduleSpec& s : schedules) s.schedule();
    const auto checks = verifier_names();
    for (const std::string& v : verifiers)
        if (v != "all" && std::find(checks.begin(), checks.end(), v) == checks.end())
            throw Error(ErrorKind::invalid_parameter, "unknown verifier '" + v + "'");
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    static const std::vector<std::string> known{"experiment", "problem", "beta",   "gamma", "trials", "seed",
                                                "iters",      "radius",  "dwell",  "out",   "verify"};
    ExperimentConfig e;
    for (const auto& [k, v] : c.entries()) {
        if (k.rfind("param.", 0) == 0) {
            e.params[k.substr(6)] = v;
            continue;
        }
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::usage, "unknown config key '" + k + "'");
    }
    e.experiment = c.get_or("experiment", e.experiment);
    e.problem = c.get_or("problem", e.problem);
    if (c.has("beta") || c.has("gamma")) {
        std::vector<double> betas = c.has("beta") ? c.get_doubles("beta") : std::vector<double>{0.4};
        std::vector<double> gammas = c.has("gamma") ? c.get_doubles("gamma") : std::vector<double>{4.0};
        if (betas.size() == 1) betas.resize(gammas.size(), betas.front());
        if (gammas.size() == 1) gammas.resize(betas.size(), gammas.front());
        if (betas.size() != gammas.size())
            throw Error(ErrorKind::usage, "beta and gamma lists must have equal length or length 1");
        e.schedules.clear();
        for (std::size_t i = 0; i < betas.size(); ++i) e.schedules.push_back({betas[i], gammas[i]});
    }
    const std::int64_t trials = c.get_int("trials", static_cast<std::int64_t>(e.trials));
    if (trials < 1) throw Error(ErrorKind::usage, "trials must be at least 1");
    e.trials = static_cast<std::size_t>(trials);
    e.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<std::int64_t>(e.seed)));
    if (c.has("iters")) {
        const std::int64_t iters = c.get_int("iters", 0);
        if (iters < 1) throw Error(ErrorKind::usage, "iters must be at least 1");
        e.max_iters = static_cast<std::size_t>(iters);
    }
    e.radius = c.get_double("radius", e.radius);
    const std::int64_t dwell = c.get_int("dwell", static_cast<std::int64_t>(e.dwell));
    if (dwell < 0) throw Error(ErrorKind::usage, "dwell must be nonnegative");
    e.dwell = static_cast<std::size_t>(dwell);
    e.output_dir = c.get_or("out", e.output_dir.string());
    e.verifiers = c.get_words("verify");
    return e;
}

Config ExperimentConfig::to_config() const {
    Config c;
    c.set("experiment", experiment);
    c.set("problem", problem);
    for (const auto& [k, v] : params) c.set("param." + k, v);
    std::vector<double> betas, gammas;
    for (const ScheduleSpec& s : schedules) {
        betas.push_back(s.beta);
        gammas.push_back(s.gamma);
    }
    c.set("beta", betas);
    c.set("gamma", gammas);
    c.set("trials", std::to_string(trials));
    c.set("seed", std::to_string(seed));
    if (max_iters) c.set("iters", std::to_string(*max_iters));
    c.set("radius", radius);
    c.set("dwell", std::to_string(dwell));
    c.set("out", output_dir.string());
    if (!verifiers.empty()) c.set("verify", join_words(verifiers));
    return c;
}

// ---------------------------------------------------------------------------

ScoreRow score_row(const ScoreRowSpec& spec, std::uint64_t master_seed, std::size_t row_index, std::size_t trials,
                   std::size_t threads) {
    if (!spec.problem) throw Error(ErrorKind::invalid_parameter, "score row without a problem");
    std::vector<TrajectoryRecord> records(trials);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < trials; t = next++) {
            RunConfig cfg;
            cfg.problem = spec.problem;
            cfg.schedule = spec.schedule;
            cfg.max_iters = spec.max_iters;
            cfg.seed = derive_seed(master_seed, row_index, t);
            cfg.target_radius = spec.radius;
            cfg.dwell = spec.dwell;
            cfg.record_rows = false;
            try {
                records[t] = run_ngd(cfg);
            } catch (const std::exception& e) {
                records[t].status = RunStatus::evaluation_error;
                records[t].message = e.what();
            }
        }
    };
    const std::size_t n_threads =
        std::max<std::size_t>(1, std::min(trials, threads ? threads : std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    ScoreRow row;
    row.label = spec.label;
    row.problem = spec.problem->name;
    row.schedule = spec.schedule.describe();
    row.trials = trials;
    row.captured_per_target.assign(spec.problem->flat_minima.size(), 0);
    std::vector<double> iters;
    for (std::size_t t = 0; t < trials; ++t) {
        const TrajectoryRecord& rec = records[t];
        if (rec.captured()) {
            ++row.captured;
            ++row.captured_per_target[*rec.nearest_target];
            iters.push_back(static_cast<double>(rec.iterations));
            continue;
        }
        switch (rec.status) {
            case RunStatus::critical: ++row.critical; break;
            case RunStatus::diverged: ++row.diverged; break;
            case RunStatus::evaluation_error:
                ++row.errors;
                row.failures.push_back("trial " + std::to_string(t) + ": " + rec.message);
                break;
            default: ++row.unconverged; break;
        }
    }
    if (!iters.empty()) {
        std::sort(iters.begin(), iters.end());
        const std::size_t m = iters.size() / 2;
        row.median_iterations = iters.size() % 2 ? iters[m] : 0.5 * (iters[m - 1] + iters[m]);
    }
    return row;
}

std::vector<ScoreRowSpec> table1_rows(const Table1Options& options) {
    auto make = [&](std::string label, ProblemSpec p, double beta, double gamma) {
        return ScoreRowSpec{std::move(label), std::make_shared<const ProblemSpec>(std::move(p)),
                            StepSchedule::power(beta, gamma), options.max_iters, options.radius, options.dwell};
    };
    std::vector<ScoreRowSpec> rows{
        make("quartic_y4", quartic_y4(), 1.0, 4.0),
        make("parabola", parabola(), 1.0, 2.0),
        make("cubic", cubic(), 0.4, 4.0),
        make("conic_ellipse", conic(2.0, 1.0), 1.0, 2.0),
        make("conic_hyperbola", conic(2.0, -1.0), 1.0, 3.0),
        make("monomial", monomial({1, 2}), 0.5, 3.0),
        make("abs_3d", abs_3d(), 0.4, 4.0),
        make("hyperbola_xy", hyperbola_xy(), 0.4, 4.0),
    };
    if (options.only.empty()) return rows;
    std::vector<ScoreRowSpec> kept;
    for (const std::string& label : options.only) {
        const auto it = std::find_if(rows.begin(), rows.end(), [&](const ScoreRowSpec& r) { return r.label == label; });
        if (it == rows.end()) throw Error(ErrorKind::invalid_parameter, "no table row '" + label + "'");
        kept.push_back(*it);
    }
    return kept;
}

Scoreboard reproduce_table1(std::uint64_t seed, std::size_t trials_per_problem, const Table1Options& options) {
    if (trials_per_problem == 0) throw Error(ErrorKind::invalid_parameter, "trial count must be at least 1");
    Scoreboard board;
    board.seed = seed;
    const std::vector<ScoreRowSpec> all = table1_rows(Table1Options{options.max_iters, options.radius, options.dwell,
                                                                    options.threads, {}});
    for (const ScoreRowSpec& spec : table1_rows(options)) {
        // row seeds follow the position in the full table so subsets reproduce the same trials
        const auto pos = static_cast<std::size_t>(
            std::find_if(all.begin(), all.end(), [&](const ScoreRowSpec& r) { return r.label == spec.label; }) -
            all.begin());
        board.rows.push_back(score_row(spec, seed, pos, trials_per_problem, options.threads));
    }
    return board;
}

nlohmann::json to_json(const Scoreboard& board) {
    nlohmann::json rows = nlohmann::json::array();
    for (const ScoreRow& r : board.rows) {
        nlohmann::json fractions = nlohmann::json::array();
        for (std::size_t c : r.captured_per_target)
            fractions.push_back(r.trials ? static_cast<double>(c) / static_cast<double>(r.trials) : 0.0);
        rows.push_back({{"label", r.label},
                        {"problem", r.problem},
                        {"schedule", r.schedule},
                        {"trials", r.trials},
                        {"captured", r.captured},
                        {"captured_fraction", r.captured_fraction()},
                        {"captured_per_target", r.captured_per_target},
                        {"fraction_per_target", fractions},
                        {"unconverged", r.unconverged},
                        {"critical", r.critical},
                        {"diverged", r.diverged},
                        {"errors", r.errors},
                        {"median_iterations", r.median_iterations},
                        {"failures", r.failures}});
    }
    return {{"seed", board.seed}, {"rows", rows}};
}

std::string scoreboard_csv(const Scoreboard& board) {
    std::ostringstream out;
    out << "label,problem,schedule,trials,captured,captured_fraction,unconverged,critical,diverged,errors,"
           "median_iterations\n";
    for (const ScoreRow& r : board.rows)
        out << r.label << ',' << r.problem << ',' << r.schedule << ',' << r.trials << ',' << r.captured << ',' << format_number(r.captured_fraction()) << ','
            << r.unconverged << ',' << r.critical << ',' << r.diverged << ',' << r.errors << ','
            << format_number(r.median_iterations) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

namespace {

std::filesystem::path meta_path(const std::filesystem::path& csv) { return csv.string() + ".meta.txt"; }

}  // namespace

std::filesystem::path emit_plot_data(const TrajectoryRecord& record, const std::filesystem::path& path) {
    write_text(path, trajectory_csv(record));
    Config meta;
    meta.set("kind", "trajectory");
    meta.set("problem", record.problem);
    meta.set("method", record.method);
    meta.set("schedule", record.schedule);
    meta.set("seed", std::to_string(record.seed));
    meta.set("init", record.init);
    meta.set("status", to_string(record.status));
    meta.set("iterations", std::to_string(record.iterations));
    meta.set("rows", std::to_string(record.rows.size()));
    write_text(meta_path(path), meta.print());
    return path;
}

std::filesystem::path emit_plot_data(const FlatnessReport& report, const std::filesystem::path& path) {
    write_text(path, flatness_csv(report));
    Config meta;
    meta.set("kind", "flatness");
    meta.set("problem", report.problem);
    meta.set("measure", report.measure);
    if (!report.radii.empty()) meta.set("radii", report.radii);
    meta.set("points", std::to_string(report.points.size()));
    write_text(meta_path(path), meta.print());
    return path;
}

DatasetCheck check_dataset(const std::filesystem::path& csv) {
    static const std::set<std::string> text_columns{"tag", "label", "problem", "schedule"};
    DatasetCheck out;
    std::ifstream in(csv);
    if (!in) throw Error(ErrorKind::io, "cannot read " + csv.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream s(line);
        while (std::getline(s, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) {
        out.message = "empty file";
        return out;
    }
    const std::vector<std::string> header = split(line);
    out.columns = header.size();
    while (std::getline(in, line)) {
        ++out.rows;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size()) {
            out.message = "row " + std::to_string(out.rows) + " has " + std::to_string(cells.size()) + " columns";
            return out;
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (text_columns.count(header[i])) continue;
            double v = 0.0;
            try {
                v = parse_real(cells[i]);
            } catch (const Error&) {
                out.message = "row " + std::to_string(out.rows) + " column " + header[i] + " is not numeric";
                return out;
            }
            if (!std::isfinite(v)) {
                out.message = "row " + std::to_string(out.rows) + " column " + header[i] + " is not finite";
                return out;
            }
        }
    }
    out.ok = out.rows > 0;
    if (!out.ok) out.message = "no data rows";
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> verifier_names() {
    return {"dlyapunov",  "conservation",  "hypotheses",           "fermat",
            "span",       "projection",    "subregularity",        "normalized_projection"};
}

Vector default_lyapunov_center(const ProblemSpec& p) {
    if (p.level_set && !p.flat_minima.empty() && p.regularizer) {
        const Vector& z = p.flat_minima.front();
        std::optional<Vector> best;
        double best_gap = std::numeric_limits<double>::infinity();
        const auto& branches = p.level_set->branches();
        for (std::size_t b = 0; b < branches.size(); ++b)
            for (int i = 0; i <= 800; ++i) {
                const double t = branches[b].params.lo + branches[b].params.width() * i / 800.0;
                const Vector x = branches[b].point(t);
                const double g = p.regularizer->in_domain(x) ? p.regularizer->value(x) : 0.0;
                if (!(g > 0.0) || !std::isfinite(g)) continue;
                const double gap = std::abs(distance(x, z) - 0.5);
                if (gap < best_gap) {
                    best_gap = gap;
                    best = x;
                }
            }
        if (best) return *best;
    }
    if (!p.flat_minima.empty() && p.regularizer) {
        // Newton steps x - 2 f grad f / |grad f|^2 solve F = 0 for f proportional to F^2.
        const Vector& z = p.flat_minima.front();
        Vector d(p.dim, 1.0);
        const double along = dot(d, z) / std::max(dot(z, z), 1e-300);
        for (std::size_t i = 0; i < p.dim; ++i) d[i] -= along * z[i];
        if (norm(d) < 1e-8) {
            d.assign(p.dim, 0.0);
            d[0] = 1.0;
        }
        const double scale = 0.5 / norm(d);
        Vector x(p.dim);
        for (std::size_t i = 0; i < p.dim; ++i) x[i] = z[i] + scale * d[i];
        for (int it = 0; it < 100 && p.objective(x) - p.min_value > 1e-28; ++it) {
            const Vector g = p.gradient(x);
            const double gg = dot(g, g);
            if (!(gg > 0.0)) break;
            const double s = 2.0 * (p.objective(x) - p.min_value) / gg;
            for (std::size_t i = 0; i < p.dim; ++i) x[i] -= s * g[i];
        }
        const double g = p.regularizer->in_domain(x) ? p.regularizer->value(x) : 0.0;
        if (p.objective(x) - p.min_value <= 1e-20 && g > 0.0 && std::isfinite(g)) return x;
    }
    Vector c(p.dim);
    for (std::size_t i = 0; i < p.dim; ++i) c[i] = 0.5 * (p.sampling_box[i].lo + p.sampling_box[i].hi);
    return c;
}

std::vector<VerifyOutcome> run_verifiers(const ProblemSpec& p, const std::vector<std::string>& checks,
                                         const VerifyOptions& options) {
    std::vector<std::string> names;
    for (const std::string& c : checks) {
        if (c == "all") {
            for (const std::string& n : verifier_names()) names.push_back(n);
            continue;
        }
        const auto all = verifier_names();
        if (std::find(all.begin(), all.end(), c) == all.end())
            throw Error(ErrorKind::usage, "unknown check '" + c + "'");
        names.push_back(c);
    }

    auto alpha_grid = [] {
        std::vector<double> a;
        for (int j = 0; j <= 10; ++j) a.push_back(std::ldexp(0.05, -j));
        return a;
    };
    auto first_flat = [&]() -> const Vector& {
        if (p.flat_minima.empty()) throw Error(ErrorKind::unsupported_check, p.name + " declares no flat minimum");
        return p.flat_minima.front();
    };

    std::vector<VerifyOutcome> out;
    for (const std::string& name : names) {
        VerifyOutcome o;
        o.check = name;
        try {
            if (name == "dlyapunov") {
                if (!p.regularizer) throw Error(ErrorKind::unsupported_check, p.name + " has no regularizer");
                const Vector center = options.center.value_or(default_lyapunov_center(p));
                DLyapunovOptions dopt;
                dopt.claimed_p = options.claimed_p;
                const auto q = static_cast<std::size_t>(std::max(p.regularizer->claimed_q, 1));
                const DLyapunovReport r = check_dlyapunov_multistep(p, center, options.radius, default_alpha_grid(),
                                                                    options.samples, q, options.seed, dopt);
                o.report = to_json(r);
                o.pass = r.pass;
            } else if (name == "conservation") {
                const ConservationReport r = check_conservation(p, options.trials, 5.0, 1e-3, options.seed);
                o.report = to_json(r);
                o.pass = r.pass;
            } else if (name == "hypotheses") {
                const RegularizerHypothesesReport r = check_regularizer_hypotheses(p, options.samples, options.seed);
                o.report = to_json(r);
                o.pass = r.pass;
            } else if (name == "fermat") {
                o.report = nlohmann::json::array();
                if (p.flat_minima.empty()) throw Error(ErrorKind::unsupported_check, "no flat minima declared");
                for (const Vector& z : p.flat_minima) {
                    const StationarityReport r = fermat_check(p, z, std::vector<double>{1e-2, 1e-4, 1e-6}, 400,
                                                              1e-3, options.seed);
                    o.report.push_back(to_json(r));
                    o.pass = o.pass && r.is_critical;
                }
            } else if (name == "span") {
                o.report = nlohmann::json::array();
                if (p.flat_minima.empty()) throw Error(ErrorKind::unsupported_check, "no flat minima declared");
                for (const Vector& z : p.flat_minima) {
                    const SpanReport r = strict_minimum_span_check(p, z, options.seed);
                    o.report.push_back(to_json(r));
                    o.pass = o.pass && r.passes;
                }
            } else if (name == "projection") {
                const ProjectionBoundReport r = projection_distance_bound_check(
                    p, first_flat(), alpha_grid(), std::max<std::size_t>(options.samples, 1), options.seed);
                o.report = to_json(r);
                o.pass = r.pass;
            } else if (name == "subregularity") {
                const SubregularityReport r = subregularity_estimate(p, first_flat(), options.samples, options.seed);
                o.report = to_json(r);
                o.pass = std::isfinite(r.tau) && r.tau > 0.0;
            } else if (name == "normalized_projection") {
                const NormalizedProjectionReport r =
                    normalized_projection_formula_check(p, first_flat(), options.samples, options.seed);
                o.report = to_json(r);
                o.pass = r.bounded;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::unsupported_check && e.kind() != ErrorKind::insufficient_sampling) throw;
            o.skipped = true;
            o.pass = true;
            o.report = {{"check", name}, {"skipped", e.what()}};
        }
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------------------

bool ExperimentResult::ok() const {
    for (const DatasetCheck& c : dataset_checks)
        if (!c.ok) return false;
    for (const VerifyOutcome& v : verifications)
        if (!v.pass) return false;
    return true;
}

std::vector<std::string> experiment_names() {
    return {"fig1",      "fig_quartic",  "fig_parabola", "fig_cubic",  "fig6b",
            "fig_conic", "fig_monomial", "table1",       "scoreboard", "all"};
}

namespace {

struct FigureRun {
    std::string stem;
    ProblemSpec problem;
    StepSchedule schedule;
    std::size_t inits;
};

void add_dataset(ExperimentResult& result, const std::filesystem::path& path) {
    result.datasets.push_back(path);
    result.dataset_checks.push_back(check_dataset(path));
}

void run_figure(const ExperimentConfig& cfg, std::size_t figure_index, const std::vector<FigureRun>& runs,
                ExperimentResult& result) {
    const std::size_t iters = cfg.max_iters.value_or(20000);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto problem = std::make_shared<const ProblemSpec>(runs[r].problem);
        for (std::size_t i = 0; i < runs[r].inits; ++i) {
            Rng init_rng(derive_seed(cfg.seed, figure_index, 2 * (r * 16 + i)));
            RunConfig run;
            run.problem = problem;
            run.schedule = runs[r].schedule;
            run.max_iters = iters;
            run.init = sample_initial_point(*problem, run.init_margin, init_rng);
            run.seed = derive_seed(cfg.seed, figure_index, 2 * (r * 16 + i) + 1);
            run.stop_at_target = false;
            run.target_radius = cfg.radius;
            run.dwell = cfg.dwell;
            const std::string name = runs[r].stem + (runs[r].inits > 1 ? "_" + std::to_string(i) : "") + ".csv";
            add_dataset(result, emit_plot_data(run_ngd(run), cfg.output_dir / name));
        }
    }
}

void run_fig1(const ExperimentConfig& cfg, ExperimentResult& result) {
    const auto problem = std::make_shared<const ProblemSpec>(hyperbola_xy());
    Rng init_rng(derive_seed(cfg.seed, 0, 0));
    RunConfig run;
    run.problem = problem;
    run.max_iters = cfg.max_iters.value_or(20000);
    run.init = sample_initial_point(*problem, run.init_margin, init_rng);
    run.seed = derive_seed(cfg.seed, 0, 1);
    run.stop_at_target = false;
    run.schedule = StepSchedule::power(0.4, 4.0);
    add_dataset(result, emit_plot_data(run_ngd(run), cfg.output_dir / "fig1_ngd.csv"));
    run.schedule = StepSchedule::constant(0.1);
    add_dataset(result, emit_plot_data(run_gd(run, 0.1), cfg.output_dir / "fig1_gd.csv"));
}

void run_fig6b(const ExperimentConfig& cfg, ExperimentResult& result) {
    const ProblemSpec p = cubic();
    std::vector<double> xs;
    for (int i = 0; i <= 900; ++i) xs.push_back(0.3 + 1e-3 * i);
    const FlatnessReport rep = sharpness_profile(p, 0, xs);
    std::ostringstream csv;
    csv << "x,lambda1,g\n";
    for (const FlatnessPoint& pt : rep.points)
        csv << format_number(pt.t) << ',' << format_number(pt.sharpness) << ',' << format_number(pt.g) << '\n';
    const std::filesystem::path path = cfg.output_dir / "fig6b.csv";
    write_text(path, csv.str());
    Config meta;
    meta.set("kind", "flatness");
    meta.set("problem", p.name);
    meta.set("measure", rep.measure);
    meta.set("curve", "y = cbrt(x^3 - 1)");
    meta.set("x_range", std::vector<double>{xs.front(), xs.back()});
    meta.set("argmin_x", rep.argmin ? rep.points[*rep.argmin].t : std::nan(""));
    write_text(path.string() + ".meta.txt", meta.print());
    add_dataset(result, path);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    result.experiment = cfg.experiment;
    std::filesystem::create_directories(cfg.output_dir);
    const std::string& e = cfg.experiment;
    const bool all = e == "all";

    if (all || e == "fig1") run_fig1(cfg, result);
    if (all || e == "fig_quartic")
        run_figure(cfg, 1, {{"fig_quartic", quartic_y4(), StepSchedule::power(1.0, 4.0), 4}}, result);
    if (all || e == "fig_parabola")
        run_figure(cfg, 2, {{"fig_parabola", parabola(), StepSchedule::power(1.0, 2.0), 4}}, result);
    if (all || e == "fig_cubic") run_figure(cfg, 3, {{"fig_cubic", cubic(), StepSchedule::power(0.4, 4.0), 4}}, result);
    if (all || e == "fig_cubic" || e == "fig6b") run_fig6b(cfg, result);
    if (all || e == "fig_conic")
        run_figure(cfg, 4,
                   {{"fig_conic_ellipse", conic(2.0, 1.0), StepSchedule::power(1.0, 2.0), 4},
                    {"fig_conic_hyperbola", conic(2.0, -1.0), StepSchedule::power(1.0, 3.0), 4}},
                   result);
    if (all || e == "fig_monomial")
        run_figure(cfg, 5,
                   {{"fig_monomial_xy", monomial({1, 1}), StepSchedule::constant(0.1), 4},
                    {"fig_monomial_xy2", monomial({1, 2}), StepSchedule::power(0.5, 3.0), 4}},
                   result);
    if (all || e == "table1") {
        Table1Options opt;
        opt.max_iters = cfg.max_iters.value_or(300000);
        opt.radius = cfg.radius;
        opt.dwell = cfg.dwell;
        result.scoreboard = reproduce_table1(cfg.seed, cfg.trials, opt);
    }
    if (e == "scoreboard") {
        const auto problem = std::make_shared<const ProblemSpec>(make_problem(cfg.problem, cfg.params));
        Scoreboard board;
        board.seed = cfg.seed;
        for (std::size_t i = 0; i < cfg.schedules.size(); ++i) {
            const ScoreRowSpec spec{problem->name + " " + cfg.schedules[i].schedule().describe(), problem,
                                    cfg.schedules[i].schedule(), cfg.max_iters.value_or(300000), cfg.radius,
                                    cfg.dwell};
            board.rows.push_back(score_row(spec, cfg.seed, i, cfg.trials));
        }
        result.scoreboard = std::move(board);
    }
    if (result.scoreboard) {
        const std::string stem = e == "scoreboard" ? "scoreboard" : "table1";
        write_text(cfg.output_dir / (stem + ".json"), to_json(*result.scoreboard).dump(2) + "\n");
        const std::filesystem::path csv = cfg.output_dir / (stem + ".csv");
        write_text(csv, scoreboard_csv(*result.scoreboard));
        add_dataset(result, csv);
    }
    if (!cfg.verifiers.empty()) {
        const ProblemSpec p = make_problem(cfg.problem, cfg.params);
        VerifyOptions vopt;
        vopt.seed = cfg.seed;
        result.verifications = run_verifiers(p, cfg.verifiers, vopt);
        nlohmann::json reports = nlohmann::json::array();
        for (const VerifyOutcome& v : result.verifications) reports.push_back(v.report);
        write_text(cfg.output_dir / ("verify_" + p.name + ".json"), reports.dump(2) + "\n");
    }
    write_text(cfg.output_dir / (e + ".config.txt"), cfg.to_config().print());
    return result;
}

}  // namespace flatmin
