#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "flatmin/dynamics.hpp"
#include "flatmin/geometry.hpp"
#include "flatmin/problems.hpp"

namespace flatmin {

/// Flat `key = value` file. `#` starts a comment, array values are
/// whitespace-separated, keys are unique.
class Config {
public:
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& path);

    /// One `key = value` line per entry in key order; parse(print()) == *this.
    std::string print() const;

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<std::string> get_words(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::span<const double> values);

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    bool operator==(const Config& other) const = default;

private:
    std::map<std::string, std::string> entries_;
};

/// Reals accept "inf", "-inf" and "nan" in addition to the usual forms.
double parse_real(const std::string& text);

/// Catalog lookup with optional parameters (conic: a b; quadric: a; monomial:
/// v; rank1_l1: u v).
ProblemSpec make_problem(const std::string& name, const std::map<std::string, std::string>& params);

struct ScheduleSpec {
    double beta = 0.4;
    double gamma = 4.0;

    StepSchedule schedule() const { return StepSchedule::power(beta, gamma); }
    bool operator==(const ScheduleSpec&) const = default;
};

struct ExperimentConfig {
    std::string experiment = "table1";
    std::string problem = "hyperbola_xy";
    std::map<std::string, std::string> params;
    std::vector<ScheduleSpec> schedules{{0.4, 4.0}};  ///< used by the "scoreboard" experiment
    std::size_t trials = 50;
    std::uint64_t seed = 1;
    std::optional<std::size_t> max_iters;  ///< 3e5 for scoreboards, 2e4 for figures
    double radius = 2e-2;
    std::size_t dwell = 200;
    std::filesystem::path output_dir = "out";
    std::vector<std::string> verifiers;

    /// Throws invalid_parameter when trials is zero or the problem is unknown.
    void validate() const;
    static ExperimentConfig from_config(const Config& c);
    Config to_config() const;
    bool operator==(const ExperimentConfig&) const = default;
};

struct ScoreRowSpec {
    std::string label;
    ProblemPtr problem;
    StepSchedule schedule = StepSchedule::power(0.4, 4.0);
    std::size_t max_iters = 300000;
    double radius = 2e-2;
    std::size_t dwell = 200;
};

struct ScoreRow {
    std::string label;
    std::string problem;
    std::string schedule;
    std::size_t trials = 0;
    std::vector<std::size_t> captured_per_target;
    std::size_t captured = 0;
    std::size_t unconverged = 0;
    std::size_t critical = 0;
    std::size_t diverged = 0;
    std::size_t errors = 0;
    double median_iterations = 0.0;  ///< over captured trials
    std::vector<std::string> failures;

    double captured_fraction() const { return trials ? static_cast<double>(captured) / trials : 0.0; }
};

struct Scoreboard {
    std::uint64_t seed = 0;
    std::vector<ScoreRow> rows;
};

/// Runs `trials` NGD runs from box-uniform inits; trial t of row r uses
/// derive_seed(master, r, t). Trials run on `threads` workers (0: hardware).
ScoreRow score_row(const ScoreRowSpec& spec, std::uint64_t master_seed, std::size_t row_index, std::size_t trials,
                   std::size_t threads = 0);

struct Table1Options {
    std::size_t max_iters = 300000;
    double radius = 2e-2;
    std::size_t dwell = 200;
    std::size_t threads = 0;
    std::vector<std::string> only;  ///< row labels to keep; empty keeps all
};

/// Row specs for the flat-minimum table with the figure schedules.
std::vector<ScoreRowSpec> table1_rows(const Table1Options& options = {});

Scoreboard reproduce_table1(std::uint64_t seed, std::size_t trials_per_problem, const Table1Options& options = {});

nlohmann::json to_json(const Scoreboard& board);
std::string scoreboard_csv(const Scoreboard& board);

/// Writes `path` and `path` + ".meta.txt" (config grammar); returns the CSV path.
std::filesystem::path emit_plot_data(const TrajectoryRecord& record, const std::filesystem::path& path);
std::filesystem::path emit_plot_data(const FlatnessReport& report, const std::filesystem::path& path);

/// Header column count, equal-length rows, finite numbers outside the text
/// columns tag, label, problem and schedule.
struct DatasetCheck {
    std::size_t rows = 0;
    std::size_t columns = 0;
    bool ok = false;
    std::string message;
};
DatasetCheck check_dataset(const std::filesystem::path& csv);

struct VerifyOptions {
    std::optional<Vector> center;  ///< decrease-check center; a solution point near a flat minimum by default
    double radius = 0.05;
    std::size_t samples = 200;
    std::size_t trials = 20;
    std::uint64_t seed = 1;
    std::optional<double> claimed_p;
};

struct VerifyOutcome {
    std::string check;
    bool skipped = false;
    bool pass = true;
    nlohmann::json report;
};

/// dlyapunov, conservation, hypotheses, fermat, span, projection,
/// subregularity, normalized_projection.
std::vector<std::string> verifier_names();

/// Runs the named checks ("all" expands to every name); checks the problem
/// does not support are reported as skipped.
std::vector<VerifyOutcome> run_verifiers(const ProblemSpec& p, const std::vector<std::string>& checks,
                                         const VerifyOptions& options = {});

/// Solution-set point at distance about 0.5 from the first flat minimum with a
/// finite positive regularizer.
Vector default_lyapunov_center(const ProblemSpec& p);

struct ExperimentResult {
    std::string experiment;
    std::vector<std::filesystem::path> datasets;
    std::vector<DatasetCheck> dataset_checks;
    std::optional<Scoreboard> scoreboard;
    std::vector<VerifyOutcome> verifications;

    bool ok() const;
};

/// Experiments: fig1, fig_quartic, fig_parabola, fig_cubic, fig6b, fig_conic,
/// fig_monomial, table1, scoreboard, all.
std::vector<std::string> experiment_names();
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace flatmin
