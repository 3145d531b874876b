#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "flatmin/error.hpp"
#include "flatmin/harness.hpp"

using namespace flatmin;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "flatmin_unit" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("config grammar") {
    const Config c = Config::parse(
        "# leading comment\n"
        "problem = conic   # trailing comment\n"
        "\n"
        "  beta =  1   0.5\t0.25 \n"
        "gamma = inf\n"
        "flag = yes\n"
        "count = 12");
    CHECK(c.get_or("problem", "") == "conic");
    CHECK(c.get_doubles("beta") == std::vector<double>{1.0, 0.5, 0.25});
    CHECK(std::isinf(c.get_doubles("gamma").front()));
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_int("count", 0) == 12);
    CHECK(c.get_int("missing", 7) == 7);
    CHECK(Config::parse(c.print()) == c);
    CHECK(c.print().find("beta = 1 0.5 0.25\n") != std::string::npos);

    CHECK(kind_of([] { Config::parse("a = 1\nnovalue\n"); }) == ErrorKind::usage);
    CHECK(kind_of([] { Config::parse("a = 1\na = 2\n"); }) == ErrorKind::usage);
    CHECK(kind_of([] { Config::parse("bad key = 1\n"); }) == ErrorKind::usage);
    CHECK(kind_of([&] { c.get_int("beta", 0); }) == ErrorKind::usage);
    try {
        Config::parse("a = 1\n\nnope\n");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("config printing round trips arbitrary values") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Config c;
        std::vector<double> values;
        for (int i = 0; i < 4; ++i) values.push_back(rng.normal() * std::pow(10.0, rng.uniform(-12, 12)));
        c.set("values", values);
        c.set("scalar", values.front());
        c.set("word", "x" + std::to_string(trial));
        const Config back = Config::parse(c.print());
        CHECK(back == c);
        CHECK(back.get_doubles("values") == values);
    }
    CHECK(parse_real("+1.5") == 1.5);
    CHECK(std::isnan(parse_real("nan")));
    CHECK(parse_real("-inf") == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(parse_real("1.5x"), Error);
    Config c;
    CHECK_THROWS_AS(c.set("k", "a # b"), Error);
}

TEST_CASE("experiment config round trip") {
    ExperimentConfig e;
    e.experiment = "scoreboard";
    e.problem = "conic";
    e.params = {{"a", "2"}, {"b", "-1"}};
    e.schedules = {{1.0, 2.0}, {0.5, std::numeric_limits<double>::infinity()}};
    e.trials = 7;
    e.seed = 99;
    e.max_iters = 1234;
    e.radius = 0.03;
    e.dwell = 10;
    e.output_dir = "some/dir";
    e.verifiers = {"fermat", "span"};
    e.validate();
    const Config printed = e.to_config();
    CHECK(ExperimentConfig::from_config(Config::parse(printed.print())) == e);

    const ExperimentConfig b = ExperimentConfig::from_config(Config::parse("beta = 1 0.5\ngamma = 3\n"));
    REQUIRE(b.schedules.size() == 2);
    CHECK(b.schedules[1] == ScheduleSpec{0.5, 3.0});
    CHECK(kind_of([] { ExperimentConfig::from_config(Config::parse("beta = 1 2\ngamma = 1 2 3\n")); }) ==
          ErrorKind::usage);
    CHECK(kind_of([] { ExperimentConfig::from_config(Config::parse("colour = red\n")); }) == ErrorKind::usage);

    ExperimentConfig bad;
    bad.trials = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::invalid_parameter);
    bad.trials = 1;
    bad.problem = "no_such_problem";
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameterized problems") {
    const ProblemSpec c = make_problem("conic", {{"a", "2"}, {"b", "-1"}});
    CHECK(c.flat_minima.size() == 2);
    for (const Vector& z : c.flat_minima) CHECK(c.objective(z) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(make_problem("monomial", {{"v", "1 1"}}).dim == 2);
    CHECK(kind_of([] { make_problem("monomial", {{"v", "1.5 1"}}); }) == ErrorKind::invalid_parameter);
    CHECK(kind_of([] { make_problem("conic", {{"c", "1"}}); }) == ErrorKind::invalid_parameter);
    CHECK(kind_of([] { make_problem("parabola", {{"a", "1"}}); }) == ErrorKind::invalid_parameter);
    CHECK(make_problem("parabola", {}).name == make_problem("parabola").name);
}

TEST_CASE("score rows are deterministic and thread-count invariant") {
    Table1Options opt;
    opt.max_iters = 20000;
    opt.only = {"parabola", "hyperbola_xy"};
    const Scoreboard a = reproduce_table1(5, 12, opt);
    opt.threads = 3;
    const Scoreboard b = reproduce_table1(5, 12, opt);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(scoreboard_csv(a) == scoreboard_csv(b));

    // a subset reproduces the trials of the full-table row
    opt.only = {"hyperbola_xy"};
    const Scoreboard c = reproduce_table1(5, 12, opt);
    CHECK(to_json(c)["rows"][0] == to_json(a)["rows"][1]);

    for (const ScoreRow& r : a.rows) {
        std::size_t per_target = 0;
        for (std::size_t n : r.captured_per_target) per_target += n;
        CHECK(per_target == r.captured);
        CHECK(r.captured + r.unconverged + r.critical + r.diverged + r.errors == r.trials);
        CHECK(r.captured_fraction() >= 0.0);
        CHECK(r.captured_fraction() <= 1.0);
        if (r.captured) CHECK(r.median_iterations > 0.0);
    }
}

TEST_CASE("score row validation") {
    CHECK_THROWS_AS(reproduce_table1(1, 0), Error);
    Table1Options opt;
    opt.only = {"nonexistent"};
    CHECK(kind_of([&] { table1_rows(opt); }) == ErrorKind::invalid_parameter);
    CHECK(table1_rows().size() == 8);
}

TEST_CASE("plot data and dataset schema") {
    const auto dir = scratch("plot");
    RunConfig cfg;
    cfg.problem = std::make_shared<const ProblemSpec>(hyperbola_xy());
    cfg.init = {2.5, 0.8};
    cfg.max_iters = 50;
    cfg.stop_at_target = false;
    const TrajectoryRecord rec = run_ngd(cfg);
    const auto path = emit_plot_data(rec, dir / "traj.csv");
    const DatasetCheck check = check_dataset(path);
    CHECK(check.ok);
    CHECK(check.rows == rec.rows.size());
    const Config meta = Config::load(path.string() + ".meta.txt");
    CHECK(meta.get_or("problem", "") == "hyperbola_xy");
    CHECK(meta.get_or("method", "") == "ngd");
    CHECK(meta.get_doubles("init") == std::vector<double>{2.5, 0.8});
    CHECK(meta.get_int("iterations", -1) == static_cast<std::int64_t>(rec.iterations));

    const std::vector<double> ts{0.5, 1.0, 2.0};
    const FlatnessReport fr = sharpness_profile(hyperbola_xy(), 0, ts);
    CHECK(check_dataset(emit_plot_data(fr, dir / "flat.csv")).ok);

    write_text(dir / "ragged.csv", "a,b\n1,2\n3\n");
    CHECK_FALSE(check_dataset(dir / "ragged.csv").ok);
    write_text(dir / "nan.csv", "a,b\n1,nan\n");
    CHECK_FALSE(check_dataset(dir / "nan.csv").ok);
    write_text(dir / "tagged.csv", "a,tag\n1,hello\n");
    CHECK(check_dataset(dir / "tagged.csv").ok);
    write_text(dir / "header_only.csv", "a,b\n");
    CHECK_FALSE(check_dataset(dir / "header_only.csv").ok);
    CHECK(kind_of([&] { check_dataset(dir / "missing.csv"); }) == ErrorKind::io);
}

TEST_CASE("verifier dispatch") {
    const ProblemSpec p = hyperbola_xy();
    const Vector c = default_lyapunov_center(p);
    CHECK(p.objective(c) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(distance(c, p.flat_minima.front()) == doctest::Approx(0.5).epsilon(0.02));

    VerifyOptions opt;
    opt.samples = 100;
    opt.trials = 3;
    const auto out = run_verifiers(p, {"dlyapunov", "fermat", "span"}, opt);
    REQUIRE(out.size() == 3);
    for (const VerifyOutcome& o : out) {
        CHECK_FALSE(o.skipped);
        CHECK(o.pass);
    }
    opt.claimed_p = 3.0;
    CHECK_FALSE(run_verifiers(p, {"dlyapunov"}, opt).front().pass);

    const auto ls = run_verifiers(least_squares_default(), {"hypotheses", "dlyapunov"}, opt);
    for (const VerifyOutcome& o : ls) CHECK(o.skipped);
    CHECK(kind_of([&] { run_verifiers(p, {"nonsense"}, opt); }) == ErrorKind::usage);
    CHECK(run_verifiers(parabola(), {"all"}, opt).size() == verifier_names().size());
}

TEST_CASE("experiments write checked datasets") {
    const auto dir = scratch("exp");
    ExperimentConfig e;
    e.experiment = "fig1";
    e.max_iters = 200;
    e.output_dir = dir;
    const ExperimentResult r = run_experiment(e);
    CHECK(r.ok());
    CHECK(r.datasets.size() == 2);
    CHECK(std::filesystem::exists(dir / "fig1_ngd.csv.meta.txt"));
    CHECK(ExperimentConfig::from_config(Config::load(dir / "fig1.config.txt")) == e);

    e.experiment = "fig6b";
    const ExperimentResult f = run_experiment(e);
    REQUIRE(f.datasets.size() == 1);
    CHECK(slurp(f.datasets.front()).rfind("x,lambda1,g\n", 0) == 0);
    CHECK(f.dataset_checks.front().rows == 901);

    e.experiment = "scoreboard";
    e.problem = "parabola";
    e.schedules = {{1.0, 2.0}, {0.5, 3.0}};
    e.trials = 4;
    e.max_iters = 5000;
    e.verifiers = {"fermat"};
    const ExperimentResult s = run_experiment(e);
    REQUIRE(s.scoreboard);
    CHECK(s.scoreboard->rows.size() == 2);
    CHECK(s.ok());
    for (const DatasetCheck& d : s.dataset_checks) CHECK_MESSAGE(d.ok, d.message);
    CHECK(std::filesystem::exists(dir / "scoreboard.json"));
    CHECK(std::filesystem::exists(dir / "verify_parabola.json"));
    CHECK(s.verifications.size() == 1);
}
