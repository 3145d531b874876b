#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flatmin/error.hpp"
#include "flatmin/geometry.hpp"
#include "flatmin/harness.hpp"
#include "flatmin/verifiers.hpp"

namespace py = pybind11;
using namespace flatmin;

namespace {

// Reports cross the boundary as JSON text; the Python package decodes them.
std::string dump(const nlohmann::json& j) { return j.dump(); }

ProblemPtr problem_of(const std::string& name, const std::map<std::string, std::string>& params) {
    return std::make_shared<const ProblemSpec>(make_problem(name, params));
}

struct Trajectory {
    TrajectoryRecord record;

    std::vector<Vector> points() const {
        std::vector<Vector> out;
        out.reserve(record.rows.size());
        for (const TrajectoryRow& r : record.rows) out.push_back(r.x);
        return out;
    }
    std::vector<double> column(double TrajectoryRow::*field) const {
        std::vector<double> out;
        out.reserve(record.rows.size());
        for (const TrajectoryRow& r : record.rows) out.push_back(r.*field);
        return out;
    }
};

RunConfig run_config(const ProblemPtr& p, double beta, double gamma, std::size_t iters, std::uint64_t seed,
                     std::optional<Vector> init, bool stop, double radius, std::size_t dwell) {
    RunConfig cfg;
    cfg.problem = p;
    cfg.schedule = StepSchedule::power(beta, gamma);
    cfg.max_iters = iters;
    cfg.seed = seed;
    cfg.init = std::move(init);
    cfg.stop_at_target = stop;
    cfg.target_radius = radius;
    cfg.dwell = dwell;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Normalized gradient descent toward flat minima, with numerical verifiers";

    static py::exception<Error> error_type(m, "FlatminError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const bool usage = e.kind() == ErrorKind::usage || e.kind() == ErrorKind::invalid_parameter;
            if (usage)
                PyErr_SetString(PyExc_ValueError, e.what());
            else
                py::set_error(error_type, e.what());
        }
    });

    py::class_<ProblemSpec, std::shared_ptr<ProblemSpec>>(m, "Problem")
        .def(py::init([](const std::string& name, const std::map<std::string, std::string>& params) {
                 return std::make_shared<ProblemSpec>(make_problem(name, params));
             }),
             py::arg("name"), py::arg("params") = std::map<std::string, std::string>{})
        .def_readonly("name", &ProblemSpec::name)
        .def_readonly("formula", &ProblemSpec::formula)
        .def_readonly("dim", &ProblemSpec::dim)
        .def_readonly("flat_minima", &ProblemSpec::flat_minima)
        .def_readonly("parameters", &ProblemSpec::parameters)
        .def("objective", [](const ProblemSpec& p, const Vector& x) { return p.objective(x); })
        .def("gradient", [](const ProblemSpec& p, const Vector& x) { return p.gradient(x); })
        .def("regularizer",
             [](const ProblemSpec& p, const Vector& x) -> std::optional<double> {
                 if (!p.regularizer || !p.regularizer->in_domain(x)) return std::nullopt;
                 return p.regularizer->value(x);
             })
        .def("conserved",
             [](const ProblemSpec& p, const Vector& x) {
                 std::vector<Vector> out;
                 for (const ConservedQuantity& c : p.conserved) out.push_back(c.value(x));
                 return out;
             })
        .def("__repr__", [](const ProblemSpec& p) { return "<Problem " + p.name + ": " + p.formula + ">"; });

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("status", [](const Trajectory& t) { return to_string(t.record.status); })
        .def_property_readonly("iterations", [](const Trajectory& t) { return t.record.iterations; })
        .def_property_readonly("terminal", [](const Trajectory& t) { return t.record.terminal; })
        .def_property_readonly("captured", [](const Trajectory& t) { return t.record.captured(); })
        .def_property_readonly("nearest_target", [](const Trajectory& t) { return t.record.nearest_target; })
        .def_property_readonly("target_distance", [](const Trajectory& t) { return t.record.target_distance; })
        .def_property_readonly("points", &Trajectory::points)
        .def_property_readonly("f", [](const Trajectory& t) { return t.column(&TrajectoryRow::f); })
        .def_property_readonly("g", [](const Trajectory& t) { return t.column(&TrajectoryRow::g); })
        .def_property_readonly("alpha", [](const Trajectory& t) { return t.column(&TrajectoryRow::alpha); })
        .def("csv", [](const Trajectory& t) { return trajectory_csv(t.record); })
        .def("summary_json", [](const Trajectory& t) { return dump(trajectory_summary(t.record)); })
        .def("write", [](const Trajectory& t, const std::filesystem::path& path) {
            return emit_plot_data(t.record, path);
        });

    m.def("catalog_names", &catalog_names);

    m.def(
        "run_ngd",
        [](const std::string& problem, const std::map<std::string, std::string>& params, double beta, double gamma,
           std::size_t iters, std::uint64_t seed, std::optional<Vector> init, bool stop, double radius,
           std::size_t dwell) {
            const RunConfig cfg =
                run_config(problem_of(problem, params), beta, gamma, iters, seed, std::move(init), stop, radius, dwell);
            py::gil_scoped_release release;
            return Trajectory{run_ngd(cfg)};
        },
        py::arg("problem"), py::arg("params") = std::map<std::string, std::string>{}, py::arg("beta") = 0.4,
        py::arg("gamma") = 4.0, py::arg("iters") = 20000, py::arg("seed") = 1, py::arg("init") = py::none(),
        py::arg("stop") = true, py::arg("radius") = 1e-2, py::arg("dwell") = 200);

    m.def(
        "run_gd",
        [](const std::string& problem, double lam, const std::map<std::string, std::string>& params, double step,
           std::size_t iters, std::uint64_t seed, std::optional<Vector> init) {
            const RunConfig cfg = run_config(problem_of(problem, params), step,
                                             std::numeric_limits<double>::infinity(), iters, seed, std::move(init),
                                             false, 1e-2, 200);
            py::gil_scoped_release release;
            return Trajectory{run_gd(cfg, lam)};
        },
        py::arg("problem"), py::arg("lam"), py::arg("params") = std::map<std::string, std::string>{},
        py::arg("step") = 0.1, py::arg("iters") = 20000, py::arg("seed") = 1, py::arg("init") = py::none());

    m.def(
        "gradient_flow",
        [](const std::string& problem, const Vector& x0, double horizon, double dt,
           const std::map<std::string, std::string>& params) {
            const FlowResult r = gradient_flow(make_problem(problem, params), x0, horizon, dt);
            return py::make_tuple(r.times, r.states, to_string(r.status));
        },
        py::arg("problem"), py::arg("x0"), py::arg("horizon") = 5.0, py::arg("dt") = 1e-3,
        py::arg("params") = std::map<std::string, std::string>{});

    m.def(
        "verify_json",
        [](const std::string& problem, const std::vector<std::string>& checks,
           const std::map<std::string, std::string>& params, std::optional<Vector> center, double radius,
           std::size_t samples, std::size_t trials, std::uint64_t seed, std::optional<double> claimed_p) {
            VerifyOptions opt{std::move(center), radius, samples, trials, seed, claimed_p};
            const ProblemSpec p = make_problem(problem, params);
            py::gil_scoped_release release;
            nlohmann::json out = nlohmann::json::array();
            for (const VerifyOutcome& o : run_verifiers(p, checks, opt))
                out.push_back({{"check", o.check}, {"skipped", o.skipped}, {"pass", o.pass}, {"report", o.report}});
            return dump(out);
        },
        py::arg("problem"), py::arg("checks") = std::vector<std::string>{"all"},
        py::arg("params") = std::map<std::string, std::string>{}, py::arg("center") = py::none(),
        py::arg("radius") = 0.05, py::arg("samples") = 200, py::arg("trials") = 20, py::arg("seed") = 1,
        py::arg("claimed_p") = py::none());

    m.def(
        "fermat_check_json",
        [](const std::string& problem, const Vector& x, const std::map<std::string, std::string>& params) {
            return dump(to_json(fermat_check(make_problem(problem, params), x)));
        },
        py::arg("problem"), py::arg("x"), py::arg("params") = std::map<std::string, std::string>{});

    m.def(
        "sharpness_profile_json",
        [](const std::string& problem, const std::vector<double>& params_t, std::size_t branch,
           const std::vector<double>& radii, const std::map<std::string, std::string>& params) {
            const ProblemSpec p = make_problem(problem, params);
            py::gil_scoped_release release;
            return dump(to_json(sharpness_profile(p, branch, params_t, radii)));
        },
        py::arg("problem"), py::arg("t"), py::arg("branch") = 0, py::arg("radii") = std::vector<double>{},
        py::arg("params") = std::map<std::string, std::string>{});

    m.def(
        "reproduce_table1_json",
        [](std::uint64_t seed, std::size_t trials, const std::vector<std::string>& only, std::size_t iters,
           double radius) {
            Table1Options opt;
            opt.only = only;
            opt.max_iters = iters;
            opt.radius = radius;
            py::gil_scoped_release release;
            return dump(to_json(reproduce_table1(seed, trials, opt)));
        },
        py::arg("seed") = 1, py::arg("trials") = 50, py::arg("only") = std::vector<std::string>{},
        py::arg("iters") = 300000, py::arg("radius") = 2e-2);

    m.def(
        "run_experiment",
        [](const std::string& config_text) {
            const ExperimentConfig cfg = ExperimentConfig::from_config(Config::parse(config_text));
            py::gil_scoped_release release;
            const ExperimentResult r = run_experiment(cfg);
            std::vector<std::string> paths;
            for (const auto& d : r.datasets) paths.push_back(d.string());
            return std::make_pair(r.ok(), paths);
        },
        py::arg("config_text"));

    m.def("parse_config", [](const std::string& text) { return Config::parse(text).entries(); });
    m.def("print_config", [](const std::map<std::string, std::string>& entries) {
        Config c;
        for (const auto& [k, v] : entries) c.set(k, v);
        return c.print();
    });
}
