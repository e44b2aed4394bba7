#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "amlopt/aml.hpp"
#include "amlopt/analytic.hpp"
#include "amlopt/controls.hpp"
#include "amlopt/covariance.hpp"
#include "amlopt/enopt.hpp"
#include "amlopt/errors.hpp"
#include "amlopt/experiment.hpp"
#include "amlopt/reservoir.hpp"
#include "amlopt/surrogate.hpp"

namespace py = pybind11;
using namespace amlopt;

namespace {

ControlBounds make_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) { return {lower, upper}; }

py::dict enopt_trace_dict(const EnOptTrace& t) {
    py::list values, evaluations, controls;
    for (const auto& it : t.iterations) {
        values.append(it.value);
        evaluations.append(it.evaluations);
        controls.append(it.control.values);
    }
    py::dict d;
    d["values"] = values;
    d["evaluations"] = evaluations;
    d["controls"] = controls;
    d["termination"] = to_string(t.termination);
    d["total_evaluations"] = t.evaluations;
    return d;
}

py::dict summary_dict(const RunSummary& s) {
    py::dict d;
    d["method"] = s.method;
    d["objective"] = s.objective;
    d["n_controls"] = s.n_controls;
    d["complete"] = s.complete;
    d["fom_value"] = s.fom_value;
    d["surrogate_value"] = s.surrogate_value;
    d["outer_iterations"] = s.outer_iterations;
    d["inner_iterations"] = s.inner_iterations;
    d["fom_evaluations"] = s.fom_evaluations;
    d["surrogate_evaluations"] = s.surrogate_evaluations;
    d["total_seconds"] = s.total_seconds;
    d["termination"] = s.termination;
    return d;
}

}  // namespace

PYBIND11_MODULE(_amlopt, m) {
    m.doc() = "Ensemble optimization with adaptive neural surrogates";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<ArtifactError>(m, "ArtifactError", PyExc_RuntimeError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

    m.def("project", [](const Eigen::VectorXd& u, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        std::size_t n_steps) {
        return project(ControlVector(u, static_cast<std::size_t>(lower.size()), n_steps), make_bounds(lower, upper)).values;
    }, py::arg("u"), py::arg("lower"), py::arg("upper"), py::arg("n_steps"));
    m.def("scale_to_unit", [](const Eigen::VectorXd& u, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              std::size_t n_steps) {
        return scale_to_unit(ControlVector(u, static_cast<std::size_t>(lower.size()), n_steps), make_bounds(lower, upper));
    }, py::arg("u"), py::arg("lower"), py::arg("upper"), py::arg("n_steps"));
    m.def("unscale_from_unit", [](const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  std::size_t n_steps) {
        return unscale_from_unit(x, make_bounds(lower, upper), n_steps).values;
    }, py::arg("x"), py::arg("lower"), py::arg("upper"), py::arg("n_steps"));

    m.def("initial_covariance", [](const Eigen::VectorXd& sigmas, double rho, std::size_t n_steps) {
        return build_initial_covariance(sigmas, rho, static_cast<std::size_t>(sigmas.size()), n_steps).entries;
    }, py::arg("sigmas"), py::arg("rho"), py::arg("n_steps"));
    m.def("adapt_covariance", [](const Eigen::MatrixXd& c, const Eigen::VectorXd& step, double mixing) {
        return adapt_covariance({c, 0}, step, mixing).entries;
    }, py::arg("covariance"), py::arg("step"), py::arg("mixing"));
    m.def("search_direction", &search_direction, py::arg("ccov"));
    m.def("discount_vector", &discount_vector, py::arg("d_tau"), py::arg("tau"), py::arg("times"));

    m.def("enopt", [](const std::function<double(const Eigen::VectorXd&)>& fn, const Eigen::VectorXd& u0,
                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, std::size_t n_steps,
                      std::size_t sample_size, double tolerance, std::size_t max_iterations, double sigma,
                      std::uint64_t seed) {
        FunctionObjective f("python", [&fn](const ControlVector& u) {
            py::gil_scoped_acquire gil;
            return fn(u.values);
        });
        EnOptConfig cfg;
        cfg.sample_size = sample_size;
        cfg.tolerance = tolerance;
        cfg.max_iterations = max_iterations;
        cfg.sigma = sigma;
        cfg.rng_seed = seed;
        const ControlBounds b = make_bounds(lower, upper);
        EnOptResult r;
        {
            py::gil_scoped_release release;
            r = enopt(f, ControlVector(u0, b.n_wells(), n_steps), cfg, b);
        }
        py::dict d = enopt_trace_dict(r.trace);
        d["control"] = r.control.values;
        d["value"] = r.value;
        return d;
    }, py::arg("fn"), py::arg("u0"), py::arg("lower"), py::arg("upper"), py::arg("n_steps"),
       py::arg("sample_size") = 100, py::arg("tolerance") = 1e-6, py::arg("max_iterations") = 100,
       py::arg("sigma") = 0.001, py::arg("seed") = 0);

    m.def("analytic_names", &analytic_objective_names);
    m.def("analytic_value", [](const std::string& name, const Eigen::VectorXd& x, std::size_t n_wells, std::size_t n_steps) {
        return analytic_objective(name, n_wells, n_steps).objective->evaluate(ControlVector(x, n_wells, n_steps));
    }, py::arg("name"), py::arg("x"), py::arg("n_wells"), py::arg("n_steps"));

    m.def("simulate", [](const std::filesystem::path& deck, const Eigen::VectorXd& u) {
        const ReservoirModel model = load_deck(deck);
        SimulationResult r;
        {
            py::gil_scoped_release release;
            r = simulate(model, ControlVector(u, model.control_types(), model.n_steps()));
        }
        const auto [value, j] = npv(r, model.econ);
        py::dict d;
        d["times_days"] = r.times_days;
        d["q_op"] = r.q_op;
        d["q_wp"] = r.q_wp;
        d["q_wi"] = r.q_wi;
        d["q_pi"] = r.q_pi;
        d["q_pp"] = r.q_pp;
        d["j"] = j;
        d["npv"] = value;
        d["water_residual"] = r.water_residual;
        d["polymer_residual"] = r.polymer_residual;
        return d;
    }, py::arg("deck"), py::arg("u"));
    m.def("constant_controls", [](const std::filesystem::path& deck, double inj, double conc, double prod) {
        return constant_controls(load_deck(deck), inj, conc, prod).values;
    }, py::arg("deck"), py::arg("injector_rate"), py::arg("concentration"), py::arg("producer_rate"));
    m.def("check_deck", [](const std::filesystem::path& deck, double inj, double conc, double prod) {
        const DeckReport r = check_deck(deck, inj, conc, prod);
        py::dict d;
        d["name"] = r.name;
        d["cells"] = r.cells;
        d["wells"] = r.wells;
        d["controls"] = r.controls;
        d["pore_volume"] = r.pore_volume;
        d["npv"] = r.value;
        d["water_residual"] = r.water_residual;
        d["polymer_residual"] = r.polymer_residual;
        d["conservative"] = r.conservative;
        return d;
    }, py::arg("deck"), py::arg("injector_rate") = 700.0, py::arg("concentration") = 0.5,
       py::arg("producer_rate") = 150.0);

    m.def("parse_config", [](const std::string& text) { return serialize_run_config(parse_run_config(text)); },
          py::arg("text"), "Parse a run configuration and return its canonical form.");
    m.def("run", [](const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed) {
        RunConfig cfg = load_run_config(config);
        if (seed) cfg.seed = *seed;
        RunOutcome r;
        {
            py::gil_scoped_release release;
            r = run_experiment(cfg, out);
        }
        py::dict d;
        d["directory"] = r.directory;
        d["value"] = r.value;
        d["fom_evaluations"] = r.fom_evaluations;
        d["termination"] = r.termination;
        d["certified"] = r.certified;
        return d;
    }, py::arg("config"), py::arg("out"), py::arg("seed") = py::none());
    m.def("summarize", [](const std::filesystem::path& dir) { return summary_dict(summarize_run(dir)); }, py::arg("run"));
    m.def("compare", [](const std::filesystem::path& a, const std::filesystem::path& b) {
        const Comparison c = compare_runs(a, b);
        py::dict d;
        d["baseline"] = summary_dict(c.baseline);
        d["candidate"] = summary_dict(c.candidate);
        d["npv_ratio"] = c.npv_ratio;
        d["evaluation_ratio"] = c.evaluation_ratio;
        d["speedup"] = c.speedup;
        return d;
    }, py::arg("baseline"), py::arg("candidate"));
}
