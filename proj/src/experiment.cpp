#include "amlopt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amlopt/analytic.hpp"
#include "amlopt/errors.hpp"
#include "amlopt/surrogate.hpp"

namespace amlopt {

using nlohmann::json;

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::fom_enopt: return "fom-enopt";
        case Algorithm::aml_enopt_s: return "aml-enopt-s";
        case Algorithm::aml_enopt_v: return "aml-enopt-v";
    }
    return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "fom-enopt") return Algorithm::fom_enopt;
    if (s == "aml-enopt-s") return Algorithm::aml_enopt_s;
    if (s == "aml-enopt-v") return Algorithm::aml_enopt_v;
    throw ParameterError("unknown algorithm '" + s + "' (fom-enopt, aml-enopt-s, aml-enopt-v)");
}

namespace {

std::string method_label(Algorithm a) {
    switch (a) {
        case Algorithm::fom_enopt: return "FOM-EnOpt";
        case Algorithm::aml_enopt_s: return "AML-EnOpt_s";
        case Algorithm::aml_enopt_v: return "AML-EnOpt_v";
    }
    return "unknown";
}

void check_keys(const json& node, const std::set<std::string>& allowed, const std::string& where) {
    if (!node.is_object()) throw ParameterError(where + " must be an object");
    for (const auto& [key, value] : node.items()) {
        if (!allowed.count(key)) throw ParameterError(fmt::format("unknown key '{}' in {}", key, where));
    }
}

std::string scaling_name(CriterionScale::Mode m) {
    switch (m) {
        case CriterionScale::Mode::raw: return "raw";
        case CriterionScale::Mode::fixed: return "fixed";
        case CriterionScale::Mode::running: return "running";
    }
    return "unknown";
}

CriterionScale::Mode scaling_from_name(const std::string& s) {
    if (s == "raw") return CriterionScale::Mode::raw;
    if (s == "running") return CriterionScale::Mode::running;
    throw ParameterError("outer_scaling must be 'raw' or 'running', got '" + s + "'");
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ArtifactError("cannot write " + p.string());
    out << text;
    if (!out) throw ArtifactError("failed writing " + p.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ArtifactError("missing artifact " + p.string());
    std::vector<json> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ArtifactError(fmt::format("{}:{}: {}", p.string(), n, e.what()));
        }
    }
    return rows;
}

json enopt_json(const EnOptConfig& e) {
    return {{"sample_size", e.sample_size},   {"tolerance", e.tolerance},
            {"max_iterations", e.max_iterations}, {"initial_step", e.initial_step},
            {"step_contraction", e.step_contraction}, {"max_step_trials", e.max_step_trials},
            {"sigma", e.sigma},               {"sigmas", to_std(e.sigmas)},
            {"correlation", e.correlation},   {"mixing", e.mixing}};
}

void read_enopt(const json& n, EnOptConfig& e) {
    check_keys(n,
               {"sample_size", "tolerance", "max_iterations", "initial_step", "step_contraction", "max_step_trials",
                "sigma", "sigmas", "correlation", "mixing"},
               "enopt");
    e.sample_size = n.value("sample_size", e.sample_size);
    e.tolerance = n.value("tolerance", e.tolerance);
    e.max_iterations = n.value("max_iterations", e.max_iterations);
    e.initial_step = n.value("initial_step", e.initial_step);
    e.step_contraction = n.value("step_contraction", e.step_contraction);
    e.max_step_trials = n.value("max_step_trials", e.max_step_trials);
    e.sigma = n.value("sigma", e.sigma);
    if (n.contains("sigmas")) e.sigmas = to_eigen(n["sigmas"].get<std::vector<double>>());
    e.correlation = n.value("correlation", e.correlation);
    e.mixing = n.value("mixing", e.mixing);
}

json trainer_json(const TrainerConfig& t) {
    return {{"restarts", t.restarts},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience},
            {"validation_fraction", t.validation_fraction},
            {"optimizer_memory", t.optimizer_memory},
            {"iterations_per_epoch", t.iterations_per_epoch},
            {"center_inputs", t.center_inputs},
            {"wolfe_c1", t.wolfe_c1},
            {"wolfe_c2", t.wolfe_c2}};
}

void read_trainer(const json& n, TrainerConfig& t) {
    check_keys(n,
               {"restarts", "max_epochs", "patience", "validation_fraction", "optimizer_memory",
                "iterations_per_epoch", "center_inputs", "wolfe_c1", "wolfe_c2"},
               "aml.trainer");
    t.restarts = n.value("restarts", t.restarts);
    t.max_epochs = n.value("max_epochs", t.max_epochs);
    t.patience = n.value("patience", t.patience);
    t.validation_fraction = n.value("validation_fraction", t.validation_fraction);
    t.optimizer_memory = n.value("optimizer_memory", t.optimizer_memory);
    t.iterations_per_epoch = n.value("iterations_per_epoch", t.iterations_per_epoch);
    t.center_inputs = n.value("center_inputs", t.center_inputs);
    t.wolfe_c1 = n.value("wolfe_c1", t.wolfe_c1);
    t.wolfe_c2 = n.value("wolfe_c2", t.wolfe_c2);
}

json aml_json(const AmlConfig& a) {
    return {{"outer_tolerance", a.outer_tolerance},
            {"inner_tolerance", a.inner_tolerance},
            {"max_outer", a.max_outer},
            {"max_inner", a.max_inner},
            {"hidden_layers", a.hidden_layers},
            {"activation", to_string(a.activation)},
            {"accumulate_training_data", a.accumulate_training_data},
            {"outer_scaling", scaling_name(a.outer_scaling)},
            {"trainer", trainer_json(a.trainer)}};
}

void read_aml(const json& n, AmlConfig& a) {
    check_keys(n,
               {"outer_tolerance", "inner_tolerance", "max_outer", "max_inner", "hidden_layers", "activation",
                "accumulate_training_data", "outer_scaling", "trainer"},
               "aml");
    a.outer_tolerance = n.value("outer_tolerance", a.outer_tolerance);
    a.inner_tolerance = n.value("inner_tolerance", a.inner_tolerance);
    a.max_outer = n.value("max_outer", a.max_outer);
    a.max_inner = n.value("max_inner", a.max_inner);
    if (n.contains("hidden_layers")) a.hidden_layers = n["hidden_layers"].get<std::vector<std::size_t>>();
    if (n.contains("activation")) a.activation = activation_from_string(n["activation"].get<std::string>());
    a.accumulate_training_data = n.value("accumulate_training_data", a.accumulate_training_data);
    if (n.contains("outer_scaling")) a.outer_scaling = scaling_from_name(n["outer_scaling"].get<std::string>());
    if (n.contains("trainer")) read_trainer(n["trainer"], a.trainer);
}

json initial_json(const InitialGuess& g) {
    json j = json::object();
    if (g.injector_rate) j["injector_rate"] = *g.injector_rate;
    if (g.concentration) j["concentration"] = *g.concentration;
    if (g.producer_rate) j["producer_rate"] = *g.producer_rate;
    if (g.constant) j["constant"] = *g.constant;
    if (!g.per_type.empty()) j["per_type"] = g.per_type;
    return j;
}

void read_initial(const json& n, InitialGuess& g) {
    check_keys(n, {"injector_rate", "concentration", "producer_rate", "constant", "per_type"}, "initial_guess");
    if (n.contains("injector_rate")) g.injector_rate = n["injector_rate"].get<double>();
    if (n.contains("concentration")) g.concentration = n["concentration"].get<double>();
    if (n.contains("producer_rate")) g.producer_rate = n["producer_rate"].get<double>();
    if (n.contains("constant")) g.constant = n["constant"].get<double>();
    if (n.contains("per_type")) g.per_type = n["per_type"].get<std::vector<double>>();
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path;
    return base_dir / path;
}

void RunConfig::validate() const {
    const bool has_deck = !objective.deck.empty();
    const bool has_analytic = !objective.analytic.empty();
    if (has_deck == has_analytic) throw ParameterError("objective needs exactly one of 'deck' or 'analytic'");
    if (has_deck && !std::filesystem::exists(resolve(objective.deck))) {
        throw ParameterError("deck file not found: " + resolve(objective.deck).string());
    }
    if (has_analytic) {
        const auto names = analytic_objective_names();
        if (std::find(names.begin(), names.end(), objective.analytic) == names.end()) {
            throw ParameterError("unknown analytic objective '" + objective.analytic + "'");
        }
        if (objective.wells == 0 || objective.steps == 0) throw ParameterError("analytic objective needs wells, steps > 0");
        if (algorithm == Algorithm::aml_enopt_v) {
            throw ParameterError("aml-enopt-v needs per-step objective values; analytic objectives are scalar only");
        }
        if (initial.injector_rate || initial.concentration || initial.producer_rate) {
            throw ParameterError("per-kind initial rates apply to reservoir decks only");
        }
    }
    if (has_deck && initial.constant) throw ParameterError("'constant' initial guess applies to analytic objectives only");
    if (!initial.per_type.empty() && (initial.injector_rate || initial.concentration || initial.producer_rate)) {
        throw ParameterError("initial guess: give either per-kind values or per_type, not both");
    }
    if (workers == 0) throw ParameterError("workers must be positive");
    if (output.empty()) throw ParameterError("output directory must not be empty");
    enopt.validate();
    if (algorithm != Algorithm::fom_enopt) {
        AmlConfig a = aml;
        a.enopt = enopt;
        a.validate();
    }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    try {
        const json d = json::parse(text);
        check_keys(d, {"objective", "algorithm", "seed", "workers", "output", "baseline", "initial_guess", "enopt", "aml"},
                   "config");
        const auto& o = d.at("objective");
        check_keys(o, {"deck", "analytic", "wells", "steps"}, "objective");
        c.objective.deck = o.value("deck", std::string());
        c.objective.analytic = o.value("analytic", std::string());
        c.objective.wells = o.value("wells", c.objective.wells);
        c.objective.steps = o.value("steps", c.objective.steps);
        c.algorithm = algorithm_from_string(d.value("algorithm", to_string(c.algorithm)));
        c.seed = d.value("seed", c.seed);
        c.workers = d.value("workers", c.workers);
        c.output = d.value("output", c.output);
        c.baseline = d.value("baseline", c.baseline);
        if (d.contains("initial_guess")) read_initial(d["initial_guess"], c.initial);
        if (d.contains("enopt")) read_enopt(d["enopt"], c.enopt);
        if (d.contains("aml")) read_aml(d["aml"], c.aml);
    } catch (const json::exception& e) {
        throw ParameterError(std::string("invalid run config: ") + e.what());
    }
    c.aml.construction = c.algorithm == Algorithm::aml_enopt_s ? Construction::scalar : Construction::vector;
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

std::string serialize_run_config(const RunConfig& c) {
    json o = json::object();
    if (!c.objective.deck.empty()) o["deck"] = c.objective.deck;
    if (!c.objective.analytic.empty()) {
        o["analytic"] = c.objective.analytic;
        o["wells"] = c.objective.wells;
        o["steps"] = c.objective.steps;
    }
    const json d = {{"objective", o},
                    {"algorithm", to_string(c.algorithm)},
                    {"seed", c.seed},
                    {"workers", c.workers},
                    {"output", c.output},
                    {"baseline", c.baseline},
                    {"initial_guess", initial_json(c.initial)},
                    {"enopt", enopt_json(c.enopt)},
                    {"aml", aml_json(c.aml)}};
    return d.dump(2) + "\n";
}

ControlVector Problem::to_physical(const ControlVector& x) const {
    if (!model) return x;
    return unscale_from_unit(x.values, physical_bounds, x.n_steps);
}

Problem build_problem(const RunConfig& cfg) {
    cfg.validate();
    Problem p;
    if (!cfg.objective.deck.empty()) {
        auto model = std::make_shared<ReservoirModel>(load_deck(cfg.resolve(cfg.objective.deck)));
        p.physical_bounds = model->control_bounds();
        auto fom = make_fom_objective(model, model->econ, p.physical_bounds);
        auto scaled = std::make_shared<ScaledObjective>(fom, p.physical_bounds);
        ControlVector u0;
        const auto& g = cfg.initial;
        if (!g.per_type.empty()) {
            if (g.per_type.size() != model->control_types()) {
                throw StructuralError(fmt::format("initial per_type needs {} values", model->control_types()));
            }
            u0 = ControlVector::from_well_values(to_eigen(g.per_type), model->n_steps());
        } else {
            u0 = constant_controls(*model, g.injector_rate.value_or(700.0), g.concentration.value_or(0.5),
                                   g.producer_rate.value_or(150.0));
        }
        if (!p.physical_bounds.contains(u0)) throw PreconditionError("initial guess lies outside the control bounds");
        p.name = fom->name();
        p.initial = scaled->to_unit(u0);
        p.objective = scaled;
        p.control_names = model->control_names();
        p.bounds = ControlBounds::unit(model->control_types());
        p.model = std::move(model);
    } else {
        AnalyticObjective a = analytic_objective(cfg.objective.analytic, cfg.objective.wells, cfg.objective.steps);
        p.name = "analytic:" + a.name;
        p.objective = a.objective;
        p.bounds = a.bounds;
        p.physical_bounds = a.bounds;
        for (std::size_t w = 0; w < a.n_wells; ++w) p.control_names.push_back(fmt::format("u{}", w));
        const auto& g = cfg.initial;
        if (!g.per_type.empty()) {
            if (g.per_type.size() != a.n_wells) throw StructuralError(fmt::format("initial per_type needs {} values", a.n_wells));
            p.initial = ControlVector::from_well_values(to_eigen(g.per_type), a.n_steps);
        } else {
            p.initial = ControlVector::from_well_values(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(a.n_wells),
                                                                                  g.constant.value_or(0.5)),
                                                        a.n_steps);
        }
        if (!p.bounds.contains(p.initial)) throw PreconditionError("initial guess lies outside the unit cube");
    }
    return p;
}

namespace {

json header_json(const RunConfig& cfg, const Problem& p) {
    return {{"record", "run"},
            {"algorithm", to_string(cfg.algorithm)},
            {"method", method_label(cfg.algorithm)},
            {"objective", p.name},
            {"n_wells", p.initial.n_wells},
            {"n_steps", p.initial.n_steps},
            {"n_controls", p.initial.size()},
            {"seed", cfg.seed},
            {"sample_size", cfg.enopt.sample_size}};
}

json outer_json(const OuterRecord& r) {
    return {{"record", "outer"},
            {"k", r.k},
            {"control", to_std(r.control.values)},
            {"value", r.value},
            {"trial_control", to_std(r.trial_control.values)},
            {"trial_value", r.trial_value},
            {"fom_improves", r.fom_improves},
            {"criterion_scale", r.criterion_scale},
            {"trained", r.trained},
            {"training_pairs", r.training_pairs},
            {"train_loss", r.train_loss},
            {"validation_loss", r.validation_loss},
            {"inner_iterations", r.inner_iterations},
            {"inner_termination", r.inner_termination},
            {"next_control", to_std(r.next_control.values)},
            {"next_value", r.next_value},
            {"surrogate_value", r.surrogate_value},
            {"accepted", r.accepted},
            {"acceptance_scale", r.acceptance_scale},
            {"inner_fom_calls", r.inner_fom_calls},
            {"fom_evaluations", r.fom_evaluations},
            {"surrogate_evaluations", r.surrogate_evaluations}};
}

std::string aml_trace_lines(const json& header, const IterationTrace& t) {
    std::string out = header.dump() + "\n";
    for (const auto& r : t.records) out += outer_json(r).dump() + "\n";
    const json fin = {{"record", "final"},
                      {"termination", to_string(t.termination)},
                      {"terminated_at", t.terminated_at},
                      {"diagnostic", t.diagnostic},
                      {"outer_tolerance", t.outer_tolerance},
                      {"max_outer", t.max_outer},
                      {"max_inner", t.max_inner},
                      {"final_control", to_std(t.final_control.values)},
                      {"final_value", t.final_value},
                      {"fom_evaluations", t.fom_evaluations},
                      {"surrogate_evaluations", t.surrogate_evaluations},
                      {"inner_iterations", t.inner_iterations}};
    return out + fin.dump() + "\n";
}

std::string aml_timing_lines(const IterationTrace& t) {
    std::string out;
    for (const auto& r : t.records) out += json({{"k", r.k}, {"wall_seconds", r.wall_seconds}}).dump() + "\n";
    return out + json({{"record", "final"}, {"wall_seconds", t.wall_seconds}}).dump() + "\n";
}

std::string enopt_trace_lines(const json& header, const EnOptTrace& t) {
    std::string out = header.dump() + "\n";
    for (const auto& it : t.iterations) {
        out += json({{"record", "iteration"},
                     {"iteration", it.iteration},
                     {"control", to_std(it.control.values)},
                     {"value", it.value},
                     {"evaluations", it.evaluations},
                     {"contractions", it.contractions},
                     {"step_size", it.step_size}})
                   .dump() +
               "\n";
    }
    const json fin = {{"record", "final"},
                      {"termination", to_string(t.termination)},
                      {"criterion_scale", t.criterion_scale},
                      {"evaluations", t.evaluations},
                      {"best_index", t.best_index}};
    return out + fin.dump() + "\n";
}

std::string enopt_timing_lines(const EnOptTrace& t) {
    std::string out;
    for (const auto& it : t.iterations) {
        out += json({{"iteration", it.iteration}, {"wall_seconds", it.wall_seconds}}).dump() + "\n";
    }
    const double total = t.iterations.empty() ? 0.0 : t.iterations.back().wall_seconds;
    return out + json({{"record", "final"}, {"wall_seconds", total}}).dump() + "\n";
}

std::string controls_csv(const Problem& p, const ControlVector& unit_control) {
    const ControlVector u = p.to_physical(unit_control);
    std::string out = "step";
    for (const auto& n : p.control_names) out += "," + n;
    out += "\n";
    for (std::size_t i = 0; i < u.n_steps; ++i) {
        out += std::to_string(i + 1);
        for (std::size_t w = 0; w < u.n_wells; ++w) out += fmt::format(",{:.17g}", u(w, i));
        out += "\n";
    }
    return out;
}

std::string production_csv(const Problem& p, const ControlVector& initial, const ControlVector& final_control) {
    const auto& m = *p.model;
    const Eigen::VectorXd delta = discount_vector(m.econ.d_tau, m.econ.tau, m.times_days());
    std::string out = "control,step,time_days,Q_OP,Q_WP,Q_WI,Q_PI,Q_PP,J_i,discount,cumulative_npv\n";
    for (const auto& [label, x] : {std::pair{"initial", initial}, std::pair{"final", final_control}}) {
        const SimulationResult r = simulate(m, p.to_physical(x));
        const auto [value, j] = npv(r, m.econ);
        double cumulative = 0.0;
        for (Eigen::Index i = 0; i < j.size(); ++i) {
            cumulative += delta[i] * j[i];
            out += fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", label,
                               i + 1, r.times_days[i], r.q_op[i], r.q_wp[i], r.q_wi[i], r.q_pi[i], r.q_pp[i], j[i],
                               delta[i], cumulative);
        }
    }
    return out;
}

json certification_json(const CertificationReport& c, const Problem& p) {
    json j = {{"valid", c.valid},
              {"status", c.status},
              {"violations", c.violations},
              {"accepted_steps", c.accepted_steps},
              {"best_value", c.best_value}};
    if (c.best_control.size() > 0) {
        j["best_control"] = to_std(c.best_control.values);
        j["best_control_physical"] = to_std(p.to_physical(c.best_control).values);
    }
    return j;
}

json summary_json(const RunSummary& s) {
    json j = {{"method", s.method},
              {"objective", s.objective},
              {"n_controls", s.n_controls},
              {"complete", s.complete},
              {"fom_value", s.fom_value},
              {"outer_iterations", s.outer_iterations},
              {"fom_evaluations", s.fom_evaluations},
              {"total_seconds", s.total_seconds},
              {"termination", s.termination}};
    j["surrogate_value"] = s.surrogate_value ? json(*s.surrogate_value) : json(nullptr);
    j["inner_iterations"] = s.inner_iterations ? json(*s.inner_iterations) : json(nullptr);
    j["surrogate_evaluations"] = s.surrogate_evaluations ? json(*s.surrogate_evaluations) : json(nullptr);
    return j;
}

const json& header_of(const std::vector<json>& rows, const std::filesystem::path& dir) {
    if (rows.empty() || rows.front().value("record", "") != "run") {
        throw ArtifactError("trace in " + dir.string() + " has no run header");
    }
    return rows.front();
}

ControlVector control_of(const json& node, std::size_t wells, std::size_t steps) {
    const auto v = node.get<std::vector<double>>();
    if (v.empty()) return {};
    return ControlVector(to_eigen(v), wells, steps);
}

std::vector<json> read_timing(const std::filesystem::path& dir) {
    const auto p = dir / "timing.jsonl";
    if (!std::filesystem::exists(p)) return {};
    return read_jsonl(p);
}

bool status_complete(const std::filesystem::path& dir) {
    std::ifstream in(dir / "STATUS");
    std::string first;
    return in && std::getline(in, first) && first == "complete";
}

}  // namespace

IterationTrace read_aml_trace(const std::filesystem::path& dir) {
    const auto rows = read_jsonl(dir / "trace.jsonl");
    const json& h = header_of(rows, dir);
    if (h.at("algorithm").get<std::string>() == "fom-enopt") throw ArtifactError("not an AML trace: " + dir.string());
    const auto wells = h.at("n_wells").get<std::size_t>();
    const auto steps = h.at("n_steps").get<std::size_t>();
    IterationTrace t;
    bool final_seen = false;
    try {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const json& r = rows[i];
            const std::string kind = r.at("record").get<std::string>();
            if (kind == "outer") {
                OuterRecord o;
                o.k = r.at("k").get<std::size_t>();
                o.control = control_of(r.at("control"), wells, steps);
                o.value = r.at("value").get<double>();
                o.trial_control = control_of(r.at("trial_control"), wells, steps);
                o.trial_value = r.at("trial_value").get<double>();
                o.fom_improves = r.at("fom_improves").get<bool>();
                o.criterion_scale = r.at("criterion_scale").get<double>();
                o.trained = r.at("trained").get<bool>();
                o.training_pairs = r.at("training_pairs").get<std::size_t>();
                o.train_loss = r.at("train_loss").get<double>();
                o.validation_loss = r.at("validation_loss").get<double>();
                o.inner_iterations = r.at("inner_iterations").get<std::size_t>();
                o.inner_termination = r.at("inner_termination").get<std::string>();
                o.next_control = control_of(r.at("next_control"), wells, steps);
                o.next_value = r.at("next_value").get<double>();
                o.surrogate_value = r.at("surrogate_value").get<double>();
                o.accepted = r.at("accepted").get<bool>();
                o.acceptance_scale = r.at("acceptance_scale").get<double>();
                o.inner_fom_calls = r.at("inner_fom_calls").get<std::size_t>();
                o.fom_evaluations = r.at("fom_evaluations").get<std::size_t>();
                o.surrogate_evaluations = r.at("surrogate_evaluations").get<std::size_t>();
                t.records.push_back(std::move(o));
            } else if (kind == "final") {
                const std::string term = r.at("termination").get<std::string>();
                bool known = false;
                for (auto c : {AmlTermination::fom_stationary, AmlTermination::surrogate_step_rejected,
                               AmlTermination::max_outer, AmlTermination::training_failed}) {
                    if (to_string(c) == term) {
                        t.termination = c;
                        known = true;
                    }
                }
                if (!known) throw ArtifactError("unknown termination '" + term + "'");
                t.terminated_at = r.at("terminated_at").get<std::size_t>();
                t.diagnostic = r.at("diagnostic").get<std::string>();
                t.outer_tolerance = r.at("outer_tolerance").get<double>();
                t.max_outer = r.at("max_outer").get<std::size_t>();
                t.max_inner = r.at("max_inner").get<std::size_t>();
                t.final_control = control_of(r.at("final_control"), wells, steps);
                t.final_value = r.at("final_value").get<double>();
                t.fom_evaluations = r.at("fom_evaluations").get<std::size_t>();
                t.surrogate_evaluations = r.at("surrogate_evaluations").get<std::size_t>();
                t.inner_iterations = r.at("inner_iterations").get<std::size_t>();
                final_seen = true;
            }
        }
    } catch (const json::exception& e) {
        throw ArtifactError("malformed trace in " + dir.string() + ": " + e.what());
    }
    if (!final_seen) throw ArtifactError("trace in " + dir.string() + " has no final record (incomplete run)");
    for (const auto& r : read_timing(dir)) {
        if (r.contains("k")) {
            const auto k = r["k"].get<std::size_t>();
            if (k < t.records.size()) t.records[k].wall_seconds = r["wall_seconds"].get<double>();
        } else if (r.value("record", "") == "final") {
            t.wall_seconds = r["wall_seconds"].get<double>();
        }
    }
    return t;
}

EnOptTrace read_enopt_trace(const std::filesystem::path& dir) {
    const auto rows = read_jsonl(dir / "trace.jsonl");
    const json& h = header_of(rows, dir);
    if (h.at("algorithm").get<std::string>() != "fom-enopt") throw ArtifactError("not an EnOpt trace: " + dir.string());
    const auto wells = h.at("n_wells").get<std::size_t>();
    const auto steps = h.at("n_steps").get<std::size_t>();
    EnOptTrace t;
    bool final_seen = false;
    try {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const json& r = rows[i];
            const std::string kind = r.at("record").get<std::string>();
            if (kind == "iteration") {
                EnOptIteration it;
                it.iteration = r.at("iteration").get<std::size_t>();
                it.control = control_of(r.at("control"), wells, steps);
                it.value = r.at("value").get<double>();
                it.evaluations = r.at("evaluations").get<std::size_t>();
                it.contractions = r.at("contractions").get<std::size_t>();
                it.step_size = r.at("step_size").get<double>();
                t.iterations.push_back(std::move(it));
            } else if (kind == "final") {
                const std::string term = r.at("termination").get<std::string>();
                if (term == "converged") {
                    t.termination = Termination::converged;
                } else if (term == "max_iterations") {
                    t.termination = Termination::max_iterations;
                } else if (term == "stationary") {
                    t.termination = Termination::stationary;
                } else {
                    throw ArtifactError("unknown termination '" + term + "'");
                }
                t.criterion_scale = r.at("criterion_scale").get<double>();
                t.evaluations = r.at("evaluations").get<std::size_t>();
                t.best_index = r.at("best_index").get<std::size_t>();
                final_seen = true;
            }
        }
    } catch (const json::exception& e) {
        throw ArtifactError("malformed trace in " + dir.string() + ": " + e.what());
    }
    if (!final_seen) throw ArtifactError("trace in " + dir.string() + " has no final record (incomplete run)");
    for (const auto& r : read_timing(dir)) {
        if (r.contains("iteration")) {
            const auto k = r["iteration"].get<std::size_t>();
            if (k < t.iterations.size()) t.iterations[k].wall_seconds = r["wall_seconds"].get<double>();
        }
    }
    return t;
}

RunSummary summarize_run(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "trace.jsonl")) throw ArtifactError("missing trace file in " + dir.string());
    const auto rows = read_jsonl(dir / "trace.jsonl");
    const json& h = header_of(rows, dir);
    RunSummary s;
    s.method = h.at("method").get<std::string>();
    s.objective = h.at("objective").get<std::string>();
    s.n_controls = h.at("n_controls").get<std::size_t>();
    s.complete = status_complete(dir);
    if (h.at("algorithm").get<std::string>() == "fom-enopt") {
        const EnOptTrace t = read_enopt_trace(dir);
        if (t.iterations.empty()) throw ArtifactError("EnOpt trace without iterations in " + dir.string());
        s.fom_value = t.iterations.back().value;
        s.outer_iterations = t.iterations.size() - 1;
        s.fom_evaluations = t.evaluations;
        s.total_seconds = t.iterations.back().wall_seconds;
        s.termination = to_string(t.termination);
        for (const auto& r : read_timing(dir)) {
            if (r.value("record", "") == "final") s.total_seconds = r["wall_seconds"].get<double>();
        }
    } else {
        const IterationTrace t = read_aml_trace(dir);
        s.fom_value = t.final_value;
        s.outer_iterations = t.records.size();
        s.inner_iterations = t.inner_iterations;
        s.fom_evaluations = t.fom_evaluations;
        s.surrogate_evaluations = t.surrogate_evaluations;
        s.total_seconds = t.wall_seconds;
        s.termination = to_string(t.termination);
        for (auto it = t.records.rbegin(); it != t.records.rend(); ++it) {
            if (it->accepted) {
                s.surrogate_value = it->surrogate_value;
                break;
            }
        }
    }
    return s;
}

Comparison compare_summaries(const RunSummary& baseline, const RunSummary& candidate) {
    if (baseline.objective != candidate.objective || baseline.n_controls != candidate.n_controls) {
        throw ArtifactError(fmt::format("runs optimize different objectives ('{}' with {} controls vs '{}' with {})",
                                        baseline.objective, baseline.n_controls, candidate.objective,
                                        candidate.n_controls));
    }
    Comparison c{baseline, candidate};
    c.npv_ratio = baseline.fom_value != 0.0 ? candidate.fom_value / baseline.fom_value : 1.0;
    c.evaluation_ratio = candidate.fom_evaluations > 0
                             ? static_cast<double>(baseline.fom_evaluations) / static_cast<double>(candidate.fom_evaluations)
                             : 1.0;
    c.speedup = candidate.total_seconds > 0.0 ? baseline.total_seconds / candidate.total_seconds : 1.0;
    return c;
}

Comparison compare_runs(const std::filesystem::path& baseline, const std::filesystem::path& candidate) {
    const RunSummary a = summarize_run(baseline);
    const RunSummary b = summarize_run(candidate);
    if (!a.complete) throw ArtifactError("baseline run is incomplete: " + baseline.string());
    if (!b.complete) throw ArtifactError("candidate run is incomplete: " + candidate.string());
    return compare_summaries(a, b);
}

std::string format_summary_table(const std::vector<RunSummary>& rows, const std::optional<Comparison>& cmp) {
    auto opt_value = [](const std::optional<double>& v) { return v ? fmt::format("{:.4e}", *v) : std::string("-"); };
    auto opt_count = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
    std::string out = fmt::format("{:<14} {:>12} {:>15} {:>9} {:>9} {:>9} {:>15} {:>11} {:>8} {:>11}\n", "Method",
                                  "FOM value", "Surrogate value", "Outer it.", "Inner it.", "FOM eval.",
                                  "Surrogate eval.", "T_total (s)", "Speedup", "Eval. ratio");
    for (const auto& r : rows) {
        std::string speed = "-";
        std::string ratio = "-";
        if (cmp && r.method == cmp->candidate.method && r.fom_evaluations == cmp->candidate.fom_evaluations &&
            r.fom_value == cmp->candidate.fom_value) {
            speed = fmt::format("{:.2f}", cmp->speedup);
            ratio = fmt::format("{:.2f}", cmp->evaluation_ratio);
        }
        out += fmt::format("{:<14} {:>12.4e} {:>15} {:>9} {:>9} {:>9} {:>15} {:>11.2f} {:>8} {:>11}{}\n", r.method,
                           r.fom_value, opt_value(r.surrogate_value), r.outer_iterations, opt_count(r.inner_iterations),
                           r.fom_evaluations, opt_count(r.surrogate_evaluations), r.total_seconds, speed, ratio,
                           r.complete ? "" : "  [incomplete]");
    }
    if (cmp) out += fmt::format("NPV ratio (candidate / baseline): {:.4f}\n", cmp->npv_ratio);
    return out;
}

std::string comparison_json(const Comparison& c) {
    const json j = {{"baseline", summary_json(c.baseline)},
                    {"candidate", summary_json(c.candidate)},
                    {"npv_ratio", c.npv_ratio},
                    {"evaluation_ratio", c.evaluation_ratio},
                    {"speedup", c.speedup}};
    return j.dump(2) + "\n";
}

RunOutcome run_experiment(const RunConfig& cfg_in, const std::filesystem::path& out) {
    RunConfig cfg = cfg_in;
    cfg.enopt.rng_seed = cfg.seed;
    cfg.enopt.workers = cfg.workers;
    cfg.aml.trainer.rng_seed = cfg.seed;
    cfg.aml.trainer.workers = cfg.workers;
    cfg.aml.construction = cfg.algorithm == Algorithm::aml_enopt_s ? Construction::scalar : Construction::vector;
    cfg.aml.enopt = cfg.enopt;

    std::filesystem::create_directories(out);
    for (const char* stale : {"trace.jsonl", "timing.jsonl", "summary.json", "summary.txt", "controls.csv",
                              "production.csv", "certification.json", "comparison.json"}) {
        std::filesystem::remove(out / stale);
    }
    write_text(out / "STATUS", "incomplete\nrunning\n");
    try {
        const Problem p = build_problem(cfg);
        write_text(out / "config.json", serialize_run_config(cfg));
        const json header = header_json(cfg, p);
        spdlog::info("{} on {} ({} controls, seed {})", to_string(cfg.algorithm), p.name, p.initial.size(), cfg.seed);

        RunOutcome outcome;
        outcome.directory = out;
        ControlVector final_control;
        if (cfg.algorithm == Algorithm::fom_enopt) {
            EnOptState state;
            state.scale = CriterionScale::running();
            const EnOptResult r = enopt(*p.objective, p.initial, cfg.enopt, p.bounds, std::move(state));
            write_text(out / "trace.jsonl", enopt_trace_lines(header, r.trace));
            write_text(out / "timing.jsonl", enopt_timing_lines(r.trace));
            final_control = r.control;
            outcome.value = r.value;
            outcome.fom_evaluations = r.trace.evaluations;
            outcome.termination = to_string(r.trace.termination);
        } else {
            const AmlResult r = aml_enopt(*p.objective, p.initial, cfg.aml, p.bounds);
            write_text(out / "trace.jsonl", aml_trace_lines(header, r.trace));
            write_text(out / "timing.jsonl", aml_timing_lines(r.trace));
            const CertificationReport cert = certify(read_aml_trace(out));
            write_text(out / "certification.json", certification_json(cert, p).dump(2) + "\n");
            final_control = r.control;
            outcome.value = r.value;
            outcome.fom_evaluations = r.trace.fom_evaluations;
            outcome.termination = to_string(r.trace.termination);
            outcome.certified = cert.valid;
            if (!cert.valid) spdlog::error("certification failed: {} violations", cert.violations.size());
        }
        write_text(out / "controls.csv", controls_csv(p, final_control));
        if (p.model) write_text(out / "production.csv", production_csv(p, p.initial, final_control));

        RunSummary summary = summarize_run(out);
        summary.complete = true;
        std::vector<RunSummary> rows;
        std::optional<Comparison> cmp;
        if (!cfg.baseline.empty()) {
            const std::filesystem::path base_dir(cfg.baseline);
            cmp = compare_summaries(summarize_run(base_dir), summary);
            rows.push_back(cmp->baseline);
            write_text(out / "comparison.json", comparison_json(*cmp));
        }
        rows.push_back(summary);
        write_text(out / "summary.json", summary_json(summary).dump(2) + "\n");
        write_text(out / "summary.txt", format_summary_table(rows, cmp));
        write_text(out / "STATUS", "complete\n");
        spdlog::info("finished: J = {:.6e}, {} FOM evaluations, {}", outcome.value, outcome.fom_evaluations,
                     outcome.termination);
        return outcome;
    } catch (const std::exception& e) {
        write_text(out / "STATUS", std::string("incomplete\n") + e.what() + "\n");
        throw;
    }
}

void emit_plot_data(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
    if (runs.empty()) throw ParameterError("emit-plots needs at least one run directory");
    std::string npv = "run,method,iteration,fom_value,surrogate_value,fom_evaluations\n";
    std::string controls = "run,method,control,step,value\n";
    std::string production;
    for (const auto& dir : runs) {
        if (!status_complete(dir)) throw ArtifactError("run is incomplete: " + dir.string());
        const RunSummary s = summarize_run(dir);
        const std::string label = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
        if (s.method == "FOM-EnOpt") {
            for (const auto& it : read_enopt_trace(dir).iterations) {
                npv += fmt::format("{},{},{},{:.17g},,{}\n", label, s.method, it.iteration, it.value, it.evaluations);
            }
        } else {
            const IterationTrace t = read_aml_trace(dir);
            for (std::size_t i = 0; i < t.records.size(); ++i) {
                const auto& r = t.records[i];
                const std::string sur = i > 0 ? fmt::format("{:.17g}", t.records[i - 1].surrogate_value) : "";
                npv += fmt::format("{},{},{},{:.17g},{},{}\n", label, s.method, r.k, r.value, sur, r.fom_evaluations);
            }
        }
        std::ifstream in(dir / "controls.csv");
        if (!in) throw ArtifactError("missing controls.csv in " + dir.string());
        std::string line;
        std::getline(in, line);
        std::vector<std::string> names;
        {
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            while (std::getline(ss, cell, ',')) names.push_back(cell);
        }
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string step, cell;
            std::getline(ss, step, ',');
            for (const auto& n : names) {
                std::getline(ss, cell, ',');
                controls += fmt::format("{},{},{},{},{}\n", label, s.method, n, step, cell);
            }
        }
        std::ifstream prod(dir / "production.csv");
        if (prod) {
            std::getline(prod, line);
            if (production.empty()) production = "run,method," + line + "\n";
            while (std::getline(prod, line)) production += label + "," + s.method + "," + line + "\n";
        }
    }
    std::filesystem::create_directories(out);
    write_text(out / "npv_iterations.csv", npv);
    write_text(out / "controls.csv", controls);
    if (!production.empty()) write_text(out / "production.csv", production);
}

DeckReport check_deck(const std::filesystem::path& deck, double injector_rate, double concentration,
                      double producer_rate) {
    const ReservoirModel m = load_deck(deck);
    DeckReport r;
    r.name = m.name;
    r.cells = m.cells();
    r.wells = m.wells.size();
    r.controls = m.control_types() * m.n_steps();
    r.pore_volume = m.porosity.sum() * m.dx * m.dy * m.dz;
    const ControlVector u = constant_controls(m, injector_rate, concentration, producer_rate);
    if (!m.control_bounds().contains(u)) throw PreconditionError("check controls lie outside the deck's bounds");
    const SimulationResult s = simulate(m, u);
    r.value = npv(s, m.econ).first;
    r.water_residual = s.water_residual;
    r.polymer_residual = s.polymer_residual;
    r.min_saturation = s.min_saturation;
    r.max_saturation = s.max_saturation;
    r.conservative = r.water_residual < 1e-8 && r.polymer_residual < 1e-6 && r.min_saturation >= -1e-9 &&
                     r.max_saturation <= 1.0 + 1e-9;
    return r;
}

}  // namespace amlopt
