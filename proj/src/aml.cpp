#include "amlopt/aml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "amlopt/errors.hpp"
#include "amlopt/seeding.hpp"

namespace amlopt {

std::string to_string(Construction c) { return c == Construction::scalar ? "DNN_s" : "DNN_v"; }

Construction construction_from_string(const std::string& s) {
    if (s == "DNN_s" || s == "scalar" || s == "s") return Construction::scalar;
    if (s == "DNN_v" || s == "vector" || s == "v") return Construction::vector;
    throw ParameterError("unknown surrogate construction '" + s + "'");
}

std::string to_string(AmlTermination t) {
    switch (t) {
        case AmlTermination::fom_stationary: return "fom_stationary";
        case AmlTermination::surrogate_step_rejected: return "surrogate_step_rejected";
        case AmlTermination::max_outer: return "max_outer";
        case AmlTermination::training_failed: return "training_failed";
    }
    return "unknown";
}

void AmlConfig::validate() const {
    if (!(outer_tolerance > 0.0)) throw ParameterError("outer tolerance must be positive");
    if (!(inner_tolerance > 0.0)) throw ParameterError("inner tolerance must be positive");
    if (max_inner == 0) throw ParameterError("max_inner must be positive");
    if (hidden_layers.empty()) throw ParameterError("at least one hidden layer is required");
    for (auto n : hidden_layers) {
        if (n == 0) throw ParameterError("hidden layers must have at least one neuron");
    }
    trainer.validate();
    enopt.validate();
    if (outer_tolerance < inner_tolerance) {
        spdlog::warn("outer tolerance {} is smaller than inner tolerance {}", outer_tolerance, inner_tolerance);
    }
}

namespace {

std::vector<RawPair> to_training_data(const std::vector<SamplePair>& pairs, Construction c) {
    std::vector<RawPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (c == Construction::scalar) {
            out.emplace_back(p.control, Eigen::VectorXd::Constant(1, p.value.value));
        } else {
            if (p.value.components.size() == 0) {
                throw SimulationError("ensemble member without per-step values cannot train a vector surrogate");
            }
            out.emplace_back(p.control, p.value.components);
        }
    }
    return out;
}

double value_range(const std::vector<SamplePair>& pairs) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : pairs) {
        lo = std::min(lo, p.value.value);
        hi = std::max(hi, p.value.value);
    }
    return hi > lo ? hi - lo : 1.0;
}

}  // namespace

AmlResult aml_enopt(Objective& fom, const ControlVector& u0, const AmlConfig& cfg, const ControlBounds& bounds,
                    const TrainingObserver& observer) {
    cfg.validate();
    bounds.check_against(u0);
    if (!bounds.contains(u0)) throw PreconditionError("aml_enopt: initial guess is not admissible");
    Eigen::VectorXd delta;
    if (cfg.construction == Construction::vector) {
        if (!fom.has_components()) {
            throw ParameterError("DNN_v construction needs an objective exposing per-step values");
        }
        delta = fom.discount();
        if (delta.size() == 0) throw ParameterError("objective exposes components but no discount vector");
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    EnOptState state;
    state.scale = cfg.outer_scaling == CriterionScale::Mode::running ? CriterionScale::running() : CriterionScale::raw();

    NetworkArchitecture arch;
    arch.activation = cfg.activation;
    arch.layer_sizes.push_back(u0.size());
    arch.layer_sizes.insert(arch.layer_sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    arch.layer_sizes.push_back(cfg.construction == Construction::scalar ? 1 : static_cast<std::size_t>(delta.size()));

    AmlResult result;
    IterationTrace& trace = result.trace;
    trace.outer_tolerance = cfg.outer_tolerance;
    trace.max_outer = cfg.max_outer;
    trace.max_inner = cfg.max_inner;

    ControlVector u = u0;
    double ju = evaluate_cached(fom, u, state).value;
    OptStepOutcome step = opt_step(fom, u, 0, cfg.enopt, bounds, state);
    std::vector<SamplePair> pairs = step.training_pairs;
    std::size_t surrogate_evals = 0;
    std::size_t k = 0;

    while (true) {
        OuterRecord rec;
        rec.k = k;
        rec.control = u;
        rec.value = ju;
        rec.trial_control = step.next_control;
        rec.trial_value = step.next_value;
        rec.criterion_scale = state.scale.scale();
        rec.fom_improves = !step.stationary && state.scale.improves(step.next_value, ju, cfg.outer_tolerance);

        auto close = [&](AmlTermination why) {
            rec.fom_evaluations = state.evaluations;
            rec.surrogate_evaluations = surrogate_evals;
            rec.wall_seconds = elapsed();
            trace.records.push_back(std::move(rec));
            trace.termination = why;
            trace.terminated_at = k;
        };

        if (!rec.fom_improves) {
            close(AmlTermination::fom_stationary);
            break;
        }
        if (k >= cfg.max_outer) {
            close(AmlTermination::max_outer);
            break;
        }

        const std::vector<RawPair> data = to_training_data(pairs, cfg.construction);
        TrainerConfig tcfg = cfg.trainer;
        tcfg.rng_seed = derive_seed(cfg.trainer.rng_seed, seed_purpose::training, k);
        TrainedNetwork net;
        try {
            net = train(data, arch, tcfg, bounds);
        } catch (const NumericalError& e) {
            trace.diagnostic = fmt::format("surrogate training failed at outer iteration {}: {}", k, e.what());
            spdlog::error(trace.diagnostic);
            close(AmlTermination::training_failed);
            break;
        }
        if (observer) observer(k, data, net);
        rec.trained = true;
        rec.training_pairs = data.size();
        rec.train_loss = net.report.best_train_mean();
        rec.validation_loss = net.report.best_validation_mean();

        const auto variant = cfg.construction == Construction::scalar ? SurrogateVariant::scalar : SurrogateVariant::vector;
        auto surrogate = make_surrogate(net.network, variant, delta, bounds, net.output_scaling);

        EnOptConfig icfg = cfg.enopt;
        icfg.tolerance = cfg.inner_tolerance;
        icfg.max_iterations = cfg.max_inner;
        icfg.rng_seed = derive_seed(cfg.enopt.rng_seed, seed_purpose::inner_run, k);
        icfg.workers = 1;
        EnOptState istate;
        istate.covariance = state.covariance;
        istate.last_center = state.last_center;
        istate.scale = CriterionScale::fixed(value_range(pairs));

        const std::size_t fom_calls_before = fom.evaluation_count();
        EnOptResult inner = enopt(*surrogate, u, icfg, bounds, std::move(istate));
        rec.inner_fom_calls = fom.evaluation_count() - fom_calls_before;
        surrogate_evals += surrogate->evaluation_count();
        rec.inner_iterations = inner.trace.iterations.size() - 1;
        rec.inner_termination = to_string(inner.trace.termination);
        trace.inner_iterations += rec.inner_iterations;
        rec.next_control = inner.control;
        rec.surrogate_value = inner.value;

        rec.next_value = evaluate_cached(fom, rec.next_control, state).value;
        rec.acceptance_scale = state.scale.scale();
        rec.accepted = state.scale.improves(rec.next_value, ju, cfg.outer_tolerance);
        if (!rec.accepted) {
            close(AmlTermination::surrogate_step_rejected);
            break;
        }

        u = rec.next_control;
        ju = rec.next_value;
        rec.fom_evaluations = state.evaluations;
        rec.surrogate_evaluations = surrogate_evals;
        rec.wall_seconds = elapsed();
        trace.records.push_back(std::move(rec));

        step = opt_step(fom, u, k + 1, cfg.enopt, bounds, state);
        if (cfg.accumulate_training_data) {
            pairs.insert(pairs.end(), step.training_pairs.begin(), step.training_pairs.end());
        } else {
            pairs = step.training_pairs;
        }
        ++k;
    }

    trace.final_control = u;
    trace.final_value = ju;
    trace.fom_evaluations = state.evaluations;
    trace.surrogate_evaluations = surrogate_evals;
    trace.wall_seconds = elapsed();
    result.control = u;
    result.value = ju;
    return result;
}

CertificationReport certify(const IterationTrace& trace) {
    CertificationReport rep;
    auto fail = [&](std::string msg) {
        rep.valid = false;
        rep.violations.push_back(std::move(msg));
    };
    const auto& rows = trace.records;
    if (rows.empty()) {
        fail("trace has no outer iterations");
        rep.status = "empty";
        return rep;
    }

    const double eps = trace.outer_tolerance;
    rep.best_value = -std::numeric_limits<double>::infinity();
    auto consider = [&](double v, const ControlVector& u) {
        if (u.size() > 0 && v > rep.best_value) {
            rep.best_value = v;
            rep.best_control = u;
        }
    };

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const bool last = i + 1 == rows.size();
        consider(r.value, r.control);
        consider(r.trial_value, r.trial_control);
        if (r.trained) consider(r.next_value, r.next_control);

        if (r.k != i) fail(fmt::format("row {} records outer index {}", i, r.k));
        if (r.accepted) {
            ++rep.accepted_steps;
            if (!r.trained) fail(fmt::format("k={}: step accepted without a trained surrogate", r.k));
            if (!(r.next_value - r.value > eps * r.acceptance_scale)) {
                fail(fmt::format("k={}: accepted step does not increase J by more than eps_o ({} -> {})", r.k, r.value,
                                 r.next_value));
            }
        }
        if (r.fom_improves != (r.trial_value - r.value > eps * r.criterion_scale)) {
            fail(fmt::format("k={}: recorded FOM stopping flag disagrees with the recorded values", r.k));
        }
        if (r.inner_fom_calls != 0) fail(fmt::format("k={}: {} FOM calls inside the inner loop", r.k, r.inner_fom_calls));
        if (trace.max_inner && r.inner_iterations > trace.max_inner) {
            fail(fmt::format("k={}: inner iterations exceed the cap", r.k));
        }
        if (!last) {
            if (!r.accepted) fail(fmt::format("k={}: iteration continued after a rejected step", r.k));
            const auto& n = rows[i + 1];
            if (n.control.values != r.next_control.values || n.value != r.next_value) {
                fail(fmt::format("k={}: next iterate does not match the accepted inner result", r.k));
            }
            if (n.fom_evaluations < r.fom_evaluations || n.surrogate_evaluations < r.surrogate_evaluations) {
                fail(fmt::format("k={}: cumulative counters decrease", r.k));
            }
        }
    }
    if (trace.max_outer && rows.back().k > trace.max_outer) fail("outer iterations exceed the cap");

    const auto& last = rows.back();
    switch (trace.termination) {
        case AmlTermination::fom_stationary:
            rep.status = "FOM-stationary";
            if (last.fom_improves) fail("run marked FOM-stationary but the last FOM step improved");
            break;
        case AmlTermination::surrogate_step_rejected:
            rep.status = fmt::format("surrogate-step-rejected at k={}", last.k);
            if (!last.trained || last.accepted) fail("run marked rejected but the last step was not a rejected step");
            break;
        case AmlTermination::max_outer:
            rep.status = "max-outer-iterations";
            if (last.k < trace.max_outer) fail("run marked max-outer before reaching the cap");
            break;
        case AmlTermination::training_failed:
            rep.status = fmt::format("training-failed at k={}", last.k);
            break;
    }
    if (trace.final_control.size() > 0 &&
        (trace.final_control.values != last.control.values || trace.final_value != last.value)) {
        fail("returned control is not the last certified iterate");
    }
    return rep;
}

}  // namespace amlopt
