#include "amlopt/enopt.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <spdlog/spdlog.h>

#include "amlopt/errors.hpp"
#include "amlopt/parallel.hpp"
#include "amlopt/seeding.hpp"

namespace amlopt {

CriterionScale CriterionScale::fixed(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("criterion scale must be positive and finite");
    return CriterionScale(Mode::fixed, scale);
}

void CriterionScale::observe(double value) {
    if (!std::isfinite(value)) return;
    if (!seen_) {
        lo_ = hi_ = value;
        seen_ = true;
        return;
    }
    lo_ = std::min(lo_, value);
    hi_ = std::max(hi_, value);
}

double CriterionScale::scale() const {
    switch (mode_) {
        case Mode::raw: return 1.0;
        case Mode::fixed: return fixed_;
        case Mode::running: return (seen_ && hi_ > lo_) ? hi_ - lo_ : 1.0;
    }
    return 1.0;
}

void EnOptConfig::validate() const {
    if (sample_size < 2) throw ParameterError("sample size must be at least 2");
    if (!(tolerance > 0.0)) throw ParameterError("tolerance must be positive");
    if (max_iterations < 1) throw ParameterError("max_iterations must be at least 1");
    if (!(initial_step > 0.0)) throw ParameterError("initial step must be positive");
    if (!(step_contraction > 0.0 && step_contraction < 1.0)) throw ParameterError("step contraction must lie in (0,1)");
    if (!(mixing > 0.0 && mixing < 1.0)) throw ParameterError("covariance mixing must lie in (0,1)");
    if (!(correlation > -1.0 && correlation < 1.0)) throw ParameterError("correlation must lie in (-1,1)");
    if (sigmas.size() == 0 && !(sigma > 0.0)) throw ParameterError("sigma must be positive");
}

Eigen::VectorXd EnOptConfig::sigma_vector(std::size_t n_wells) const {
    if (sigmas.size() == 0) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_wells), sigma);
    if (static_cast<std::size_t>(sigmas.size()) != n_wells) throw StructuralError("need one sigma per well");
    return sigmas;
}

namespace {

std::vector<std::uint64_t> key_of(const ControlVector& u) {
    std::vector<std::uint64_t> key;
    key.reserve(u.size() + 1);
    key.push_back(u.n_wells);
    for (Eigen::Index i = 0; i < u.values.size(); ++i) key.push_back(std::bit_cast<std::uint64_t>(u.values[i]));
    return key;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const Evaluation* EvaluationCache::find(const ControlVector& u) const {
    auto it = entries_.find(key_of(u));
    return it == entries_.end() ? nullptr : &it->second;
}

void EvaluationCache::store(const ControlVector& u, const Evaluation& e) { entries_.insert_or_assign(key_of(u), e); }

Evaluation evaluate_cached(Objective& f, const ControlVector& u, EnOptState& state) {
    if (const auto* hit = state.cache.find(u)) return *hit;
    Evaluation e = f.evaluate_full(u);
    ++state.evaluations;
    state.cache.store(u, e);
    state.scale.observe(e.value);
    return e;
}

Eigen::VectorXd cross_covariance(const ControlVector& mean, const PerturbationEnsemble& ensemble,
                                 const Eigen::VectorXd& values, double mean_value) {
    const std::size_t n = ensemble.size();
    if (n < 2) throw ParameterError("cross-covariance needs at least two ensemble members");
    if (static_cast<std::size_t>(values.size()) != n) throw StructuralError("one value per ensemble member required");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(mean.values.size());
    for (std::size_t m = 0; m < n; ++m) {
        const auto& member = ensemble.members[m];
        if (member.size() != mean.size()) throw StructuralError("ensemble member has wrong dimension");
        acc += (member.values - mean.values) * (values[static_cast<Eigen::Index>(m)] - mean_value);
    }
    return acc / static_cast<double>(n - 1);
}

Eigen::VectorXd search_direction(const Eigen::VectorXd& ccov) {
    const double norm = ccov.size() ? ccov.lpNorm<Eigen::Infinity>() : 0.0;
    if (!(norm > 0.0)) throw StationaryEnsembleError("ensemble cross-covariance is zero");
    return ccov / norm;
}

LineSearchResult line_search(Objective& f, const ControlVector& u, const Eigen::VectorXd& direction,
                             const EnOptConfig& cfg, const ControlBounds& bounds, EnOptState& state) {
    if (direction.size() != u.values.size()) throw StructuralError("direction has wrong dimension");
    const double base = evaluate_cached(f, u, state).value;

    auto trial = [&](double beta) {
        LineSearchResult r;
        r.step_size = beta;
        r.control = project(ControlVector(u.values + beta * direction, u.n_wells, u.n_steps), bounds);
        try {
            r.value = evaluate_cached(f, r.control, state).value;
        } catch (const SimulationError& e) {
            ++state.failed_evaluations;
            spdlog::warn("line-search trial failed ({}); treating as non-improving", e.what());
            r.value = -std::numeric_limits<double>::infinity();
        }
        return r;
    };

    LineSearchResult r = trial(cfg.initial_step);
    std::size_t nu = 0;
    while (!state.scale.improves(r.value, base, cfg.tolerance) && nu < cfg.max_step_trials) {
        r = trial(r.step_size * cfg.step_contraction);
        ++nu;
    }
    r.contractions = nu;
    if (!std::isfinite(r.value)) {
        r.control = u;
        r.value = base;
    }
    return r;
}

OptStepOutcome opt_step(Objective& f, const ControlVector& u, std::size_t k, const EnOptConfig& cfg,
                        const ControlBounds& bounds, EnOptState& state) {
    cfg.validate();
    bounds.check_against(u);
    if (!bounds.contains(u)) throw PreconditionError("opt_step: current control is not admissible");

    const std::size_t evals_before = state.evaluations;
    if (!state.covariance) {
        state.covariance = build_initial_covariance(cfg.sigma_vector(u.n_wells), cfg.correlation, u.n_wells, u.n_steps);
    } else if (state.last_center && state.last_center->size() == u.size()) {
        state.covariance = adapt_covariance(*state.covariance, u.values - state.last_center->values, cfg.mixing);
    }
    state.covariance->iteration = k;
    state.last_center = u;

    const std::uint64_t seed = derive_seed(cfg.rng_seed, seed_purpose::ensemble, state.samples_drawn++);
    PerturbationEnsemble ensemble = sample_ensemble(u, *state.covariance, cfg.sample_size, bounds, seed);

    OptStepOutcome out;
    out.current_value = evaluate_cached(f, u, state).value;

    // Ensemble members go through the objective concurrently; cache bookkeeping
    // happens afterwards in index order so the state stays deterministic.
    const std::size_t n = ensemble.size();
    std::vector<std::optional<Evaluation>> results(n);
    std::vector<char> cached(n, 0);
    for (std::size_t m = 0; m < n; ++m) {
        if (const auto* hit = state.cache.find(ensemble.members[m])) {
            results[m] = *hit;
            cached[m] = 1;
        }
    }
    parallel_for(n, cfg.workers, [&](std::size_t m) {
        if (cached[m]) return;
        try {
            results[m] = f.evaluate_full(ensemble.members[m]);
        } catch (const SimulationError& e) {
            spdlog::warn("ensemble member {} failed: {}", m, e.what());
        }
    });

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t m = 0; m < n; ++m) {
        if (!cached[m]) ++state.evaluations;
        if (!results[m]) continue;
        if (!cached[m]) {
            state.cache.store(ensemble.members[m], *results[m]);
            state.scale.observe(results[m]->value);
        }
        lo = std::min(lo, results[m]->value);
        hi = std::max(hi, results[m]->value);
    }
    if (!std::isfinite(lo)) throw SimulationError("every ensemble member failed to evaluate");

    Eigen::VectorXd values(static_cast<Eigen::Index>(n));
    out.training_pairs.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        if (!results[m]) {
            const double unit = hi > lo ? hi - lo : state.scale.scale();
            results[m] = Evaluation{lo - unit, {}};
            ++out.failed_members;
            ++state.failed_evaluations;
        }
        values[static_cast<Eigen::Index>(m)] = results[m]->value;
        out.training_pairs.push_back({ensemble.members[m], *results[m]});
    }

    const Eigen::VectorXd ccov = cross_covariance(u, ensemble, values, out.current_value);
    try {
        out.direction = search_direction(ccov);
    } catch (const StationaryEnsembleError&) {
        out.stationary = true;
        out.next_control = u;
        out.next_value = out.current_value;
        out.new_evaluations = state.evaluations - evals_before;
        return out;
    }

    LineSearchResult ls = line_search(f, u, out.direction, cfg, bounds, state);
    out.next_control = std::move(ls.control);
    out.next_value = ls.value;
    out.contractions = ls.contractions;
    out.step_size = ls.step_size;
    out.new_evaluations = state.evaluations - evals_before;
    return out;
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::max_iterations: return "max_iterations";
        case Termination::stationary: return "stationary";
    }
    return "unknown";
}

EnOptResult enopt(Objective& f, const ControlVector& u0, const EnOptConfig& cfg, const ControlBounds& bounds,
                  EnOptState state) {
    cfg.validate();
    if (!bounds.contains(u0)) throw PreconditionError("enopt: initial guess is not admissible");
    const auto t0 = std::chrono::steady_clock::now();

    EnOptResult res;
    auto& rows = res.trace.iterations;
    const double v0 = evaluate_cached(f, u0, state).value;
    rows.push_back({0, u0, v0, state.evaluations, 0, 0.0, seconds_since(t0)});

    std::size_t k = 0;
    ControlVector current = u0;
    double current_value = v0;
    Termination why = Termination::converged;
    while (true) {
        OptStepOutcome step = opt_step(f, current, k, cfg, bounds, state);
        if (step.stationary) {
            why = Termination::stationary;
            break;
        }
        const double prev_value = current_value;
        current = std::move(step.next_control);
        current_value = step.next_value;
        ++k;
        rows.push_back({k, current, current_value, state.evaluations, step.contractions, step.step_size,
                        seconds_since(t0)});
        if (!state.scale.improves(current_value, prev_value, cfg.tolerance)) {
            why = Termination::converged;
            break;
        }
        if (k >= cfg.max_iterations) {
            why = Termination::max_iterations;
            break;
        }
    }

    res.trace.termination = why;
    res.trace.criterion_scale = state.scale.scale();
    res.trace.evaluations = state.evaluations;
    res.trace.best_index = static_cast<std::size_t>(
        std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.value < b.value; }) -
        rows.begin());
    res.control = current;
    res.value = current_value;
    res.state = std::move(state);
    return res;
}

}  // namespace amlopt
