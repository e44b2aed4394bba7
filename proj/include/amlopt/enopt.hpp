#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/covariance.hpp"
#include "amlopt/objective.hpp"

namespace amlopt {

/// Unit in which the tolerances of the improvement tests are expressed.
///
/// raw: differences are compared directly. fixed: differences are divided by a
/// given scale. running: divided by (max - min) of every objective value
/// observed so far, which is how tolerances act on "scaled" objective values.
class CriterionScale {
public:
    enum class Mode { raw, fixed, running };

    static CriterionScale raw() { return CriterionScale(Mode::raw, 1.0); }
    static CriterionScale fixed(double scale);
    static CriterionScale running() { return CriterionScale(Mode::running, 1.0); }

    void observe(double value);
    double scale() const;
    Mode mode() const { return mode_; }

    /// candidate > reference + eps, with eps measured in scaled units.
    bool improves(double candidate, double reference, double eps) const {
        return candidate - reference > eps * scale();
    }

private:
    CriterionScale(Mode mode, double scale) : mode_(mode), fixed_(scale) {}

    Mode mode_;
    double fixed_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    bool seen_ = false;
};

struct EnOptConfig {
    std::size_t sample_size = 100;     // N
    double tolerance = 1e-6;           // epsilon, also used by the line search
    std::size_t max_iterations = 100;  // k*
    double initial_step = 0.3;         // beta
    double step_contraction = 0.5;     // r
    std::size_t max_step_trials = 10;  // nu*
    std::uint64_t rng_seed = 0;

    // Initial AR(1) covariance and its rank-one adaptation.
    double sigma = 0.001;
    Eigen::VectorXd sigmas;  // per well; overrides `sigma` when non-empty
    double correlation = 0.9;
    double mixing = 0.1;

    std::size_t workers = 1;

    void validate() const;
    Eigen::VectorXd sigma_vector(std::size_t n_wells) const;
};

/// Training pair produced by an optimization step.
struct SamplePair {
    ControlVector control;
    Evaluation value;
};

/// Memoized objective values keyed by the exact bit pattern of the control.
class EvaluationCache {
public:
    const Evaluation* find(const ControlVector& u) const;
    void store(const ControlVector& u, const Evaluation& e);
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::vector<std::uint64_t>, Evaluation> entries_;
};

/// Mutable optimizer state threaded through consecutive optimization steps.
struct EnOptState {
    std::optional<CovarianceMatrix> covariance;
    std::optional<ControlVector> last_center;
    EvaluationCache cache;
    CriterionScale scale = CriterionScale::raw();
    std::size_t samples_drawn = 0;     // ensembles sampled so far; selects the RNG stream
    std::size_t evaluations = 0;       // objective calls issued through this state
    std::size_t failed_evaluations = 0;
};

/// Cached evaluation; counts a real call in state.evaluations on a miss.
Evaluation evaluate_cached(Objective& f, const ControlVector& u, EnOptState& state);

/// (1/(N-1)) sum_m (u_m - u_k)(F(u_m) - F(u_k)).
Eigen::VectorXd cross_covariance(const ControlVector& mean, const PerturbationEnsemble& ensemble,
                                 const Eigen::VectorXd& values, double mean_value);

/// ccov / |ccov|_inf. Throws StationaryEnsembleError on a zero vector.
Eigen::VectorXd search_direction(const Eigen::VectorXd& ccov);

struct LineSearchResult {
    ControlVector control;
    double value = 0.0;
    double step_size = 0.0;
    std::size_t contractions = 0;
};

/// Backtracking: try project(u + beta d); contract beta by r while the gain is
/// not above tolerance and fewer than nu* contractions were made. The last
/// trial is returned even when it does not improve.
LineSearchResult line_search(Objective& f, const ControlVector& u, const Eigen::VectorXd& direction,
                             const EnOptConfig& cfg, const ControlBounds& bounds, EnOptState& state);

struct OptStepOutcome {
    ControlVector next_control;
    double next_value = 0.0;
    double current_value = 0.0;
    std::vector<SamplePair> training_pairs;
    Eigen::VectorXd direction;
    std::size_t contractions = 0;
    double step_size = 0.0;
    std::size_t new_evaluations = 0;
    std::size_t failed_members = 0;
    bool stationary = false;
};

/// One ensemble optimization step from u_k.
OptStepOutcome opt_step(Objective& f, const ControlVector& u, std::size_t k, const EnOptConfig& cfg,
                        const ControlBounds& bounds, EnOptState& state);

enum class Termination { converged, max_iterations, stationary };
std::string to_string(Termination t);

struct EnOptIteration {
    std::size_t iteration = 0;
    ControlVector control;
    double value = 0.0;
    std::size_t evaluations = 0;  // cumulative
    std::size_t contractions = 0;  // line-search contractions that produced this iterate
    double step_size = 0.0;
    double wall_seconds = 0.0;
};

struct EnOptTrace {
    std::vector<EnOptIteration> iterations;
    Termination termination = Termination::converged;
    double criterion_scale = 1.0;
    std::size_t evaluations = 0;
    std::size_t best_index = 0;

    const EnOptIteration& best() const { return iterations.at(best_index); }
};

struct EnOptResult {
    ControlVector control;  // last iterate
    double value = 0.0;
    EnOptTrace trace;
    EnOptState state;
};

/// Outer EnOpt loop: iterate opt_step while F(u_k) > F(u_{k-1}) + eps and k < k*.
EnOptResult enopt(Objective& f, const ControlVector& u0, const EnOptConfig& cfg, const ControlBounds& bounds,
                  EnOptState state = {});

}  // namespace amlopt
