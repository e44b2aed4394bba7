#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/enopt.hpp"
#include "amlopt/objective.hpp"
#include "amlopt/surrogate.hpp"

namespace amlopt {

enum class Construction { scalar, vector };  // DNN_s, DNN_v
std::string to_string(Construction c);
Construction construction_from_string(const std::string& s);

struct AmlConfig {
    double outer_tolerance = 1e-2;  // epsilon_o
    double inner_tolerance = 1e-6;  // epsilon_i
    std::size_t max_outer = 100;    // k_o*
    std::size_t max_inner = 100;    // k_i*
    Construction construction = Construction::vector;
    TrainerConfig trainer;
    std::vector<std::size_t> hidden_layers{25, 25};
    Activation activation = Activation::tanh;
    EnOptConfig enopt;  // beta, r, nu*, N, covariance; shared by outer and inner steps
    bool accumulate_training_data = false;
    // Outer criteria divide by the running FOM range; raw compares unscaled values.
    CriterionScale::Mode outer_scaling = CriterionScale::Mode::running;

    void validate() const;
};

/// One outer iteration k of the adaptive loop.
struct OuterRecord {
    std::size_t k = 0;
    ControlVector control;        // u_k
    double value = 0.0;           // J(u_k)
    ControlVector trial_control;  // u~_k from OptStep[J] at u_k
    double trial_value = 0.0;     // J(u~_k)
    bool fom_improves = false;    // J(u~_k) > J(u_k) + eps_o
    double criterion_scale = 1.0;

    // Set when a surrogate was trained at this iteration.
    bool trained = false;
    std::size_t training_pairs = 0;
    double train_loss = 0.0;       // per-sample mean of the selected restart
    double validation_loss = 0.0;
    std::size_t inner_iterations = 0;
    std::string inner_termination;
    ControlVector next_control;    // u_{k+1}
    double next_value = 0.0;       // J(u_{k+1})
    double surrogate_value = 0.0;  // J_ML^k(u_{k+1})
    bool accepted = false;         // J(u_{k+1}) > J(u_k) + eps_o
    double acceptance_scale = 1.0;
    std::size_t inner_fom_calls = 0;  // FOM counter change across the inner run

    std::size_t fom_evaluations = 0;        // cumulative
    std::size_t surrogate_evaluations = 0;  // cumulative
    double wall_seconds = 0.0;
};

enum class AmlTermination { fom_stationary, surrogate_step_rejected, max_outer, training_failed };
std::string to_string(AmlTermination t);

struct IterationTrace {
    std::vector<OuterRecord> records;
    AmlTermination termination = AmlTermination::fom_stationary;
    std::size_t terminated_at = 0;
    std::string diagnostic;
    double outer_tolerance = 0.0;
    std::size_t max_outer = 0;
    std::size_t max_inner = 0;
    ControlVector final_control;
    double final_value = 0.0;
    std::size_t fom_evaluations = 0;
    std::size_t surrogate_evaluations = 0;
    std::size_t inner_iterations = 0;  // summed over outer iterations
    double wall_seconds = 0.0;
};

struct AmlResult {
    ControlVector control;
    double value = 0.0;
    IterationTrace trace;
};

/// Hook invoked after each training with the outer index, the raw training data
/// and the trained network.
using TrainingObserver = std::function<void(std::size_t, const std::vector<RawPair>&, const TrainedNetwork&)>;

/// Adaptive loop: FOM optimization steps supply training data for a surrogate
/// that drives inner EnOpt runs; stopping and acceptance use FOM values only.
AmlResult aml_enopt(Objective& fom, const ControlVector& u0, const AmlConfig& cfg, const ControlBounds& bounds,
                    const TrainingObserver& observer = {});

struct CertificationReport {
    bool valid = true;
    std::string status;
    std::vector<std::string> violations;
    std::size_t accepted_steps = 0;
    double best_value = 0.0;
    ControlVector best_control;
};

/// Re-checks a trace: acceptance gate on every accepted step, consistency of the
/// recorded termination, iterate lineage, counter audit of inner loops.
CertificationReport certify(const IterationTrace& trace);

}  // namespace amlopt
