#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/objective.hpp"

namespace amlopt {

/// Cheap closed-form objective with known gradient and maxima, used to exercise
/// the optimizers without running the reservoir proxy. All live on the unit cube.
struct AnalyticObjective {
    std::string name;
    std::shared_ptr<Objective> objective;
    ControlBounds bounds;
    std::size_t n_wells = 0;
    std::size_t n_steps = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    std::vector<Eigen::VectorXd> maxima;  // global maximum first
    std::vector<double> maxima_values;
};

/// -sum_i (u_i - c_i)^2 with argmax c (interior).
AnalyticObjective make_quadratic(std::size_t n_wells, std::size_t n_steps, const Eigen::VectorXd& center);
AnalyticObjective make_quadratic(std::size_t n_wells, std::size_t n_steps);

/// Two Gaussian bumps: height 1 around 0.7 (global) and height 0.6 around 0.25
/// (local), width 0.15. The maxima are refined by Newton iteration on the
/// analytic gradient, so they include the small shift caused by the other bump.
AnalyticObjective make_multimodal(std::size_t n_wells, std::size_t n_steps);

/// g^T u; no interior maximum.
AnalyticObjective make_linear(std::size_t n_wells, std::size_t n_steps, const Eigen::VectorXd& slope);
AnalyticObjective make_linear(std::size_t n_wells, std::size_t n_steps);

/// Names accepted by analytic_objective().
std::vector<std::string> analytic_objective_names();

/// "quadratic", "multimodal" or "linear" with default parameters.
AnalyticObjective analytic_objective(const std::string& name, std::size_t n_wells, std::size_t n_steps);

std::vector<AnalyticObjective> analytic_objectives(std::size_t n_wells, std::size_t n_steps);

}  // namespace amlopt
