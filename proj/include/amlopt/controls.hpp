#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace amlopt {

/// Decision variable of the optimization problem.
///
/// Values are stored time-major over control types ("wells"): all N_w entries
/// of step 0, then all entries of step 1, and so on. Use index() instead of
/// re-deriving the layout.
struct ControlVector {
    Eigen::VectorXd values;
    std::size_t n_wells = 0;
    std::size_t n_steps = 0;

    ControlVector() = default;
    ControlVector(Eigen::VectorXd v, std::size_t wells, std::size_t steps);

    /// Constant value per well over all steps.
    static ControlVector from_well_values(const Eigen::VectorXd& per_well, std::size_t steps);

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }

    /// Flat position of (well, step), both zero-based.
    std::size_t index(std::size_t well, std::size_t step) const { return step * n_wells + well; }

    double operator()(std::size_t well, std::size_t step) const { return values[index(well, step)]; }
    double& operator()(std::size_t well, std::size_t step) { return values[index(well, step)]; }
};

/// Per-well box constraints, identical at every control step.
struct ControlBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    ControlBounds() = default;
    ControlBounds(Eigen::VectorXd lo, Eigen::VectorXd hi);

    /// [0, 1] for each of `n_wells` wells.
    static ControlBounds unit(std::size_t n_wells);

    std::size_t n_wells() const { return static_cast<std::size_t>(lower.size()); }
    void check_against(const ControlVector& u) const;
    bool contains(const ControlVector& u) const;
};

/// Component-wise clamp into the admissible set.
ControlVector project(const ControlVector& u, const ControlBounds& bounds);

/// Affine map of an admissible control into [0,1]^N_u.
Eigen::VectorXd scale_to_unit(const ControlVector& u, const ControlBounds& bounds);

/// Inverse of scale_to_unit.
ControlVector unscale_from_unit(const Eigen::VectorXd& x, const ControlBounds& bounds, std::size_t n_steps);

}  // namespace amlopt
