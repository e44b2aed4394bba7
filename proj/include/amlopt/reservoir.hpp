#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/objective.hpp"

namespace amlopt {

struct RelativePermeability {
    double n_water = 2.0;
    double n_oil = 2.0;
    double swr = 0.1;
    double sor = 0.1;
    double krw_max = 1.0;
    double kro_max = 1.0;
};

struct PolymerProperties {
    double mixing_omega = 0.65;
    double max_adsorption = 7.5e-4;  // kg/kg rock
    double rock_density = 1980.0;    // kg/rm3
    double dead_pore_space = 0.18;
    double rrf = 2.5;
    double viscosity_factor = 3.0;               // mu_p(c) = mu_w (1 + a c), a in m3/kg
    double adsorption_saturation_concentration = 1.0;  // kg/m3 where adsorption reaches its maximum
};

enum class WellKind { injector, producer };
std::string to_string(WellKind k);

struct WellSpec {
    std::string name;
    std::size_t ix = 0;
    std::size_t iy = 0;
    WellKind kind = WellKind::producer;
    double bhp_limit = 0.0;  // bar, reported only
    double radius = 0.1;     // m
    // Admissible control ranges: rate in sm3/day, concentration in kg/sm3.
    double rate_min = 0.0;
    double rate_max = 0.0;
    double concentration_min = 0.0;
    double concentration_max = 0.0;

    std::size_t control_types() const { return kind == WellKind::injector ? 2 : 1; }
};

struct EconParams {
    double r_op = 500.0;  // USD/sm3
    double r_gp = 0.15;
    double r_wi = 30.0;
    double r_wp = 30.0;
    double r_pi = 2.5;  // USD/kg
    double r_pp = 0.5;
    double d_tau = 0.1;
    double tau = 365.0;  // days
};

struct SimulatorNumerics {
    std::size_t pressure_updates_per_step = 10;
    double cfl = 0.9;
    std::size_t max_substeps = 100000;  // per control step
};

struct ReservoirModel {
    std::string name = "reservoir";
    std::size_t nx = 0;
    std::size_t ny = 0;
    double dx = 0.0, dy = 0.0, dz = 0.0;  // m
    Eigen::VectorXd porosity;
    Eigen::VectorXd permeability;  // m2
    Eigen::VectorXd initial_sw;
    double initial_pressure = 200.0;  // bar
    double mu_water = 5e-4;           // Pa s
    double mu_oil = 5e-3;
    RelativePermeability relperm;
    PolymerProperties polymer;
    std::vector<WellSpec> wells;
    std::vector<double> step_days;  // control step lengths
    EconParams econ;
    SimulatorNumerics numerics;

    std::size_t cells() const { return nx * ny; }
    std::size_t cell(std::size_t ix, std::size_t iy) const { return iy * nx + ix; }
    std::size_t n_steps() const { return step_days.size(); }
    /// Control types in well order: injectors contribute (rate, concentration), producers (rate).
    std::size_t control_types() const;
    std::vector<std::string> control_names() const;
    ControlBounds control_bounds() const;
    Eigen::VectorXd times_days() const;  // cumulative end time of each step

    void validate() const;
};

/// Per-step totals and diagnostics of one simulation.
struct SimulationResult {
    Eigen::VectorXd times_days;
    Eigen::VectorXd q_op, q_wp, q_wi;  // sm3
    Eigen::VectorXd q_pi, q_pp;        // kg
    Eigen::VectorXd q_gp;              // always zero
    Eigen::MatrixXd bhp;               // bar, wells x steps
    std::vector<std::size_t> substeps;

    double water_residual = 0.0;    // relative
    double polymer_residual = 0.0;  // relative
    double min_saturation = 1.0;
    double max_saturation = 0.0;
    double min_concentration = 0.0;

    Eigen::VectorXd final_sw;
    Eigen::VectorXd final_concentration;
    Eigen::VectorXd final_pressure;  // bar

    std::size_t n_steps() const { return static_cast<std::size_t>(times_days.size()); }
};

/// Incompressible oil-water-polymer IMPES run under rate control.
SimulationResult simulate(const ReservoirModel& model, const ControlVector& u);

/// (J, j) with j_i the undiscounted cash flow of step i and J = delta . j.
std::pair<double, Eigen::VectorXd> npv(const SimulationResult& result, const EconParams& econ);

/// FOM objective on physical controls: simulate followed by npv.
class ReservoirObjective final : public Objective {
public:
    ReservoirObjective(std::shared_ptr<const ReservoirModel> model, EconParams econ, ControlBounds bounds);

    bool has_components() const override { return true; }
    std::string name() const override { return "reservoir:" + model_->name; }
    Eigen::VectorXd discount() const override { return delta_; }

    const ReservoirModel& model() const { return *model_; }
    const ControlBounds& bounds() const { return bounds_; }

protected:
    Evaluation compute(const ControlVector& u) const override;

private:
    std::shared_ptr<const ReservoirModel> model_;
    EconParams econ_;
    ControlBounds bounds_;
    Eigen::VectorXd delta_;
};

std::shared_ptr<ReservoirObjective> make_fom_objective(std::shared_ptr<const ReservoirModel> model,
                                                       const EconParams& econ, const ControlBounds& bounds);

/// Constant controls per well kind; concentration applies to injectors.
ControlVector constant_controls(const ReservoirModel& model, double injector_rate, double concentration,
                                double producer_rate);

ReservoirModel load_deck(const std::filesystem::path& path);
void save_deck(const ReservoirModel& model, const std::filesystem::path& path);

/// Columns: time_days Q_OP Q_WP Q_WI Q_PI Q_PP J_i.
void write_results_table(std::ostream& out, const SimulationResult& result, const EconParams& econ);

}  // namespace amlopt
