#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/reservoir.hpp"

namespace testing {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

/// nx x ny homogeneous grid, injector in the first cell, producer in the last.
inline amlopt::ReservoirModel line_model(std::size_t nx, std::size_t ny = 1, std::size_t steps = 4,
                                         double step_days = 100.0, double length = 500.0) {
    amlopt::ReservoirModel m;
    m.name = "line";
    m.nx = nx;
    m.ny = ny;
    m.dx = length / static_cast<double>(nx);
    m.dy = ny == 1 ? 50.0 : length / static_cast<double>(ny);
    m.dz = 10.0;
    const auto n = static_cast<Eigen::Index>(nx * ny);
    m.porosity = Eigen::VectorXd::Constant(n, 0.25);
    m.permeability = Eigen::VectorXd::Constant(n, 200.0 * 9.869233e-16);
    m.initial_sw = Eigen::VectorXd::Constant(n, 0.1);
    amlopt::WellSpec inj;
    inj.name = "I";
    inj.kind = amlopt::WellKind::injector;
    inj.rate_max = 200.0;
    inj.concentration_max = 2.5;
    inj.radius = 0.1 * std::min(m.dx, m.dy);
    amlopt::WellSpec prod;
    prod.name = "P";
    prod.ix = nx - 1;
    prod.iy = ny - 1;
    prod.rate_max = 200.0;
    prod.radius = inj.radius;
    m.wells = {inj, prod};
    m.step_days.assign(steps, step_days);
    return m;
}

}  // namespace testing
