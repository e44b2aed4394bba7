#include "amlopt/controls.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "amlopt/errors.hpp"

namespace amlopt {

ControlVector::ControlVector(Eigen::VectorXd v, std::size_t wells, std::size_t steps)
    : values(std::move(v)), n_wells(wells), n_steps(steps) {
    if (wells == 0 || steps == 0) {
        throw StructuralError("control vector needs at least one well and one step");
    }
    if (static_cast<std::size_t>(values.size()) != wells * steps) {
        throw StructuralError("control vector length " + std::to_string(values.size()) + " != " +
                              std::to_string(wells) + " wells x " + std::to_string(steps) + " steps");
    }
}

ControlVector ControlVector::from_well_values(const Eigen::VectorXd& per_well, std::size_t steps) {
    const auto wells = static_cast<std::size_t>(per_well.size());
    Eigen::VectorXd v(wells * steps);
    for (std::size_t i = 0; i < steps; ++i) {
        v.segment(static_cast<Eigen::Index>(i * wells), static_cast<Eigen::Index>(wells)) = per_well;
    }
    return ControlVector(std::move(v), wells, steps);
}

ControlBounds::ControlBounds(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw StructuralError("bounds need matching, non-empty lower/upper vectors");
    }
    for (Eigen::Index j = 0; j < lower.size(); ++j) {
        if (!(lower[j] < upper[j])) {
            throw ParameterError("bounds for well " + std::to_string(j) + " are not strictly ordered");
        }
    }
}

ControlBounds ControlBounds::unit(std::size_t n_wells) {
    const auto n = static_cast<Eigen::Index>(n_wells);
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

void ControlBounds::check_against(const ControlVector& u) const {
    if (u.n_wells != n_wells() || u.size() != u.n_wells * u.n_steps) {
        throw StructuralError("control has " + std::to_string(u.n_wells) + " wells but bounds have " +
                              std::to_string(n_wells()));
    }
}

bool ControlBounds::contains(const ControlVector& u) const {
    check_against(u);
    for (std::size_t i = 0; i < u.n_steps; ++i) {
        for (std::size_t j = 0; j < u.n_wells; ++j) {
            const double v = u(j, i);
            if (v < lower[static_cast<Eigen::Index>(j)] || v > upper[static_cast<Eigen::Index>(j)]) return false;
        }
    }
    return true;
}

ControlVector project(const ControlVector& u, const ControlBounds& bounds) {
    bounds.check_against(u);
    ControlVector out = u;
    for (std::size_t i = 0; i < u.n_steps; ++i) {
        for (std::size_t j = 0; j < u.n_wells; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            out(j, i) = std::clamp(u(j, i), bounds.lower[jj], bounds.upper[jj]);
        }
    }
    return out;
}

Eigen::VectorXd scale_to_unit(const ControlVector& u, const ControlBounds& bounds) {
    if (!bounds.contains(u)) {
        throw PreconditionError("scale_to_unit: control outside bounds, project it first");
    }
    Eigen::VectorXd x(u.size());
    for (std::size_t i = 0; i < u.n_steps; ++i) {
        for (std::size_t j = 0; j < u.n_wells; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            x[static_cast<Eigen::Index>(u.index(j, i))] =
                (u(j, i) - bounds.lower[jj]) / (bounds.upper[jj] - bounds.lower[jj]);
        }
    }
    return x;
}

ControlVector unscale_from_unit(const Eigen::VectorXd& x, const ControlBounds& bounds, std::size_t n_steps) {
    const std::size_t wells = bounds.n_wells();
    if (static_cast<std::size_t>(x.size()) != wells * n_steps) {
        throw StructuralError("unscale_from_unit: length mismatch");
    }
    if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) {
        throw PreconditionError("unscale_from_unit: input outside the unit cube");
    }
    ControlVector u(Eigen::VectorXd(x.size()), wells, n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        for (std::size_t j = 0; j < wells; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double t = x[static_cast<Eigen::Index>(u.index(j, i))];
            // Endpoint-exact form so that 0 and 1 map onto the bounds bit-for-bit.
            u(j, i) = (1.0 - t) * bounds.lower[jj] + t * bounds.upper[jj];
        }
    }
    return u;
}

}  // namespace amlopt
