#include "amlopt/objective.hpp"

#include <utility>

#include "amlopt/errors.hpp"

namespace amlopt {

Evaluation Objective::evaluate_full(const ControlVector& u) {
    count_.fetch_add(1);
    return compute(u);
}

Eigen::VectorXd Objective::evaluate_components(const ControlVector& u) {
    if (!has_components()) throw StructuralError(name() + " does not expose per-step components");
    return evaluate_full(u).components;
}

FunctionObjective::FunctionObjective(std::string name, ScalarFn fn) : name_(std::move(name)), scalar_(std::move(fn)) {}

FunctionObjective::FunctionObjective(std::string name, VectorFn components, Eigen::VectorXd discount)
    : name_(std::move(name)), components_(std::move(components)), discount_(std::move(discount)) {}

Evaluation FunctionObjective::compute(const ControlVector& u) const {
    if (!components_) return {scalar_(u), {}};
    Evaluation e;
    e.components = components_(u);
    if (e.components.size() != discount_.size()) {
        throw StructuralError(name_ + ": component count does not match discount vector");
    }
    e.value = discount_.dot(e.components);
    return e;
}

ScaledObjective::ScaledObjective(std::shared_ptr<Objective> inner, ControlBounds bounds)
    : inner_(std::move(inner)), bounds_(std::move(bounds)) {
    if (!inner_) throw StructuralError("ScaledObjective needs an inner objective");
}

ControlVector ScaledObjective::to_physical(const ControlVector& x) const {
    return unscale_from_unit(x.values, bounds_, x.n_steps);
}

ControlVector ScaledObjective::to_unit(const ControlVector& u) const {
    return ControlVector(scale_to_unit(u, bounds_), u.n_wells, u.n_steps);
}

Evaluation ScaledObjective::compute(const ControlVector& x) const { return inner_->evaluate_full(to_physical(x)); }

}  // namespace amlopt
