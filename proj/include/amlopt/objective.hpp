#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"

namespace amlopt {

/// One objective evaluation. `components` holds the per-step values j(u) when
/// the objective exposes them and is empty otherwise.
struct Evaluation {
    double value = 0.0;
    Eigen::VectorXd components;
};

/// Black-box objective F(u) to be maximized.
///
/// compute() must be safe to call from several threads at once; the counter is
/// atomic and advances by one for every evaluate/evaluate_full/evaluate_components
/// call.
class Objective {
public:
    virtual ~Objective() = default;

    Evaluation evaluate_full(const ControlVector& u);
    double evaluate(const ControlVector& u) { return evaluate_full(u).value; }
    Eigen::VectorXd evaluate_components(const ControlVector& u);

    virtual bool has_components() const { return false; }
    virtual std::string name() const { return "objective"; }
    /// Weights with value == discount . components; empty without components.
    virtual Eigen::VectorXd discount() const { return {}; }

    std::size_t evaluation_count() const { return count_.load(); }

protected:
    virtual Evaluation compute(const ControlVector& u) const = 0;

private:
    std::atomic<std::size_t> count_{0};
};

/// Objective backed by callables. When `components` is given, value is
/// discount . components and `discount` must have N_t entries.
class FunctionObjective final : public Objective {
public:
    using ScalarFn = std::function<double(const ControlVector&)>;
    using VectorFn = std::function<Eigen::VectorXd(const ControlVector&)>;

    FunctionObjective(std::string name, ScalarFn fn);
    FunctionObjective(std::string name, VectorFn components, Eigen::VectorXd discount);

    bool has_components() const override { return static_cast<bool>(components_); }
    std::string name() const override { return name_; }
    Eigen::VectorXd discount() const override { return discount_; }

protected:
    Evaluation compute(const ControlVector& u) const override;

private:
    std::string name_;
    ScalarFn scalar_;
    VectorFn components_;
    Eigen::VectorXd discount_;
};

/// Presents an objective defined on physical controls as a function on the unit
/// cube: F(x) = inner(unscale(x)).
class ScaledObjective final : public Objective {
public:
    ScaledObjective(std::shared_ptr<Objective> inner, ControlBounds bounds);

    bool has_components() const override { return inner_->has_components(); }
    std::string name() const override { return inner_->name(); }
    Eigen::VectorXd discount() const override { return inner_->discount(); }

    const ControlBounds& bounds() const { return bounds_; }
    Objective& inner() { return *inner_; }

    ControlVector to_physical(const ControlVector& x) const;
    ControlVector to_unit(const ControlVector& u) const;

protected:
    Evaluation compute(const ControlVector& x) const override;

private:
    std::shared_ptr<Objective> inner_;
    ControlBounds bounds_;
};

}  // namespace amlopt
