#include "amlopt/analytic.hpp"

#include <cmath>

#include "amlopt/errors.hpp"

namespace amlopt {
namespace {

constexpr double kBumpWidth = 0.15;
constexpr double kGlobalHeight = 1.0;
constexpr double kLocalHeight = 0.6;
constexpr double kGlobalCenter = 0.7;
constexpr double kLocalCenter = 0.25;

double bump(const Eigen::VectorXd& x, const Eigen::VectorXd& c, double h) {
    return h * std::exp(-(x - c).squaredNorm() / (2.0 * kBumpWidth * kBumpWidth));
}

struct Bumps {
    Eigen::VectorXd a, b;

    double value(const Eigen::VectorXd& x) const { return bump(x, a, kGlobalHeight) + bump(x, b, kLocalHeight); }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
        const double s2 = kBumpWidth * kBumpWidth;
        return -(bump(x, a, kGlobalHeight) * (x - a) + bump(x, b, kLocalHeight) * (x - b)) / s2;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const {
        const double s2 = kBumpWidth * kBumpWidth;
        const auto n = x.size();
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
        for (const auto* c : {&a, &b}) {
            const double g = bump(x, *c, c == &a ? kGlobalHeight : kLocalHeight);
            const Eigen::VectorXd d = x - *c;
            h += g * (d * d.transpose() / (s2 * s2) - Eigen::MatrixXd::Identity(n, n) / s2);
        }
        return h;
    }

    Eigen::VectorXd refine(Eigen::VectorXd x) const {
        for (int it = 0; it < 50; ++it) {
            const Eigen::VectorXd step = hessian(x).ldlt().solve(gradient(x));
            x -= step;
            if (step.lpNorm<Eigen::Infinity>() < 1e-15) break;
        }
        return x;
    }
};

}  // namespace

AnalyticObjective make_quadratic(std::size_t n_wells, std::size_t n_steps, const Eigen::VectorXd& center) {
    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    if (center.size() != n) throw StructuralError("quadratic center has wrong dimension");
    if ((center.array() <= 0.0).any() || (center.array() >= 1.0).any()) {
        throw ParameterError("quadratic center must be interior to the unit cube");
    }
    AnalyticObjective a;
    a.name = "quadratic";
    a.n_wells = n_wells;
    a.n_steps = n_steps;
    a.bounds = ControlBounds::unit(n_wells);
    a.objective = std::make_shared<FunctionObjective>(
        "quadratic", [center](const ControlVector& u) { return -(u.values - center).squaredNorm(); });
    a.gradient = [center](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -2.0 * (x - center); };
    a.maxima = {center};
    a.maxima_values = {0.0};
    return a;
}

AnalyticObjective make_quadratic(std::size_t n_wells, std::size_t n_steps) {
    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) c[i] = 0.3 + 0.4 * static_cast<double>(i % 5) / 4.0;
    return make_quadratic(n_wells, n_steps, c);
}

AnalyticObjective make_multimodal(std::size_t n_wells, std::size_t n_steps) {
    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    Bumps bumps{Eigen::VectorXd::Constant(n, kGlobalCenter), Eigen::VectorXd::Constant(n, kLocalCenter)};
    AnalyticObjective a;
    a.name = "multimodal";
    a.n_wells = n_wells;
    a.n_steps = n_steps;
    a.bounds = ControlBounds::unit(n_wells);
    a.objective =
        std::make_shared<FunctionObjective>("multimodal", [bumps](const ControlVector& u) { return bumps.value(u.values); });
    a.gradient = [bumps](const Eigen::VectorXd& x) -> Eigen::VectorXd { return bumps.gradient(x); };
    for (const auto& c : {bumps.a, bumps.b}) {
        Eigen::VectorXd m = bumps.refine(c);
        a.maxima_values.push_back(bumps.value(m));
        a.maxima.push_back(std::move(m));
    }
    return a;
}

AnalyticObjective make_linear(std::size_t n_wells, std::size_t n_steps, const Eigen::VectorXd& slope) {
    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    if (slope.size() != n) throw StructuralError("linear slope has wrong dimension");
    AnalyticObjective a;
    a.name = "linear";
    a.n_wells = n_wells;
    a.n_steps = n_steps;
    a.bounds = ControlBounds::unit(n_wells);
    a.objective = std::make_shared<FunctionObjective>("linear", [slope](const ControlVector& u) { return slope.dot(u.values); });
    a.gradient = [slope](const Eigen::VectorXd&) -> Eigen::VectorXd { return slope; };
    Eigen::VectorXd corner(n);
    for (Eigen::Index i = 0; i < n; ++i) corner[i] = slope[i] >= 0.0 ? 1.0 : 0.0;
    a.maxima = {corner};
    a.maxima_values = {slope.dot(corner)};
    return a;
}

AnalyticObjective make_linear(std::size_t n_wells, std::size_t n_steps) {
    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = (i % 2 == 0 ? 1.0 : -0.5) * (1.0 + 0.25 * static_cast<double>(i));
    return make_linear(n_wells, n_steps, g);
}

std::vector<std::string> analytic_objective_names() { return {"quadratic", "multimodal", "linear"}; }

AnalyticObjective analytic_objective(const std::string& name, std::size_t n_wells, std::size_t n_steps) {
    if (name == "quadratic") return make_quadratic(n_wells, n_steps);
    if (name == "multimodal") return make_multimodal(n_wells, n_steps);
    if (name == "linear") return make_linear(n_wells, n_steps);
    throw ParameterError("unknown analytic objective '" + name + "'");
}

std::vector<AnalyticObjective> analytic_objectives(std::size_t n_wells, std::size_t n_steps) {
    std::vector<AnalyticObjective> out;
    for (const auto& name : analytic_objective_names()) out.push_back(analytic_objective(name, n_wells, n_steps));
    return out;
}

}  // namespace amlopt
