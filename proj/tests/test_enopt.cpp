#include <doctest.h>

#include <cmath>
#include <memory>

#include "amlopt/analytic.hpp"
#include "amlopt/enopt.hpp"
#include "amlopt/errors.hpp"
#include "helpers.hpp"

using namespace amlopt;

namespace {

FunctionObjective linear(const Eigen::VectorXd& g) {
    return FunctionObjective("linear", [g](const ControlVector& u) { return g.dot(u.values); });
}

FunctionObjective bowl(const Eigen::VectorXd& center) {
    return FunctionObjective("bowl", [center](const ControlVector& u) { return -(u.values - center).squaredNorm(); });
}

}  // namespace

TEST_CASE("cross-covariance of a constant objective is zero") {
    const ControlVector mean(Eigen::VectorXd::Constant(4, 0.5), 2, 2);
    PerturbationEnsemble e;
    e.mean = mean;
    for (int m = 0; m < 5; ++m) e.members.push_back(ControlVector(Eigen::VectorXd::Constant(4, 0.1 * m), 2, 2));
    const Eigen::VectorXd c = cross_covariance(mean, e, Eigen::VectorXd::Constant(5, 3.0), 3.0);
    CHECK(c == Eigen::VectorXd::Zero(4));
}

TEST_CASE("cross-covariance of a symmetric pair under a linear objective") {
    const Eigen::Vector4d g(1.0, -2.0, 0.5, 3.0);
    const Eigen::Vector4d v(0.01, 0.02, -0.03, 0.005);
    const ControlVector u(Eigen::VectorXd::Constant(4, 0.5), 2, 2);
    PerturbationEnsemble e;
    e.mean = u;
    e.members = {ControlVector(u.values + v, 2, 2), ControlVector(u.values - v, 2, 2)};
    const Eigen::Vector2d values(g.dot(u.values + v), g.dot(u.values - v));
    const Eigen::VectorXd c = cross_covariance(u, e, values, g.dot(u.values));
    const Eigen::VectorXd expected = 2.0 * g.dot(v) * v;
    CHECK(testing::rel_err(c, expected) < 1e-12);
}

TEST_CASE("large-ensemble cross-covariance approaches C g") {
    const Eigen::VectorXd g = (Eigen::VectorXd(6) << 1.0, -1.5, 2.0, 0.5, -0.75, 1.25).finished();
    const CovarianceMatrix c = build_initial_covariance(Eigen::Vector2d(0.001, 0.001), 0.9, 2, 3);
    const ControlVector u(Eigen::VectorXd::Constant(6, 0.5), 2, 3);
    const PerturbationEnsemble e = sample_ensemble(u, c, 10000, ControlBounds::unit(2), 17);
    Eigen::VectorXd values(10000);
    for (Eigen::Index m = 0; m < 10000; ++m) values[m] = g.dot(e.members[static_cast<std::size_t>(m)].values);
    const Eigen::VectorXd est = cross_covariance(u, e, values, g.dot(u.values));
    CHECK(testing::rel_err(est, c.entries * g) < 0.05);
}

TEST_CASE("search direction examples") {
    const Eigen::VectorXd d = search_direction(Eigen::Vector3d(2, -4, 1));
    CHECK(d == Eigen::Vector3d(0.5, -1, 0.25));
    CHECK(search_direction(Eigen::VectorXd::Constant(5, -0.3)) == Eigen::VectorXd::Constant(5, -1.0));
    CHECK(search_direction(Eigen::VectorXd::Constant(5, 7.0)) == Eigen::VectorXd::Ones(5));
    CHECK_THROWS_AS(search_direction(Eigen::VectorXd::Zero(3)), StationaryEnsembleError);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const Eigen::VectorXd c = testing::uniform_vector(rng, 8, -5, 5);
        const Eigen::VectorXd dir = search_direction(c);
        CHECK(dir.lpNorm<Eigen::Infinity>() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK((search_direction(3.7 * c) - dir).lpNorm<Eigen::Infinity>() < 1e-15);
    }
}

TEST_CASE("line search: increasing objective accepts the first trial") {
    FunctionObjective f = linear(Eigen::Vector4d(1, 1, 1, 1));
    const ControlVector u(Eigen::VectorXd::Constant(4, 0.2), 2, 2);
    EnOptConfig cfg;
    EnOptState state;
    const Eigen::Vector4d d(1, 0.5, -0.25, 1);
    const LineSearchResult r = line_search(f, u, d, cfg, ControlBounds::unit(2), state);
    CHECK(r.contractions == 0);
    CHECK(r.step_size == 0.3);
    CHECK(r.control.values == project(ControlVector(u.values + 0.3 * d, 2, 2), ControlBounds::unit(2)).values);
}

TEST_CASE("line search: constant objective exhausts the contractions") {
    FunctionObjective f("flat", [](const ControlVector&) { return 1.0; });
    const ControlVector u(Eigen::VectorXd::Constant(4, 0.5), 2, 2);
    EnOptConfig cfg;
    EnOptState state;
    const Eigen::Vector4d d(1, -1, 0.5, 0.25);
    const LineSearchResult r = line_search(f, u, d, cfg, ControlBounds::unit(2), state);
    CHECK(r.contractions == 10);
    CHECK(r.step_size == doctest::Approx(2.9296875e-4).epsilon(1e-15));
    CHECK(r.control.values == project(ControlVector(u.values + 0.3 * std::pow(0.5, 10) * d, 2, 2),
                                      ControlBounds::unit(2))
                                  .values);
}

TEST_CASE("opt_step ascends, accounts evaluations and returns its training pairs") {
    const Eigen::Vector4d center(0.3, 0.6, 0.45, 0.7);
    FunctionObjective f = bowl(center);
    const ControlVector u(Eigen::VectorXd::Constant(4, 0.1), 2, 2);
    EnOptConfig cfg;
    cfg.sample_size = 30;
    cfg.rng_seed = 4;
    EnOptState state;
    const std::size_t before = f.evaluation_count();
    const OptStepOutcome s = opt_step(f, u, 0, cfg, ControlBounds::unit(2), state);
    CHECK(s.next_value > s.current_value);
    CHECK(s.new_evaluations == 30 + 1 + s.contractions + 1);
    CHECK(f.evaluation_count() - before == s.new_evaluations);
    REQUIRE(s.training_pairs.size() == 30);
    for (const auto& p : s.training_pairs) CHECK(f.evaluate(p.control) == p.value.value);
}

TEST_CASE("enopt on an interior maximum increases monotonically") {
    const Eigen::Vector4d center(0.3, 0.6, 0.45, 0.7);
    FunctionObjective f = bowl(center);
    EnOptConfig cfg;
    cfg.sample_size = 30;
    cfg.rng_seed = 8;
    const ControlVector u0(Eigen::VectorXd::Constant(4, 0.1), 2, 2);
    const EnOptResult r = enopt(f, u0, cfg, ControlBounds::unit(2));
    const auto& rows = r.trace.iterations;
    REQUIRE(rows.size() > 3);
    for (std::size_t k = 1; k + 1 < rows.size(); ++k) CHECK(rows[k].value > rows[k - 1].value + cfg.tolerance);
    for (const auto& row : rows) CHECK(ControlBounds::unit(2).contains(row.control));
    CHECK(r.trace.evaluations == f.evaluation_count());
    CHECK((r.trace.best().control.values - center).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("enopt with a huge tolerance stops after one step") {
    FunctionObjective f = bowl(Eigen::Vector4d(0.3, 0.6, 0.45, 0.7));
    EnOptConfig cfg;
    cfg.sample_size = 10;
    cfg.tolerance = 100.0;
    const ControlVector u0(Eigen::VectorXd::Constant(4, 0.1), 2, 2);
    const EnOptResult r = enopt(f, u0, cfg, ControlBounds::unit(2));
    CHECK(r.trace.iterations.size() == 2);
    CHECK(r.trace.termination == Termination::converged);
}

TEST_CASE("enopt is deterministic under a fixed seed and any worker count") {
    AnalyticObjective a = make_quadratic(2, 3);
    EnOptConfig cfg;
    cfg.sample_size = 20;
    cfg.rng_seed = 99;
    cfg.max_iterations = 15;
    const ControlVector u0 = ControlVector::from_well_values(Eigen::Vector2d(0.1, 0.9), 3);
    const EnOptResult r1 = enopt(*a.objective, u0, cfg, a.bounds);
    cfg.workers = 4;
    AnalyticObjective b = make_quadratic(2, 3);
    const EnOptResult r2 = enopt(*b.objective, u0, cfg, b.bounds);
    REQUIRE(r1.trace.iterations.size() == r2.trace.iterations.size());
    for (std::size_t k = 0; k < r1.trace.iterations.size(); ++k) {
        CHECK(r1.trace.iterations[k].control.values == r2.trace.iterations[k].control.values);
        CHECK(r1.trace.iterations[k].value == r2.trace.iterations[k].value);
    }
}

TEST_CASE("criterion scale modes") {
    CriterionScale raw = CriterionScale::raw();
    raw.observe(10);
    raw.observe(-10);
    CHECK(raw.scale() == 1.0);
    CriterionScale run = CriterionScale::running();
    run.observe(2);
    run.observe(7);
    CHECK(run.scale() == 5.0);
    CHECK(run.improves(7.0, 6.0, 0.1));
    CHECK_FALSE(run.improves(7.0, 6.6, 0.1));
    CHECK(CriterionScale::fixed(4.0).scale() == 4.0);
    CHECK_THROWS_AS(CriterionScale::fixed(0.0), ParameterError);
}

TEST_CASE("failed ensemble members are penalized below the ensemble minimum") {
    FunctionObjective f("fragile", [](const ControlVector& u) {
        if (u.values[0] > 0.5) throw SimulationError("solver failure");
        return u.values.sum();
    });
    EnOptConfig cfg;
    cfg.sample_size = 40;
    cfg.sigma = 0.01;
    EnOptState state;
    const OptStepOutcome s = opt_step(f, ControlVector(Eigen::Vector4d(0.499, 0.5, 0.5, 0.5), 2, 2), 0, cfg,
                                      ControlBounds::unit(2), state);
    CHECK(s.failed_members > 0);
    double lo = 1e300, hi = -1e300, penalty = 1e300;
    for (const auto& p : s.training_pairs) {
        if (p.control.values[0] > 0.5) {
            penalty = std::min(penalty, p.value.value);
        } else {
            lo = std::min(lo, p.value.value);
            hi = std::max(hi, p.value.value);
        }
    }
    CHECK(penalty == doctest::Approx(lo - (hi - lo)).epsilon(1e-12));
}
