#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>

#include "amlopt/analytic.hpp"
#include "amlopt/errors.hpp"
#include "amlopt/reservoir.hpp"
#include "amlopt/surrogate.hpp"
#include "helpers.hpp"

using namespace amlopt;

namespace {

const std::filesystem::path kDeck = std::filesystem::path(AMLOPT_SOURCE_DIR) / "decks" / "five_spot_25.json";

ControlVector pair_controls(const ReservoirModel& m, double inj, double conc, double prod) {
    return constant_controls(m, inj, conc, prod);
}

SimulationResult totals(const Eigen::VectorXd& t, const Eigen::VectorXd& op, const Eigen::VectorXd& wp,
                        const Eigen::VectorXd& wi, const Eigen::VectorXd& pi, const Eigen::VectorXd& pp) {
    SimulationResult r;
    r.times_days = t;
    r.q_op = op;
    r.q_wp = wp;
    r.q_wi = wi;
    r.q_pi = pi;
    r.q_pp = pp;
    r.q_gp = Eigen::VectorXd::Zero(t.size());
    return r;
}

double breakthrough_days(std::size_t nx) {
    ReservoirModel m = testing::line_model(nx, 1, 120, 5.0, 400.0);
    m.initial_sw.setConstant(m.relperm.swr);
    const SimulationResult r = simulate(m, pair_controls(m, 50.0, 0.0, 50.0));
    for (Eigen::Index i = 0; i < r.q_wp.size(); ++i) {
        const double cut = r.q_wp[i] / (r.q_wp[i] + r.q_op[i]);
        if (cut > 0.05) {
            const double prev = i == 0 ? 0.0 : r.q_wp[i - 1] / (r.q_wp[i - 1] + r.q_op[i - 1]);
            const double t0 = i == 0 ? 0.0 : r.times_days[i - 1];
            return t0 + (r.times_days[i] - t0) * (0.05 - prev) / (cut - prev);
        }
    }
    return r.times_days[r.times_days.size() - 1];
}

}  // namespace

TEST_CASE("no flow leaves the state untouched") {
    const ReservoirModel m = testing::line_model(10, 3);
    const SimulationResult r = simulate(m, pair_controls(m, 0.0, 0.0, 0.0));
    CHECK(r.q_op.isZero(0.0));
    CHECK(r.q_wp.isZero(0.0));
    CHECK(r.q_wi.isZero(0.0));
    CHECK(r.q_pi.isZero(0.0));
    CHECK(r.final_sw == m.initial_sw);
    CHECK(r.final_concentration.isZero(0.0));
    const auto [value, j] = npv(r, m.econ);
    CHECK(value == 0.0);
    CHECK(j.isZero(0.0));
}

TEST_CASE("water-only pair conserves water") {
    const ReservoirModel m = testing::line_model(20, 4);
    const SimulationResult r = simulate(m, pair_controls(m, 120.0, 0.0, 120.0));
    CHECK(r.water_residual < 1e-8);
    CHECK(r.q_wi.sum() > 0.0);
    CHECK(r.q_op.sum() > 0.0);
    CHECK(r.min_saturation >= -1e-9);
    CHECK(r.max_saturation <= 1.0 + 1e-9);
    const double stored = (r.final_sw - m.initial_sw).dot(m.porosity) * m.dx * m.dy * m.dz;
    CHECK(std::abs(r.q_wi.sum() - r.q_wp.sum() - stored) / r.q_wi.sum() < 1e-8);
}

TEST_CASE("polymer mass balance and determinism") {
    const ReservoirModel m = testing::line_model(15, 5, 6);
    const ControlVector u = pair_controls(m, 150.0, 1.5, 140.0);
    const SimulationResult a = simulate(m, u);
    const SimulationResult b = simulate(m, u);
    CHECK(a.polymer_residual < 1e-6);
    CHECK(a.water_residual < 1e-8);
    CHECK(a.min_concentration >= 0.0);
    CHECK(a.q_op == b.q_op);
    CHECK(a.q_wp == b.q_wp);
    CHECK(a.q_pp == b.q_pp);
    CHECK(a.final_sw == b.final_sw);
    CHECK(a.final_pressure == b.final_pressure);
}

TEST_CASE("halving the cell size moves breakthrough by less than ten percent") {
    const double coarse = breakthrough_days(40);
    const double fine = breakthrough_days(80);
    INFO("coarse ", coarse, " fine ", fine);
    CHECK(coarse > 0.0);
    CHECK(std::abs(coarse - fine) / fine < 0.10);
}

TEST_CASE("npv examples") {
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
    const SimulationResult one = totals(Eigen::VectorXd::Constant(1, 365.0), Eigen::VectorXd::Constant(1, 1000.0), z, z, z, z);
    const auto [value, j] = npv(one, EconParams{});
    CHECK(j[0] == 5e5);
    CHECK(std::abs(value - 5e5 / 1.1) <= 1e-12 * 5e5 / 1.1);

    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index n = 1 + t % 12;
        Eigen::VectorXd times(n);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) times[i] = acc += 10.0 + 200.0 * (i % 3);
        const SimulationResult r = totals(times, testing::uniform_vector(rng, n, 0, 1e5), testing::uniform_vector(rng, n, 0, 1e5),
                                          testing::uniform_vector(rng, n, 0, 1e5), testing::uniform_vector(rng, n, 0, 1e4),
                                          testing::uniform_vector(rng, n, 0, 1e4));
        const auto [v, comp] = npv(r, EconParams{});
        const Eigen::VectorXd delta = discount_vector(0.1, 365.0, times);
        double expected = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double cash = 500.0 * r.q_op[i] - 30.0 * r.q_wi[i] - 30.0 * r.q_wp[i] - 2.5 * r.q_pi[i] - 0.5 * r.q_pp[i];
            CHECK(testing::rel_err(comp[i], cash) < 1e-12);
            expected += std::pow(1.1, -times[i] / 365.0) * cash;
        }
        CHECK(testing::rel_err(v, delta.dot(comp)) < 1e-12);
        CHECK(testing::rel_err(v, expected) < 1e-10);
    }
}

TEST_CASE("demo deck: layout, objective consistency and polymer effect") {
    auto m = std::make_shared<ReservoirModel>(load_deck(kDeck));
    CHECK(m->cells() == 625);
    CHECK(m->wells.size() == 5);
    CHECK(m->control_types() == 6);
    CHECK(m->n_steps() == 10);
    const ControlBounds b = m->control_bounds();
    CHECK(b.upper[0] == 2000.0);
    CHECK(b.upper[1] == 2.5);
    CHECK(b.upper[2] == 500.0);

    auto f = make_fom_objective(m, m->econ, b);
    const ControlVector u0 = constant_controls(*m, 700.0, 0.5, 150.0);
    const std::size_t before = f->evaluation_count();
    const Evaluation e1 = f->evaluate_full(u0);
    const Evaluation e2 = f->evaluate_full(u0);
    CHECK(f->evaluation_count() - before == 2);
    CHECK(e1.value == e2.value);
    CHECK(std::isfinite(e1.value));
    CHECK(e1.value > 0.0);
    CHECK(testing::rel_err(e1.value, f->discount().dot(e1.components)) < 1e-10);

    const SimulationResult water = simulate(*m, constant_controls(*m, 700.0, 0.0, 150.0));
    const SimulationResult polymer = simulate(*m, constant_controls(*m, 700.0, 1.0, 150.0));
    const Eigen::Index last = water.q_op.size() - 1;
    CHECK(polymer.q_op[last] >= water.q_op[last]);
    CHECK(polymer.q_op.tail(3).sum() >= water.q_op.tail(3).sum());
}

TEST_CASE("random feasible controls on the demo deck conserve mass") {
    const ReservoirModel m = load_deck(kDeck);
    const ControlBounds b = m.control_bounds();
    std::mt19937_64 rng(10);
    for (int t = 0; t < 3; ++t) {
        const Eigen::VectorXd x = testing::uniform_vector(rng, 60, 0.0, 1.0);
        const SimulationResult r = simulate(m, unscale_from_unit(x, b, m.n_steps()));
        CHECK(r.water_residual < 1e-8);
        CHECK(r.polymer_residual < 1e-6);
        CHECK(r.min_saturation >= -1e-9);
        CHECK(r.max_saturation <= 1.0 + 1e-9);
    }
}

TEST_CASE("deck round trip") {
    const ReservoirModel m = load_deck(kDeck);
    const auto path = std::filesystem::temp_directory_path() / "amlopt_deck_roundtrip.json";
    save_deck(m, path);
    const ReservoirModel back = load_deck(path);
    std::filesystem::remove(path);
    CHECK(back.permeability.isApprox(m.permeability, 1e-14));
    CHECK(back.porosity == m.porosity);
    CHECK(back.step_days == m.step_days);
    const ControlVector u = constant_controls(m, 700.0, 0.5, 150.0);
    CHECK(npv(simulate(back, u), back.econ).first == doctest::Approx(npv(simulate(m, u), m.econ).first).epsilon(1e-12));
}

TEST_CASE("invalid models and controls are rejected") {
    ReservoirModel m = testing::line_model(5);
    m.porosity[2] = 1.2;
    CHECK_THROWS_AS(simulate(m, pair_controls(testing::line_model(5), 1, 0, 1)), ParameterError);
    const ReservoirModel ok = testing::line_model(5);
    CHECK_THROWS_AS(simulate(ok, ControlVector(Eigen::VectorXd::Zero(6), 2, 3)), StructuralError);
    CHECK_THROWS_AS(load_deck("/nonexistent/deck.json"), std::exception);
}

TEST_CASE("analytic objectives") {
    AnalyticObjective q = make_quadratic(2, 3);
    const double at_center = q.objective->evaluate(ControlVector(q.maxima[0], 2, 3));
    CHECK(at_center == 0.0);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        const Eigen::VectorXd x = testing::uniform_vector(rng, 6, 0, 1);
        CHECK(q.objective->evaluate(ControlVector(x, 2, 3)) <= at_center);
    }
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(q.maxima[0][i] == doctest::Approx(0.3 + 0.4 * static_cast<double>(i % 5) / 4.0));

    AnalyticObjective l = make_linear(3, 2);
    const Eigen::VectorXd x = testing::uniform_vector(rng, 6, 0, 1);
    const Eigen::VectorXd g = l.gradient(x);
    for (Eigen::Index i = 0; i < 6; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
        e[i] = 1e-3;
        const double fd = (l.objective->evaluate(ControlVector(x + e, 3, 2)) - l.objective->evaluate(ControlVector(x - e, 3, 2))) / 2e-3;
        CHECK(fd == doctest::Approx(g[i]).epsilon(1e-9));
    }

    AnalyticObjective mm = make_multimodal(1, 1);
    REQUIRE(mm.maxima.size() == 2);
    double best = -1e300, best_x = 0.0, local = -1e300, local_x = 0.0;
    for (int i = 0; i <= 100000; ++i) {
        const double xi = i / 100000.0;
        const double v = mm.objective->evaluate(ControlVector(Eigen::VectorXd::Constant(1, xi), 1, 1));
        if (v > best) {
            best = v;
            best_x = xi;
        }
        if (xi < 0.45 && v > local) {
            local = v;
            local_x = xi;
        }
    }
    CHECK(best_x == doctest::Approx(mm.maxima[0][0]).epsilon(1e-4));
    CHECK(best == doctest::Approx(mm.maxima_values[0]).epsilon(1e-8));
    CHECK(local_x == doctest::Approx(mm.maxima[1][0]).epsilon(1e-4));
    CHECK(local == doctest::Approx(mm.maxima_values[1]).epsilon(1e-8));
    CHECK(mm.maxima_values[0] > mm.maxima_values[1]);
}
