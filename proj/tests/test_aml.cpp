#include <doctest.h>

#include "amlopt/aml.hpp"
#include "amlopt/analytic.hpp"
#include "amlopt/errors.hpp"
#include "helpers.hpp"

using namespace amlopt;

namespace {

AmlConfig multimodal_config() {
    AmlConfig c;
    c.construction = Construction::scalar;
    c.enopt.sample_size = 50;
    c.enopt.sigma = 0.03;
    c.enopt.rng_seed = 3;
    c.trainer.rng_seed = 3;
    c.trainer.restarts = 5;
    return c;
}

ControlVector start(std::size_t wells, std::size_t steps, double v) {
    return ControlVector::from_well_values(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(wells), v), steps);
}

OuterRecord row(std::size_t k, double value, double next_value, bool accepted) {
    OuterRecord r;
    r.k = k;
    r.control = ControlVector(Eigen::VectorXd::Constant(2, value), 2, 1);
    r.value = value;
    r.trial_control = r.control;
    r.trial_value = value + 1.0;
    r.fom_improves = true;
    r.trained = true;
    r.next_control = ControlVector(Eigen::VectorXd::Constant(2, next_value), 2, 1);
    r.next_value = next_value;
    r.accepted = accepted;
    r.fom_evaluations = 10 * (k + 1);
    return r;
}

}  // namespace

TEST_CASE("huge outer tolerance stops after the first FOM step") {
    AnalyticObjective a = make_quadratic(2, 3);
    AmlConfig c = multimodal_config();
    c.outer_tolerance = 1e6;
    const AmlResult r = aml_enopt(*a.objective, start(2, 3, 0.1), c, a.bounds);
    REQUIRE(r.trace.records.size() == 1);
    CHECK(r.trace.termination == AmlTermination::fom_stationary);
    CHECK_FALSE(r.trace.records[0].trained);
    const CertificationReport cert = certify(r.trace);
    CHECK(cert.valid);
    CHECK(cert.accepted_steps == 0);
    CHECK(cert.status == "FOM-stationary");
    CHECK(r.control.values == start(2, 3, 0.1).values);
}

TEST_CASE("multimodal objective: acceptance gate, counter audit, lineage, certification") {
    AnalyticObjective a = make_multimodal(2, 3);
    std::vector<std::size_t> training_sizes;
    const AmlResult r = aml_enopt(*a.objective, start(2, 3, 0.55), multimodal_config(), a.bounds,
                                  [&](std::size_t, const std::vector<RawPair>& d, const TrainedNetwork&) {
                                      training_sizes.push_back(d.size());
                                  });
    const auto& t = r.trace;
    REQUIRE_FALSE(t.records.empty());
    std::size_t accepted = 0;
    for (const auto& row : t.records) {
        CHECK(row.inner_fom_calls == 0);
        CHECK(row.inner_iterations <= t.max_inner);
        if (row.accepted) {
            ++accepted;
            CHECK(row.next_value - row.value > t.outer_tolerance * row.acceptance_scale);
        }
    }
    CHECK(accepted >= 1);
    CHECK(r.value > 0.9);
    CHECK(t.fom_evaluations == a.objective->evaluation_count());
    for (std::size_t n : training_sizes) CHECK(n == 50);
    const CertificationReport cert = certify(t);
    CHECK(cert.valid);
    CHECK(cert.accepted_steps == accepted);
}

TEST_CASE("adaptive loop is deterministic") {
    AnalyticObjective a = make_multimodal(2, 3);
    AnalyticObjective b = make_multimodal(2, 3);
    const AmlResult r1 = aml_enopt(*a.objective, start(2, 3, 0.55), multimodal_config(), a.bounds);
    AmlConfig threaded = multimodal_config();
    threaded.trainer.workers = 3;
    threaded.enopt.workers = 2;
    const AmlResult r2 = aml_enopt(*b.objective, start(2, 3, 0.55), threaded, b.bounds);
    REQUIRE(r1.trace.records.size() == r2.trace.records.size());
    for (std::size_t k = 0; k < r1.trace.records.size(); ++k) {
        CHECK(r1.trace.records[k].next_control.values == r2.trace.records[k].next_control.values);
        CHECK(r1.trace.records[k].surrogate_value == r2.trace.records[k].surrogate_value);
        CHECK(r1.trace.records[k].train_loss == r2.trace.records[k].train_loss);
    }
    CHECK(r1.value == r2.value);
}

TEST_CASE("vector construction needs per-step values") {
    AnalyticObjective a = make_quadratic(2, 3);
    AmlConfig c = multimodal_config();
    c.construction = Construction::vector;
    CHECK_THROWS(aml_enopt(*a.objective, start(2, 3, 0.1), c, a.bounds));
}

TEST_CASE("certify: rejection status and negative controls") {
    IterationTrace t;
    t.outer_tolerance = 0.01;
    t.records = {row(0, 1.0, 2.0, true), row(1, 2.0, 2.001, false)};
    t.termination = AmlTermination::surrogate_step_rejected;
    t.final_control = t.records.back().control;
    t.final_value = 2.0;
    const CertificationReport ok = certify(t);
    CHECK(ok.valid);
    CHECK(ok.status == "surrogate-step-rejected at k=1");
    CHECK(ok.best_value == 3.0);

    IterationTrace bad = t;
    bad.records[0].next_value = 1.005;
    bad.records[1].value = 1.005;
    bad.records[1].control = bad.records[0].next_control;
    CHECK_FALSE(certify(bad).valid);

    IterationTrace leaked = t;
    leaked.records[1].inner_fom_calls = 3;
    CHECK_FALSE(certify(leaked).valid);

    IterationTrace broken = t;
    broken.records[1].value = 2.5;
    CHECK_FALSE(certify(broken).valid);

    IterationTrace wrong_status = t;
    wrong_status.termination = AmlTermination::fom_stationary;
    CHECK_FALSE(certify(wrong_status).valid);

    CHECK_FALSE(certify(IterationTrace{}).valid);
}
