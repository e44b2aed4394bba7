#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <numeric>
#include <set>

#include "amlopt/errors.hpp"
#include "amlopt/network.hpp"
#include "amlopt/surrogate.hpp"
#include "helpers.hpp"

using namespace amlopt;

namespace {

NeuralNetwork net_121(double a, double b, double c, double d, double w1, double w2, double e) {
    NeuralNetwork n = NeuralNetwork::zeros({{1, 2, 1}, Activation::tanh});
    n.layers[0].weights << a, b;
    n.layers[0].bias << c, d;
    n.layers[1].weights << w1, w2;
    n.layers[1].bias << e;
    return n;
}

NeuralNetwork random_net(const NetworkArchitecture& arch, std::mt19937_64& rng) {
    NeuralNetwork n = NeuralNetwork::zeros(arch);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& l : n.layers) {
        const double s = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = s * g(rng);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.1 * g(rng);
    }
    return n;
}

std::vector<RawPair> sample_pairs(std::size_t n, std::size_t dim, std::uint64_t seed,
                                  const std::function<double(const Eigen::VectorXd&)>& f) {
    std::mt19937_64 rng(seed);
    std::vector<RawPair> out;
    for (std::size_t m = 0; m < n; ++m) {
        const Eigen::VectorXd x = testing::uniform_vector(rng, static_cast<Eigen::Index>(dim), 0.0, 1.0);
        out.push_back({ControlVector(x, dim, 1), Eigen::VectorXd::Constant(1, f(x))});
    }
    return out;
}

}  // namespace

TEST_CASE("forward examples") {
    const NeuralNetwork zero = NeuralNetwork::zeros({{3, 4, 4, 2}, Activation::tanh});
    CHECK(forward(zero, Eigen::Vector3d(1, -2, 5)) == Eigen::Vector2d::Zero());

    NeuralNetwork id = NeuralNetwork::zeros({{2, 2, 2}, Activation::tanh});
    id.layers[0].weights.setIdentity();
    id.layers[1].weights.setIdentity();
    CHECK(forward(id, Eigen::Vector2d::Zero()) == Eigen::Vector2d::Zero());

    const NeuralNetwork n = net_121(0.7, -1.3, 0.1, 0.4, 2.0, -0.5, 0.25);
    for (double x : {-1.0, 0.3, 2.0}) {
        const double expected = 2.0 * std::tanh(0.7 * x + 0.1) - 0.5 * std::tanh(-1.3 * x + 0.4) + 0.25;
        CHECK(forward(n, Eigen::VectorXd::Constant(1, x))[0] == doctest::Approx(expected).epsilon(1e-14));
    }
    NeuralNetwork r = net_121(1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0);
    r.architecture.activation = Activation::relu;
    CHECK(forward(r, Eigen::VectorXd::Constant(1, 2.0))[0] == 2.0);
    CHECK(forward(r, Eigen::VectorXd::Constant(1, -3.0))[0] == 3.0);
}

TEST_CASE("loss examples") {
    NeuralNetwork n = NeuralNetwork::zeros({{1, 3, 1}, Activation::tanh});
    n.layers[1].bias << 0.5;
    CHECK(mse_loss(n, Eigen::MatrixXd::Constant(1, 1, 0.2), Eigen::MatrixXd::Constant(1, 1, 0.3)) ==
          doctest::Approx(0.04).epsilon(1e-14));

    const NeuralNetwork h = net_121(0.7, -1.3, 0.1, 0.4, 2.0, -0.5, 0.25);
    Eigen::MatrixXd x(1, 2), y(1, 2);
    x << 0.2, 0.9;
    y << 0.1, -0.4;
    auto phi = [](double v) { return 2.0 * std::tanh(0.7 * v + 0.1) - 0.5 * std::tanh(-1.3 * v + 0.4) + 0.25; };
    const double expected = std::pow(phi(0.2) - 0.1, 2) + std::pow(phi(0.9) + 0.4, 2);
    CHECK(mse_loss(h, x, y) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(mse_loss(h, x, forward_batch(h, x)) == 0.0);
}

TEST_CASE("gradient examples") {
    std::mt19937_64 rng(2);
    const NeuralNetwork n = random_net({{3, 5, 2}, Activation::tanh}, rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 7);
    const NetworkGradient zero = loss_gradient(n, x, forward_batch(n, x));
    CHECK(flatten(zero).lpNorm<Eigen::Infinity>() == 0.0);

    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(2, 7);
    const NetworkGradient g = loss_gradient(n, x, y);
    const Eigen::VectorXd expected_bias = 2.0 * (forward_batch(n, x) - y).rowwise().sum();
    CHECK((g.back().bias - expected_bias).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("gradient matches central differences over random architectures") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> depth(1, 3), width(1, 35), in(1, 8), out(1, 5), batch(1, 6);
    const double h = 1e-6;
    std::size_t worst_arch = 0;
    double worst = 0.0;
    for (std::size_t a = 0; a < 120; ++a) {
        NetworkArchitecture arch;
        arch.layer_sizes.push_back(in(rng));
        for (std::size_t l = depth(rng); l > 0; --l) arch.layer_sizes.push_back(width(rng));
        arch.layer_sizes.push_back(out(rng));
        NeuralNetwork n = random_net(arch, rng);
        const std::size_t m = batch(rng);
        const Eigen::MatrixXd x = (Eigen::MatrixXd::Random(static_cast<Eigen::Index>(arch.inputs()),
                                                           static_cast<Eigen::Index>(m)).array() + 1.0) / 2.0;
        const Eigen::MatrixXd y = (Eigen::MatrixXd::Random(static_cast<Eigen::Index>(arch.outputs()),
                                                           static_cast<Eigen::Index>(m)).array() + 1.0) / 2.0;
        const Eigen::VectorXd grad = flatten(loss_gradient(n, x, y));
        Eigen::VectorXd p = flatten(n.layers);
        REQUIRE(static_cast<std::size_t>(p.size()) == arch.parameter_count());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            unflatten(p, n.layers);
            const double up = mse_loss(n, x, y);
            p[i] = keep - h;
            unflatten(p, n.layers);
            const double down = mse_loss(n, x, y);
            p[i] = keep;
            const double fd = (up - down) / (2 * h);
            const double err = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-3});
            if (err > worst) {
                worst = err;
                worst_arch = a;
            }
        }
        unflatten(p, n.layers);
    }
    INFO("worst architecture ", worst_arch);
    CHECK(worst < 1e-5);
}

TEST_CASE("output scaling round trip and degenerate range") {
    std::mt19937_64 rng(6);
    Eigen::MatrixXd raw(3, 40);
    for (Eigen::Index c = 0; c < 40; ++c) raw.col(c) = testing::uniform_vector(rng, 3, -1e8, 5e8);
    raw.row(2).setConstant(42.0);
    const OutputScaling s = OutputScaling::fit(raw);
    for (Eigen::Index c = 0; c < 40; ++c) {
        const Eigen::VectorXd sc = s.scale(raw.col(c));
        CHECK(sc.minCoeff() >= 0.0);
        CHECK(sc.maxCoeff() <= 1.0);
        CHECK(sc[2] == 0.5);
        const Eigen::VectorXd back = s.unscale(sc);
        for (Eigen::Index i = 0; i < 3; ++i) CHECK(testing::rel_err(back[i], raw(i, c)) < 1e-10);
    }
}

TEST_CASE("discount vector examples") {
    CHECK(discount_vector(0.0, 365.0, Eigen::Vector3d(100, 200, 300)) == Eigen::Vector3d::Ones());
    const Eigen::VectorXd d = discount_vector(0.1, 365.0, Eigen::Vector2d(365.0, 730.0));
    CHECK(d[0] == doctest::Approx(1.0 / 1.1).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(1.0 / 1.21).epsilon(1e-15));
}

TEST_CASE("validation split is a deterministic partition") {
    const auto [tr, va] = split_indices(100, 0.1, 5);
    const auto [tr2, va2] = split_indices(100, 0.1, 5);
    CHECK(tr == tr2);
    CHECK(va == va2);
    CHECK(va.size() == 10);
    std::set<std::size_t> all(tr.begin(), tr.end());
    all.insert(va.begin(), va.end());
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);
    std::vector<std::size_t> tail(90);
    std::iota(tail.begin(), tail.end(), 0);
    CHECK(tr != tail);
}

TEST_CASE("training a constant target") {
    const auto raw = sample_pairs(30, 3, 1, [](const Eigen::VectorXd&) { return 7.5; });
    TrainerConfig cfg;
    cfg.restarts = 2;
    const TrainedNetwork t = train(raw, {{3, 8, 1}, Activation::tanh}, cfg, ControlBounds::unit(3));
    CHECK(t.report.best().train_loss < 1e-8);
    auto s = make_surrogate(t.network, SurrogateVariant::scalar, {}, ControlBounds::unit(3), t.output_scaling);
    CHECK(s->evaluate(ControlVector(Eigen::Vector3d(0.2, 0.5, 0.9), 3, 1)) == 7.5);
}

TEST_CASE("training a smooth quadratic: loss band, selection, early stopping, determinism") {
    auto f = [](const Eigen::VectorXd& x) { return 3.0 - (x[0] - 0.4) * (x[0] - 0.4) - 2.0 * (x[1] - 0.6) * (x[1] - 0.6); };
    const auto raw = sample_pairs(100, 2, 3, f);
    TrainerConfig cfg;
    cfg.rng_seed = 12;
    const NetworkArchitecture arch{{2, 25, 25, 1}, Activation::tanh};
    const TrainedNetwork t = train(raw, arch, cfg, ControlBounds::unit(2));
    const TrainingReport& r = t.report;
    REQUIRE(r.restarts.size() == 15);
    CHECK(r.best().train_loss > 1e-6);
    CHECK(r.best().train_loss < 1e-3);
    CHECK(r.best().validation_loss < 1e-2);
    for (const auto& rr : r.restarts) {
        if (rr.abandoned) continue;
        CHECK(r.best().train_loss + r.best().validation_loss <= rr.train_loss + rr.validation_loss);
        CHECK(rr.epochs <= rr.best_epoch + cfg.patience);
    }
    const TrainedNetwork again = train(raw, arch, cfg, ControlBounds::unit(2));
    CHECK(flatten(again.network.layers) == flatten(t.network.layers));
    cfg.workers = 3;
    const TrainedNetwork threaded = train(raw, arch, cfg, ControlBounds::unit(2));
    CHECK(flatten(threaded.network.layers) == flatten(t.network.layers));
}

TEST_CASE("surrogate objectives") {
    std::mt19937_64 rng(8);
    const NeuralNetwork n = random_net({{4, 6, 1}, Activation::tanh}, rng);
    const ControlBounds b(Eigen::Vector2d(0, 100), Eigen::Vector2d(2000, 500));
    OutputScaling sc;
    sc.min = Eigen::VectorXd::Constant(1, -3.0);
    sc.max = Eigen::VectorXd::Constant(1, 9.0);
    auto s = make_surrogate(n, SurrogateVariant::scalar, {}, b, sc);
    const ControlVector u(Eigen::Vector4d(700, 150, 1200, 480), 2, 2);
    const double expected = sc.unscale(forward(n, scale_to_unit(u, b)))[0];
    CHECK(s->evaluate(u) == expected);
    CHECK_FALSE(s->has_components());

    NeuralNetwork c = NeuralNetwork::zeros({{4, 3, 3}, Activation::tanh});
    c.layers[1].bias << 0.0, 0.5, 1.0;
    OutputScaling vs;
    vs.min = Eigen::Vector3d(1.0, 2.0, 3.0);
    vs.max = Eigen::Vector3d(3.0, 6.0, 5.0);
    auto v = make_surrogate(c, SurrogateVariant::vector, Eigen::VectorXd::Ones(3), b, vs);
    CHECK(v->evaluate(u) == doctest::Approx(1.0 + 4.0 + 5.0).epsilon(1e-15));
    const Eigen::Vector3d delta(0.9, 0.8, 0.7);
    auto w = make_surrogate(c, SurrogateVariant::vector, delta, b, vs);
    const Evaluation e = w->evaluate_full(u);
    CHECK(e.value == doctest::Approx(delta.dot(e.components)).epsilon(1e-14));

    const auto path = std::filesystem::temp_directory_path() / "amlopt_surrogate_test.json";
    save_surrogate(*w, path);
    auto loaded = load_surrogate(path);
    CHECK(loaded->evaluate(u) == w->evaluate(u));
    CHECK(loaded->variant() == SurrogateVariant::vector);
    std::filesystem::remove(path);
}

TEST_CASE("vector surrogate reproduces an interpolated training point") {
    std::vector<RawPair> raw;
    const Eigen::Vector3d delta(1.0 / 1.1, 1.0 / 1.21, 1.0 / 1.331);
    for (int m = 0; m < 12; ++m) {
        const double x = m / 11.0;
        raw.push_back({ControlVector(Eigen::Vector2d(x, 1.0 - x), 2, 1), Eigen::Vector3d(1e6 * x, 2e6 * x * x, 5e5)});
    }
    TrainerConfig cfg;
    cfg.restarts = 3;
    cfg.validation_fraction = 0.2;
    const TrainedNetwork t = train(raw, {{2, 10, 3}, Activation::tanh}, cfg, ControlBounds::unit(2));
    auto s = make_surrogate(t.network, SurrogateVariant::vector, delta, ControlBounds::unit(2), t.output_scaling);
    const Evaluation e = s->evaluate_full(raw[5].first);
    CHECK(e.value == doctest::Approx(delta.dot(e.components)).epsilon(1e-14));
    CHECK(testing::rel_err(e.value, delta.dot(raw[5].second)) < 1e-2);
}
