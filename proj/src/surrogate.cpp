#include "amlopt/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amlopt/errors.hpp"
#include "amlopt/parallel.hpp"
#include "amlopt/seeding.hpp"

namespace amlopt {

OutputScaling OutputScaling::fit(const Eigen::MatrixXd& raw_targets) {
    if (raw_targets.cols() == 0) throw ParameterError("cannot fit output scaling on an empty set");
    if (!raw_targets.allFinite()) throw ParameterError("training targets must be finite");
    return {raw_targets.rowwise().minCoeff(), raw_targets.rowwise().maxCoeff()};
}

Eigen::VectorXd OutputScaling::scale(const Eigen::VectorXd& raw) const {
    if (raw.size() != min.size()) throw StructuralError("output scaling dimension mismatch");
    Eigen::VectorXd s(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const double range = max[i] - min[i];
        s[i] = range > 0.0 ? (raw[i] - min[i]) / range : 0.5;
    }
    return s;
}

Eigen::VectorXd OutputScaling::unscale(const Eigen::VectorXd& scaled) const {
    if (scaled.size() != min.size()) throw StructuralError("output scaling dimension mismatch");
    Eigen::VectorXd r(scaled.size());
    for (Eigen::Index i = 0; i < scaled.size(); ++i) {
        const double range = max[i] - min[i];
        r[i] = range > 0.0 ? min[i] + scaled[i] * range : min[i];
    }
    return r;
}

Eigen::MatrixXd OutputScaling::scale_batch(const Eigen::MatrixXd& raw) const {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index c = 0; c < raw.cols(); ++c) out.col(c) = scale(raw.col(c));
    return out;
}

TrainingSet TrainingSet::subset(const std::vector<std::size_t>& columns) const {
    TrainingSet s{Eigen::MatrixXd(inputs.rows(), static_cast<Eigen::Index>(columns.size())),
                  Eigen::MatrixXd(targets.rows(), static_cast<Eigen::Index>(columns.size())), input_bounds,
                  output_scaling};
    for (std::size_t i = 0; i < columns.size(); ++i) {
        s.inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(columns[i]));
        s.targets.col(static_cast<Eigen::Index>(i)) = targets.col(static_cast<Eigen::Index>(columns[i]));
    }
    return s;
}

TrainingSet make_training_set(const std::vector<RawPair>& raw, const ControlBounds& bounds) {
    if (raw.empty()) throw ParameterError("training set is empty");
    const auto n = static_cast<Eigen::Index>(raw.size());
    const auto n_in = static_cast<Eigen::Index>(raw.front().first.size());
    const auto n_out = raw.front().second.size();
    Eigen::MatrixXd x(n_in, n);
    Eigen::MatrixXd y(n_out, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& [u, target] = raw[static_cast<std::size_t>(c)];
        if (u.size() != static_cast<std::size_t>(n_in) || target.size() != n_out) {
            throw StructuralError("training pairs have inconsistent dimensions");
        }
        x.col(c) = scale_to_unit(u, bounds);
        y.col(c) = target;
    }
    TrainingSet set;
    set.input_bounds = bounds;
    set.output_scaling = OutputScaling::fit(y);
    set.inputs = std::move(x);
    set.targets = set.output_scaling.scale_batch(y);
    return set;
}

double mse_loss(const NeuralNetwork& net, const TrainingSet& set) { return mse_loss(net, set.inputs, set.targets); }

NetworkGradient loss_gradient(const NeuralNetwork& net, const TrainingSet& set) {
    return loss_gradient(net, set.inputs, set.targets);
}

void TrainerConfig::validate() const {
    if (restarts == 0) throw ParameterError("at least one training restart is required");
    if (max_epochs == 0) throw ParameterError("max_epochs must be positive");
    if (patience == 0) throw ParameterError("patience must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ParameterError("validation fraction must lie in (0,1)");
    }
    if (optimizer_memory == 0) throw ParameterError("optimizer memory must be positive");
    if (iterations_per_epoch == 0) throw ParameterError("iterations per epoch must be positive");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed) {
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(validation_fraction * double(n))));
    if (n_val >= n) throw ParameterError("validation split leaves no training data");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());
    return {tr, val};
}

namespace {

struct RestartOutcome {
    RestartReport report;
    Eigen::VectorXd params;
};

RestartOutcome run_restart(const NetworkArchitecture& arch, const TrainingSet& train_set, const TrainingSet& val_set,
                           const TrainerConfig& cfg, std::size_t restart) {
    RestartOutcome out;
    out.report.restart = restart;
    NeuralNetwork scratch = kaiming_init(arch, derive_seed(cfg.rng_seed, seed_purpose::restart, restart));
    // The first-layer bias is optimized relative to the training-input mean.
    const Eigen::VectorXd mean = cfg.center_inputs ? Eigen::VectorXd(train_set.inputs.rowwise().mean())
                                                   : Eigen::VectorXd::Zero(train_set.inputs.rows());
    scratch.layers.front().bias += scratch.layers.front().weights * mean;
    TrainingSet centered_train = train_set;
    TrainingSet centered_val = val_set;
    centered_train.inputs.colwise() -= mean;
    centered_val.inputs.colwise() -= mean;
    Eigen::VectorXd params = flatten(scratch.layers);

    NetworkGradient grad;
    auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        unflatten(p, scratch.layers);
        const double f = loss_and_gradient(scratch, centered_train.inputs, centered_train.targets, grad);
        g = flatten(grad);
        return f;
    };
    auto validation_loss = [&](const Eigen::VectorXd& p) {
        unflatten(p, scratch.layers);
        return mse_loss(scratch, centered_val.inputs, centered_val.targets);
    };

    LbfgsOptions opt;
    opt.memory = cfg.optimizer_memory;
    opt.c1 = cfg.wolfe_c1;
    opt.c2 = cfg.wolfe_c2;
    LbfgsMinimizer minimizer(objective, params, opt);

    double best_val = validation_loss(params);
    Eigen::VectorXd best = params;
    std::size_t since_improvement = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto status = LbfgsMinimizer::Status::progressed;
        for (std::size_t it = 0; it < cfg.iterations_per_epoch && status == LbfgsMinimizer::Status::progressed; ++it) {
            status = minimizer.step();
        }
        out.report.epochs = epoch;
        const double val = validation_loss(minimizer.x());
        if (!std::isfinite(minimizer.value()) || !std::isfinite(val)) {
            out.report.abandoned = true;
            break;
        }
        if (val < best_val) {
            best_val = val;
            best = minimizer.x();
            out.report.best_epoch = epoch;
            since_improvement = 0;
        } else if (++since_improvement >= cfg.patience) {
            break;
        }
        if (status != LbfgsMinimizer::Status::progressed) break;
    }
    if (!std::isfinite(best_val)) out.report.abandoned = true;
    if (out.report.abandoned) {
        spdlog::warn("training restart {} produced a non-finite loss and was abandoned", restart);
        return out;
    }

    unflatten(best, scratch.layers);
    scratch.layers.front().bias -= scratch.layers.front().weights * mean;
    out.report.train_loss = mse_loss(scratch, train_set.inputs, train_set.targets);
    out.report.validation_loss = mse_loss(scratch, val_set.inputs, val_set.targets);
    out.params = flatten(scratch.layers);
    return out;
}

}  // namespace

TrainedNetwork train(const std::vector<RawPair>& raw, const NetworkArchitecture& arch, const TrainerConfig& cfg,
                     const ControlBounds& bounds) {
    cfg.validate();
    arch.validate();
    const auto minimum = static_cast<std::size_t>(std::ceil(1.0 / cfg.validation_fraction - 1e-9));
    if (raw.size() < std::max<std::size_t>(2, minimum)) {
        throw ParameterError("need at least " + std::to_string(std::max<std::size_t>(2, minimum)) +
                             " training pairs, got " + std::to_string(raw.size()));
    }
    const TrainingSet all = make_training_set(raw, bounds);
    if (all.inputs.rows() != static_cast<Eigen::Index>(arch.inputs()) ||
        all.targets.rows() != static_cast<Eigen::Index>(arch.outputs())) {
        throw StructuralError("training data dimensions do not match the architecture");
    }
    const auto [tr_idx, val_idx] =
        split_indices(all.size(), cfg.validation_fraction, derive_seed(cfg.rng_seed, seed_purpose::split, 0));
    const TrainingSet train_set = all.subset(tr_idx);
    const TrainingSet val_set = all.subset(val_idx);

    std::vector<RestartOutcome> outcomes(cfg.restarts);
    parallel_for(cfg.restarts, cfg.workers,
                 [&](std::size_t r) { outcomes[r] = run_restart(arch, train_set, val_set, cfg, r); });

    TrainedNetwork result;
    result.output_scaling = all.output_scaling;
    result.input_bounds = bounds;
    auto& rep = result.report;
    rep.train_size = train_set.size();
    rep.validation_size = val_set.size();

    std::optional<std::size_t> best;
    double best_combined = std::numeric_limits<double>::infinity();
    rep.min_train = rep.min_validation = std::numeric_limits<double>::infinity();
    rep.max_train = rep.max_validation = -std::numeric_limits<double>::infinity();
    std::size_t kept = 0;
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        rep.restarts.push_back(o.report);
        if (o.report.abandoned) continue;
        ++kept;
        rep.min_train = std::min(rep.min_train, o.report.train_loss);
        rep.max_train = std::max(rep.max_train, o.report.train_loss);
        rep.avg_train += o.report.train_loss;
        rep.min_validation = std::min(rep.min_validation, o.report.validation_loss);
        rep.max_validation = std::max(rep.max_validation, o.report.validation_loss);
        rep.avg_validation += o.report.validation_loss;
        const double combined = o.report.train_loss + o.report.validation_loss;
        if (combined < best_combined) {
            best_combined = combined;
            best = r;
        }
    }
    if (!best) throw NumericalError("surrogate training failed: every restart diverged");
    rep.avg_train /= static_cast<double>(kept);
    rep.avg_validation /= static_cast<double>(kept);
    rep.selected = *best;

    result.network = NeuralNetwork::zeros(arch);
    unflatten(outcomes[*best].params, result.network.layers);
    return result;
}

Eigen::VectorXd discount_vector(double d_tau, double tau, const Eigen::VectorXd& times) {
    if (!(d_tau >= 0.0)) throw ParameterError("discount rate must be non-negative");
    if (!(tau > 0.0)) throw ParameterError("discount period must be positive");
    Eigen::VectorXd delta(times.size());
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw ParameterError("discount times must be positive and strictly increasing");
        }
        delta[i] = std::pow(1.0 + d_tau, -times[i] / tau);
    }
    return delta;
}

std::string to_string(SurrogateVariant v) { return v == SurrogateVariant::scalar ? "scalar" : "vector"; }

SurrogateObjective::SurrogateObjective(NeuralNetwork net, SurrogateVariant variant, Eigen::VectorXd delta,
                                       ControlBounds bounds, OutputScaling scaling)
    : net_(std::move(net)), variant_(variant), delta_(std::move(delta)), bounds_(std::move(bounds)),
      scaling_(std::move(scaling)) {
    net_.check_shapes();
    const std::size_t out = net_.architecture.outputs();
    if (variant_ == SurrogateVariant::scalar && out != 1) {
        throw StructuralError("scalar surrogate needs a single network output");
    }
    if (variant_ == SurrogateVariant::vector && out != static_cast<std::size_t>(delta_.size())) {
        throw StructuralError("vector surrogate needs one network output per discount factor");
    }
    if (static_cast<std::size_t>(scaling_.min.size()) != out) throw StructuralError("output scaling has wrong size");
}

Evaluation SurrogateObjective::compute(const ControlVector& u) const {
    const Eigen::VectorXd raw = scaling_.unscale(forward(net_, scale_to_unit(u, bounds_)));
    if (variant_ == SurrogateVariant::scalar) return {raw[0], {}};
    return {delta_.dot(raw), raw};
}

std::shared_ptr<SurrogateObjective> make_surrogate(const NeuralNetwork& net, SurrogateVariant variant,
                                                   const Eigen::VectorXd& delta, const ControlBounds& bounds,
                                                   const OutputScaling& scaling) {
    return std::make_shared<SurrogateObjective>(net, variant, delta, bounds, scaling);
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_surrogate(const SurrogateObjective& s, const std::filesystem::path& path) {
    using nlohmann::json;
    const auto& net = s.network();
    json layers = json::array();
    for (const auto& l : net.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        }
        layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}, {"weights", w}, {"bias", to_std(l.bias)}});
    }
    json doc = {
        {"format", "amlopt-surrogate"},
        {"version", 1},
        {"variant", to_string(s.variant())},
        {"architecture", {{"layer_sizes", net.architecture.layer_sizes}, {"activation", to_string(net.architecture.activation)}}},
        {"layers", layers},
        {"output_scaling", {{"min", to_std(s.output_scaling().min)}, {"max", to_std(s.output_scaling().max)}}},
        {"input_bounds", {{"lower", to_std(s.bounds().lower)}, {"upper", to_std(s.bounds().upper)}}},
        {"discount", to_std(s.delta())},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(1) << '\n';
}

std::shared_ptr<SurrogateObjective> load_surrogate(const std::filesystem::path& path) {
    using nlohmann::json;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    const json doc = json::parse(in);
    if (doc.value("format", "") != "amlopt-surrogate") throw StructuralError(path.string() + " is not a surrogate file");

    NetworkArchitecture arch{doc["architecture"]["layer_sizes"].get<std::vector<std::size_t>>(),
                             activation_from_string(doc["architecture"]["activation"].get<std::string>())};
    NeuralNetwork net = NeuralNetwork::zeros(arch);
    const auto& layers = doc["layers"];
    if (layers.size() != net.layers.size()) throw StructuralError("surrogate file has the wrong number of layers");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto w = layers[i]["weights"].get<std::vector<double>>();
        auto& l = net.layers[i];
        if (static_cast<Eigen::Index>(w.size()) != l.weights.size()) throw StructuralError("layer weights have wrong size");
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
                l.weights(r, c) = w[static_cast<std::size_t>(r * l.weights.cols() + c)];
            }
        }
        l.bias = to_eigen(layers[i]["bias"].get<std::vector<double>>());
    }
    const auto variant = doc["variant"].get<std::string>() == "scalar" ? SurrogateVariant::scalar : SurrogateVariant::vector;
    OutputScaling scaling{to_eigen(doc["output_scaling"]["min"].get<std::vector<double>>()),
                          to_eigen(doc["output_scaling"]["max"].get<std::vector<double>>())};
    ControlBounds bounds(to_eigen(doc["input_bounds"]["lower"].get<std::vector<double>>()),
                         to_eigen(doc["input_bounds"]["upper"].get<std::vector<double>>()));
    return make_surrogate(net, variant, to_eigen(doc["discount"].get<std::vector<double>>()), bounds, scaling);
}

}  // namespace amlopt
