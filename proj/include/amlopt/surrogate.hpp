#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"
#include "amlopt/lbfgs.hpp"
#include "amlopt/network.hpp"
#include "amlopt/objective.hpp"

namespace amlopt {

/// Per-component min/max map of raw targets onto [0, 1].
///
/// A component whose training range is degenerate (max == min) maps every raw
/// value to 0.5 and unscales to the constant min.
struct OutputScaling {
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    static OutputScaling fit(const Eigen::MatrixXd& raw_targets);  // columns are samples

    Eigen::VectorXd scale(const Eigen::VectorXd& raw) const;
    Eigen::VectorXd unscale(const Eigen::VectorXd& scaled) const;
    Eigen::MatrixXd scale_batch(const Eigen::MatrixXd& raw) const;
};

/// Scaled training data; columns are samples.
struct TrainingSet {
    Eigen::MatrixXd inputs;   // [0,1]^N_u
    Eigen::MatrixXd targets;  // [0,1]^N_out
    ControlBounds input_bounds;
    OutputScaling output_scaling;

    std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
    TrainingSet subset(const std::vector<std::size_t>& columns) const;
};

using RawPair = std::pair<ControlVector, Eigen::VectorXd>;

TrainingSet make_training_set(const std::vector<RawPair>& raw, const ControlBounds& bounds);

double mse_loss(const NeuralNetwork& net, const TrainingSet& set);
NetworkGradient loss_gradient(const NeuralNetwork& net, const TrainingSet& set);

struct TrainerConfig {
    std::size_t restarts = 15;
    std::size_t max_epochs = 1000;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    std::size_t optimizer_memory = 10;
    std::size_t iterations_per_epoch = 20;  // optimizer iterations between validation checks
    bool center_inputs = true;              // optimize the first-layer bias about the input mean
    std::uint64_t rng_seed = 0;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    std::size_t workers = 1;  // concurrent restarts

    void validate() const;
};

struct RestartReport {
    std::size_t restart = 0;
    std::size_t epochs = 0;             // epochs actually run
    std::size_t best_epoch = 0;         // epoch of the last validation improvement
    double train_loss = 0.0;            // summed, at the kept weights
    double validation_loss = 0.0;
    bool abandoned = false;
};

/// Loss summary over restarts. *_mean are per-sample means of the summed losses.
struct TrainingReport {
    std::vector<RestartReport> restarts;
    std::size_t selected = 0;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
    double min_train = 0, max_train = 0, avg_train = 0;
    double min_validation = 0, max_validation = 0, avg_validation = 0;

    const RestartReport& best() const { return restarts.at(selected); }
    double best_train_mean() const { return best().train_loss / static_cast<double>(train_size); }
    double best_validation_mean() const { return best().validation_loss / static_cast<double>(validation_size); }
};

struct TrainedNetwork {
    NeuralNetwork network;
    OutputScaling output_scaling;
    ControlBounds input_bounds;
    TrainingReport report;
};

/// Deterministic pseudo-random split of `n` indices into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed);

/// Fits a network to raw (control, target) pairs with validation-based early
/// stopping and several randomly initialized restarts; the restart with the
/// smallest train + validation loss wins. Throws NumericalError if every
/// restart diverged.
TrainedNetwork train(const std::vector<RawPair>& raw, const NetworkArchitecture& arch, const TrainerConfig& cfg,
                     const ControlBounds& bounds);

/// Discount factors (1 + d_tau)^(-t_i / tau).
Eigen::VectorXd discount_vector(double d_tau, double tau, const Eigen::VectorXd& times);

enum class SurrogateVariant { scalar, vector };
std::string to_string(SurrogateVariant v);

/// Cheap objective backed by a trained network. Scalar variant returns the
/// unscaled output; vector variant contracts the unscaled outputs with delta.
class SurrogateObjective final : public Objective {
public:
    SurrogateObjective(NeuralNetwork net, SurrogateVariant variant, Eigen::VectorXd delta, ControlBounds bounds,
                       OutputScaling scaling);

    bool has_components() const override { return variant_ == SurrogateVariant::vector; }
    std::string name() const override { return "surrogate-" + to_string(variant_); }
    Eigen::VectorXd discount() const override {
        return variant_ == SurrogateVariant::vector ? delta_ : Eigen::VectorXd();
    }

    const NeuralNetwork& network() const { return net_; }
    SurrogateVariant variant() const { return variant_; }
    const Eigen::VectorXd& delta() const { return delta_; }
    const ControlBounds& bounds() const { return bounds_; }
    const OutputScaling& output_scaling() const { return scaling_; }

protected:
    Evaluation compute(const ControlVector& u) const override;

private:
    NeuralNetwork net_;
    SurrogateVariant variant_;
    Eigen::VectorXd delta_;
    ControlBounds bounds_;
    OutputScaling scaling_;
};

std::shared_ptr<SurrogateObjective> make_surrogate(const NeuralNetwork& net, SurrogateVariant variant,
                                                   const Eigen::VectorXd& delta, const ControlBounds& bounds,
                                                   const OutputScaling& scaling);

/// Self-describing JSON file: architecture, activation, row-major weights,
/// biases, scaling metadata, variant and discount vector.
void save_surrogate(const SurrogateObjective& s, const std::filesystem::path& path);
std::shared_ptr<SurrogateObjective> load_surrogate(const std::filesystem::path& path);

}  // namespace amlopt
