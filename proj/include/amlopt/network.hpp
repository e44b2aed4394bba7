#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amlopt {

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Layer widths [N_in, hidden..., N_out] and the hidden-layer activation.
struct NetworkArchitecture {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::tanh;

    std::size_t inputs() const { return layer_sizes.front(); }
    std::size_t outputs() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return layer_sizes.size() - 1; }
    std::size_t parameter_count() const;
    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd weights;  // N_i x N_{i-1}
    Eigen::VectorXd bias;     // N_i
};

/// Feedforward network: affine + activation on hidden layers, affine output.
struct NeuralNetwork {
    NetworkArchitecture architecture;
    std::vector<DenseLayer> layers;

    /// All weights and biases zero.
    static NeuralNetwork zeros(const NetworkArchitecture& arch);

    void check_shapes() const;
};

/// Gradient of the loss, shaped like the network's layers.
using NetworkGradient = std::vector<DenseLayer>;

Eigen::VectorXd forward(const NeuralNetwork& net, const Eigen::VectorXd& x);

/// Column-wise forward pass over a batch (N_in x n).
Eigen::MatrixXd forward_batch(const NeuralNetwork& net, const Eigen::MatrixXd& inputs);

/// Sum over samples of squared l2 output errors. Columns are samples.
double mse_loss(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Exact gradient of mse_loss by reverse-mode accumulation; returns the loss too.
double loss_and_gradient(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         NetworkGradient& grad);

NetworkGradient loss_gradient(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Layer-by-layer flattening: W_1 row-major, b_1, W_2, b_2, ...
Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);
void unflatten(const Eigen::VectorXd& params, std::vector<DenseLayer>& layers);

/// Weights ~ Normal(0, 2 / fan_in), biases zero.
NeuralNetwork kaiming_init(const NetworkArchitecture& arch, std::uint64_t seed);

}  // namespace amlopt
