#include "amlopt/network.hpp"

#include <cmath>
#include <random>

#include "amlopt/errors.hpp"

namespace amlopt {
namespace {

void activate(Activation a, Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::tanh: z = z.array().tanh(); break;
        case Activation::relu: z = z.array().max(0.0); break;
    }
}

// Derivative expressed through the activated value y = act(z).
Eigen::ArrayXXd activation_derivative(Activation a, const Eigen::MatrixXd& y) {
    switch (a) {
        case Activation::tanh: return 1.0 - y.array().square();
        case Activation::relu: return (y.array() > 0.0).cast<double>();
    }
    return {};
}

void check_batch(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    if (static_cast<std::size_t>(inputs.rows()) != net.architecture.inputs() ||
        static_cast<std::size_t>(targets.rows()) != net.architecture.outputs() || inputs.cols() != targets.cols()) {
        throw StructuralError("training data does not match the network architecture");
    }
    if (inputs.cols() == 0) throw ParameterError("loss of an empty training set is undefined");
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    throw ParameterError("unknown activation '" + name + "'");
}

std::size_t NetworkArchitecture::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 1; i < layer_sizes.size(); ++i) n += layer_sizes[i] * (layer_sizes[i - 1] + 1);
    return n;
}

void NetworkArchitecture::validate() const {
    if (layer_sizes.size() < 3) throw StructuralError("network needs at least one hidden layer");
    for (auto s : layer_sizes) {
        if (s == 0) throw StructuralError("layer widths must be positive");
    }
}

NeuralNetwork NeuralNetwork::zeros(const NetworkArchitecture& arch) {
    arch.validate();
    NeuralNetwork net{arch, {}};
    for (std::size_t i = 1; i < arch.layer_sizes.size(); ++i) {
        const auto rows = static_cast<Eigen::Index>(arch.layer_sizes[i]);
        const auto cols = static_cast<Eigen::Index>(arch.layer_sizes[i - 1]);
        net.layers.push_back({Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(rows)});
    }
    return net;
}

void NeuralNetwork::check_shapes() const {
    architecture.validate();
    if (layers.size() != architecture.layer_count()) throw StructuralError("layer count does not match architecture");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto rows = static_cast<Eigen::Index>(architecture.layer_sizes[i + 1]);
        const auto cols = static_cast<Eigen::Index>(architecture.layer_sizes[i]);
        if (layers[i].weights.rows() != rows || layers[i].weights.cols() != cols || layers[i].bias.size() != rows) {
            throw StructuralError("layer " + std::to_string(i + 1) + " has the wrong shape");
        }
    }
}

Eigen::MatrixXd forward_batch(const NeuralNetwork& net, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.rows()) != net.architecture.inputs()) {
        throw StructuralError("input dimension does not match the network");
    }
    Eigen::MatrixXd a = inputs;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Eigen::MatrixXd z = net.layers[i].weights * a;
        z.colwise() += net.layers[i].bias;
        if (i + 1 < net.layers.size()) activate(net.architecture.activation, z);
        a = std::move(z);
    }
    return a;
}

Eigen::VectorXd forward(const NeuralNetwork& net, const Eigen::VectorXd& x) { return forward_batch(net, x); }

double mse_loss(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    check_batch(net, inputs, targets);
    return (forward_batch(net, inputs) - targets).squaredNorm();
}

double loss_and_gradient(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         NetworkGradient& grad) {
    check_batch(net, inputs, targets);
    const std::size_t depth = net.layers.size();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(depth + 1);
    acts.push_back(inputs);
    for (std::size_t i = 0; i < depth; ++i) {
        Eigen::MatrixXd z = net.layers[i].weights * acts.back();
        z.colwise() += net.layers[i].bias;
        if (i + 1 < depth) activate(net.architecture.activation, z);
        acts.push_back(std::move(z));
    }

    Eigen::MatrixXd delta = acts.back() - targets;
    const double loss = delta.squaredNorm();
    delta *= 2.0;

    grad.resize(depth);
    for (std::size_t i = depth; i-- > 0;) {
        if (i + 1 < depth) delta.array() *= activation_derivative(net.architecture.activation, acts[i + 1]);
        grad[i].weights.noalias() = delta * acts[i].transpose();
        grad[i].bias = delta.rowwise().sum();
        if (i > 0) delta = net.layers[i].weights.transpose() * delta;
    }
    return loss;
}

NetworkGradient loss_gradient(const NeuralNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    NetworkGradient g;
    loss_and_gradient(net, inputs, targets, g);
    return g;
}

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    Eigen::VectorXd out(n);
    Eigen::Index pos = 0;
    for (const auto& l : layers) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            out.segment(pos, l.weights.cols()) = l.weights.row(r).transpose();
            pos += l.weights.cols();
        }
        out.segment(pos, l.bias.size()) = l.bias;
        pos += l.bias.size();
    }
    return out;
}

void unflatten(const Eigen::VectorXd& params, std::vector<DenseLayer>& layers) {
    Eigen::Index pos = 0;
    for (auto& l : layers) {
        if (pos + l.weights.size() + l.bias.size() > params.size()) throw StructuralError("parameter vector too short");
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            l.weights.row(r) = params.segment(pos, l.weights.cols()).transpose();
            pos += l.weights.cols();
        }
        l.bias = params.segment(pos, l.bias.size());
        pos += l.bias.size();
    }
    if (pos != params.size()) throw StructuralError("parameter vector too long");
}

NeuralNetwork kaiming_init(const NetworkArchitecture& arch, std::uint64_t seed) {
    NeuralNetwork net = NeuralNetwork::zeros(arch);
    std::mt19937_64 rng(seed);
    for (auto& l : net.layers) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(l.weights.cols())));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = normal(rng);
        }
    }
    return net;
}

}  // namespace amlopt
