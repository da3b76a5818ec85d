#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpls/types.hpp"

namespace dpls {

// Twice-differentiable activations only; ReLU is excluded by construction.
enum class Activation { softplus, tanh_act, linear };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

double activate(Activation a, double x);
double activate_prime(Activation a, double x);
double activate_second(Activation a, double x);

struct Layer {
    Matrix weight; // out x in
    Vector bias;   // out
    Activation activation = Activation::linear;
};

struct Network {
    std::vector<Layer> layers;

    Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
};

// Hidden layers use `hidden_activation`, the output layer is linear.
// Weights are zero until initialized by training (or by hand in tests).
Network make_network(Index input_dim, const std::vector<Index>& hidden,
                     Index output_dim, Activation hidden_activation = Activation::softplus);

long long count_parameters(const Network& net);

// Rows of V are samples.
Matrix forward(const Network& net, const Matrix& V);

// Exact input Jacobian (output_dim x input_dim) at a single point.
Matrix jacobian(const Network& net, const Vector& v);

// Exact input Hessian of one output coordinate, symmetrized.
Matrix hessian(const Network& net, const Vector& v, Index output_index);

enum class InitScheme { uniform_glorot, pls_warm_start };

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l1_penalty = 0.0;
    std::uint64_t seed = 0;
    InitScheme init = InitScheme::uniform_glorot;
};

struct TrainResult {
    Network net;
    std::vector<double> loss_curve; // training MSE per epoch
    bool non_convergent = false;    // final MSE above initial MSE
    bool aborted_non_finite = false;
};

// Adam on mean squared error plus l1_penalty * sum |weights|.
// Deterministic given cfg.seed. With InitScheme::pls_warm_start the optional
// first-layer matrix seeds the first layer (rows past its height stay Glorot).
TrainResult train_adam(const Network& net_shape, const Matrix& V, const Matrix& U,
                       const TrainConfig& cfg,
                       const std::optional<Matrix>& warm_start_first_layer = std::nullopt);

} // namespace dpls
