#include "dpls/deepnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpls/errors.hpp"
#include "dpls/rng.hpp"

namespace dpls {

Activation parse_activation(const std::string& name) {
    if (name == "softplus") return Activation::softplus;
    if (name == "tanh") return Activation::tanh_act;
    if (name == "linear") return Activation::linear;
    throw Error(ErrorCode::InvalidConfig, "unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::softplus: return "softplus";
        case Activation::tanh_act: return "tanh";
        case Activation::linear: return "linear";
    }
    return "linear";
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::softplus:
            // Overflow-safe log(1 + e^x).
            return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
        case Activation::tanh_act: return std::tanh(x);
        case Activation::linear: return x;
    }
    return x;
}

double activate_prime(Activation a, double x) {
    switch (a) {
        case Activation::softplus: return 1.0 / (1.0 + std::exp(-x));
        case Activation::tanh_act: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

double activate_second(Activation a, double x) {
    switch (a) {
        case Activation::softplus: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::tanh_act: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
        case Activation::linear: return 0.0;
    }
    return 0.0;
}

Network make_network(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                     Activation hidden_activation) {
    if (input_dim < 1 || output_dim < 1) {
        throw Error(ErrorCode::InvalidConfig, "network dimensions must be >= 1");
    }
    Network net;
    Index in = input_dim;
    for (Index width : hidden) {
        if (width < 1) throw Error(ErrorCode::InvalidConfig, "hidden width must be >= 1");
        net.layers.push_back({Matrix::Zero(width, in), Vector::Zero(width), hidden_activation});
        in = width;
    }
    net.layers.push_back({Matrix::Zero(output_dim, in), Vector::Zero(output_dim),
                          Activation::linear});
    return net;
}

long long count_parameters(const Network& net) {
    long long total = 0;
    for (const auto& layer : net.layers) {
        total += static_cast<long long>(layer.weight.size()) +
                 static_cast<long long>(layer.bias.size());
    }
    return total;
}

Matrix forward(const Network& net, const Matrix& V) {
    if (net.layers.empty()) throw Error(ErrorCode::InvalidConfig, "empty network");
    if (V.cols() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "input has " + std::to_string(V.cols()) + " columns, network expects " +
                        std::to_string(net.input_dim()));
    }
    if (!V.allFinite()) throw Error(ErrorCode::NonFiniteActivation, "non-finite input");
    Matrix z = V;
    for (const auto& layer : net.layers) {
        Matrix pre = z * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        for (Index i = 0; i < pre.rows(); ++i) {
            for (Index j = 0; j < pre.cols(); ++j) {
                pre(i, j) = activate(layer.activation, pre(i, j));
            }
        }
        z = std::move(pre);
    }
    if (!z.allFinite()) throw Error(ErrorCode::NonFiniteActivation, "non-finite activation");
    return z;
}

Matrix jacobian(const Network& net, const Vector& v) {
    if (v.size() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
    }
    // J = D_L W_L ... D_1 W_1 with D built on the forward pass.
    Matrix J = Matrix::Identity(v.size(), v.size());
    Vector z = v;
    for (const auto& layer : net.layers) {
        const Vector pre = layer.weight * z + layer.bias;
        Matrix A = layer.weight * J;
        for (Index i = 0; i < A.rows(); ++i) {
            A.row(i) *= activate_prime(layer.activation, pre(i));
        }
        J = std::move(A);
        z = pre.unaryExpr([&](double x) { return activate(layer.activation, x); });
    }
    return J;
}

Matrix hessian(const Network& net, const Vector& v, Index output_index) {
    if (v.size() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
    }
    if (output_index < 0 || output_index >= net.output_dim()) {
        throw Error(ErrorCode::InvalidConfig, "output index out of range");
    }
    const Index d = v.size();
    // Forward recursion over layer Hessians:
    //   a = W z + b,  H_a[i] = sum_j W[i,j] H_z[j]
    //   z' = act(a),  H_z'[i] = act''(a_i) A_i A_i^T + act'(a_i) H_a[i]
    // where A = d a / d x.
    Matrix J = Matrix::Identity(d, d);
    std::vector<Matrix> H(static_cast<std::size_t>(d), Matrix::Zero(d, d));
    Vector z = v;
    for (const auto& layer : net.layers) {
        const Index out = layer.weight.rows();
        const Vector pre = layer.weight * z + layer.bias;
        const Matrix A = layer.weight * J;
        std::vector<Matrix> Hnext(static_cast<std::size_t>(out));
        for (Index i = 0; i < out; ++i) {
            Matrix acc = Matrix::Zero(d, d);
            for (Index j = 0; j < layer.weight.cols(); ++j) {
                const double w = layer.weight(i, j);
                if (w != 0.0) acc += w * H[static_cast<std::size_t>(j)];
            }
            const double s1 = activate_prime(layer.activation, pre(i));
            const double s2 = activate_second(layer.activation, pre(i));
            Hnext[static_cast<std::size_t>(i)] =
                s2 * (A.row(i).transpose() * A.row(i)) + s1 * acc;
        }
        H = std::move(Hnext);
        Matrix Jnext = A;
        for (Index i = 0; i < out; ++i) {
            Jnext.row(i) *= activate_prime(layer.activation, pre(i));
        }
        J = std::move(Jnext);
        z = pre.unaryExpr([&](double x) { return activate(layer.activation, x); });
    }
    const Matrix& Hk = H[static_cast<std::size_t>(output_index)];
    return 0.5 * (Hk + Hk.transpose());
}

namespace {

struct ForwardCache {
    std::vector<Matrix> pre;  // preactivations per layer
    std::vector<Matrix> post; // activations per layer (post[0] excludes input)
};

Matrix forward_cached(const Network& net, const Matrix& V, ForwardCache& cache) {
    cache.pre.clear();
    cache.post.clear();
    Matrix z = V;
    for (const auto& layer : net.layers) {
        Matrix pre = z * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        Matrix post(pre.rows(), pre.cols());
        for (Index i = 0; i < pre.rows(); ++i) {
            for (Index j = 0; j < pre.cols(); ++j) {
                post(i, j) = activate(layer.activation, pre(i, j));
            }
        }
        cache.pre.push_back(pre);
        cache.post.push_back(post);
        z = post;
    }
    return z;
}

void glorot_init(Network& net, std::uint64_t seed) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Rng rng(derive_seed(seed, "init/layer", l));
        auto& layer = net.layers[l];
        const double fan_in = static_cast<double>(layer.weight.cols());
        const double fan_out = static_cast<double>(layer.weight.rows());
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (Index i = 0; i < layer.weight.rows(); ++i) {
            for (Index j = 0; j < layer.weight.cols(); ++j) {
                layer.weight(i, j) = rng.uniform(-a, a);
            }
        }
        layer.bias.setZero();
    }
}

// No finiteness checks: training probes states that may have diverged.
double mse(const Network& net, const Matrix& V, const Matrix& U) {
    ForwardCache cache;
    const Matrix pred = forward_cached(net, V, cache);
    return (pred - U).squaredNorm() / static_cast<double>(U.size());
}

} // namespace

TrainResult train_adam(const Network& net_shape, const Matrix& V, const Matrix& U,
                       const TrainConfig& cfg,
                       const std::optional<Matrix>& warm_start_first_layer) {
    if (V.rows() != U.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "score and target row counts differ");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0) ||
        cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0 ||
        cfg.l1_penalty < 0.0) {
        throw Error(ErrorCode::InvalidConfig, "invalid training configuration");
    }
    if (V.cols() != net_shape.input_dim() || U.cols() != net_shape.output_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "network shape does not match data");
    }

    TrainResult result;
    result.net = net_shape;
    glorot_init(result.net, cfg.seed);
    if (cfg.init == InitScheme::pls_warm_start && warm_start_first_layer.has_value()) {
        auto& first = result.net.layers.front().weight;
        const Matrix& warm = *warm_start_first_layer;
        const Index rows = std::min(first.rows(), warm.rows());
        const Index cols = std::min(first.cols(), warm.cols());
        first.topLeftCorner(rows, cols) = warm.topLeftCorner(rows, cols);
    }

    const Index n = V.rows();
    const std::size_t n_layers = result.net.layers.size();
    std::vector<Matrix> mW(n_layers), vW(n_layers);
    std::vector<Vector> mB(n_layers), vB(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        mW[l] = Matrix::Zero(result.net.layers[l].weight.rows(),
                             result.net.layers[l].weight.cols());
        vW[l] = mW[l];
        mB[l] = Vector::Zero(result.net.layers[l].bias.size());
        vB[l] = mB[l];
    }

    const double initial_mse = mse(result.net, V, U);
    long long step = 0;
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    Network last_finite = result.net;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        for (Index i = n - 1; i > 0; --i) {
            const Index j =
                static_cast<Index>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[i], order[j]);
        }

        bool aborted = false;
        for (Index start = 0; start < n; start += cfg.batch_size) {
            const Index len = std::min<Index>(cfg.batch_size, n - start);
            Matrix Vb(len, V.cols()), Ub(len, U.cols());
            for (Index r = 0; r < len; ++r) {
                Vb.row(r) = V.row(order[start + r]);
                Ub.row(r) = U.row(order[start + r]);
            }

            ForwardCache cache;
            const Matrix pred = forward_cached(result.net, Vb, cache);
            const double batch_loss =
                (pred - Ub).squaredNorm() / static_cast<double>(Ub.size());
            if (!std::isfinite(batch_loss)) {
                result.aborted_non_finite = true;
                result.net = last_finite;
                aborted = true;
                break;
            }

            // Backprop of the mean-squared-error gradient.
            Matrix delta = 2.0 * (pred - Ub) / static_cast<double>(Ub.size());
            std::vector<Matrix> gradW(n_layers);
            std::vector<Vector> gradB(n_layers);
            for (std::size_t l = n_layers; l-- > 0;) {
                const auto& layer = result.net.layers[l];
                Matrix dpre = delta;
                for (Index i = 0; i < dpre.rows(); ++i) {
                    for (Index j = 0; j < dpre.cols(); ++j) {
                        dpre(i, j) *= activate_prime(layer.activation, cache.pre[l](i, j));
                    }
                }
                const Matrix& input = l == 0 ? Vb : cache.post[l - 1];
                gradW[l] = dpre.transpose() * input;
                gradB[l] = dpre.colwise().sum();
                if (l > 0) delta = dpre * layer.weight;
            }
            if (cfg.l1_penalty > 0.0) {
                for (std::size_t l = 0; l < n_layers; ++l) {
                    gradW[l] += cfg.l1_penalty *
                                result.net.layers[l].weight.unaryExpr([](double w) {
                                    return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
                                });
                }
            }

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < n_layers; ++l) {
                auto& layer = result.net.layers[l];
                mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * gradW[l];
                vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * gradW[l].cwiseAbs2();
                layer.weight -=
                    (cfg.learning_rate * (mW[l] / bc1).array() /
                     ((vW[l] / bc2).array().sqrt() + cfg.epsilon))
                        .matrix();
                mB[l] = cfg.beta1 * mB[l] + (1.0 - cfg.beta1) * gradB[l];
                vB[l] = cfg.beta2 * vB[l] + (1.0 - cfg.beta2) * gradB[l].cwiseAbs2();
                layer.bias -= (cfg.learning_rate * (mB[l] / bc1).array() /
                               ((vB[l] / bc2).array().sqrt() + cfg.epsilon))
                                  .matrix();
            }
        }
        if (aborted) break;

        const double epoch_mse = mse(result.net, V, U);
        if (!std::isfinite(epoch_mse)) {
            result.aborted_non_finite = true;
            result.net = last_finite;
            break;
        }
        result.loss_curve.push_back(epoch_mse);
        last_finite = result.net;
    }

    if (!result.loss_curve.empty() && result.loss_curve.back() > initial_mse) {
        result.non_convergent = true;
    }
    return result;
}

} // namespace dpls
