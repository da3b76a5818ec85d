#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpls/deepnet.hpp"
#include "dpls/errors.hpp"
#include "dpls/rng.hpp"
#include "oracles.hpp"

using namespace dpls;

TEST_CASE("parameter counts match the layer formula") {
    CHECK(count_parameters(make_network(14, {100, 100}, 1)) == 11701);
    CHECK(count_parameters(make_network(28, {50, 50}, 1)) == 4051);
    CHECK(count_parameters(make_network(37, {100, 100}, 1)) == 14001);
    CHECK(count_parameters(make_network(49, {200, 200}, 1)) == 50401);
}

TEST_CASE("all-linear network collapses to its affine map") {
    Rng rng(1);
    Network net = oracles::random_network(3, {4, 4}, 2, Activation::linear, rng);
    Matrix collapsed = Matrix::Identity(3, 3);
    Vector shift = Vector::Zero(3);
    for (const auto& layer : net.layers) {
        shift = layer.weight * shift + layer.bias;
        collapsed = layer.weight * collapsed;
    }
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix v = oracles::random_matrix(1, 3, rng, -2.0, 2.0);
        const Matrix out = forward(net, v);
        const Vector expected = collapsed * v.row(0).transpose() + shift;
        CHECK((out.row(0).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("zero weights with bias give a constant output") {
    Network net = make_network(2, {}, 1, Activation::linear);
    net.layers[0].bias(0) = 0.7;
    Rng rng(2);
    const Matrix v = oracles::random_matrix(10, 2, rng);
    const Matrix out = forward(net, v);
    for (Index i = 0; i < out.rows(); ++i) CHECK(out(i, 0) == doctest::Approx(0.7));
}

TEST_CASE("softplus at zero is log 2") {
    Network net = make_network(1, {1}, 1, Activation::softplus);
    net.layers[0].weight(0, 0) = 1.0;
    net.layers[1].weight(0, 0) = 1.0;
    const Matrix out = forward(net, Matrix::Zero(1, 1));
    CHECK(out(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("scalar tanh jacobian at zero is one") {
    Network net = make_network(1, {1}, 1, Activation::tanh_act);
    net.layers[0].weight(0, 0) = 1.0;
    net.layers[1].weight(0, 0) = 1.0;
    const Matrix J = jacobian(net, Vector::Zero(1));
    CHECK(J(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-linear jacobian is the weight product and hessian vanishes") {
    Rng rng(3);
    Network net = oracles::random_network(3, {5}, 2, Activation::linear, rng);
    const Matrix expected = net.layers[1].weight * net.layers[0].weight;
    const Matrix J = jacobian(net, Vector::Zero(3));
    CHECK((J - expected).cwiseAbs().maxCoeff() <= 1e-14);
    const Matrix H = hessian(net, Vector::Ones(3), 0);
    CHECK(H.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single softplus unit hessian has the closed form") {
    // net(v) = c * softplus(a v + b); d2/dv2 = c a^2 s'(1-s'), s' logistic.
    const double a = 1.3, b = -0.4, c = 0.8;
    Network net = make_network(1, {1}, 1, Activation::softplus);
    net.layers[0].weight(0, 0) = a;
    net.layers[0].bias(0) = b;
    net.layers[1].weight(0, 0) = c;
    for (double v : {-1.0, 0.0, 0.5, 2.0}) {
        Vector point(1);
        point << v;
        const Matrix H = hessian(net, point, 0);
        const double s = 1.0 / (1.0 + std::exp(-(a * v + b)));
        CHECK(H(0, 0) == doctest::Approx(c * a * a * s * (1.0 - s)).epsilon(1e-12));
    }
}

TEST_CASE("jacobian matches finite differences over random nets") {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(1000 + rep);
        const Index in = 2 + static_cast<Index>(rng.below(3));
        const Index out = 1 + static_cast<Index>(rng.below(2));
        const auto act = rep % 2 == 0 ? Activation::softplus : Activation::tanh_act;
        Network net = oracles::random_network(in, {6, 5}, out, act, rng);
        Vector v(in);
        for (Index i = 0; i < in; ++i) v(i) = rng.uniform(-1.5, 1.5);
        const Matrix J = jacobian(net, v);
        const Matrix Jfd = oracles::fd_jacobian(
            [&](const Vector& x) -> Vector {
                return forward(net, x.transpose()).row(0);
            },
            v, 1e-5);
        for (Index r = 0; r < J.rows(); ++r) {
            for (Index c = 0; c < J.cols(); ++c) {
                const double denom = std::max(std::abs(Jfd(r, c)), 1e-8);
                worst = std::max(worst, std::abs(J(r, c) - Jfd(r, c)) / denom);
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("hessian matches finite differences and is symmetric") {
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        Rng rng(2000 + rep);
        const Index in = 2 + static_cast<Index>(rng.below(2));
        const auto act = rep % 2 == 0 ? Activation::softplus : Activation::tanh_act;
        Network net = oracles::random_network(in, {5, 4}, 2, act, rng);
        Vector v(in);
        for (Index i = 0; i < in; ++i) v(i) = rng.uniform(-1.0, 1.0);
        const Index k = static_cast<Index>(rng.below(2));
        const Matrix H = hessian(net, v, k);
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
        const Matrix Hfd = oracles::fd_hessian(
            [&](const Vector& x) { return forward(net, x.transpose())(0, k); }, v, 1e-4);
        worst = std::max(worst, (H - Hfd).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("lipschitz bound from sampled jacobians") {
    Rng rng(4);
    Network net = oracles::random_network(3, {8, 8}, 2, Activation::tanh_act, rng);
    double max_norm = 0.0;
    std::vector<Vector> points;
    for (int i = 0; i < 50; ++i) {
        Vector v(3);
        for (Index j = 0; j < 3; ++j) v(j) = rng.uniform(-2.0, 2.0);
        points.push_back(v);
        const Matrix J = jacobian(net, v);
        max_norm = std::max(max_norm, J.cwiseAbs().rowwise().sum().maxCoeff());
        // Dense samples along the segment to the previous point.
        if (i > 0) {
            for (int s = 1; s < 10; ++s) {
                const Vector mid =
                    points[i - 1] + (v - points[i - 1]) * (s / 10.0);
                const Matrix Jm = jacobian(net, mid);
                max_norm = std::max(max_norm, Jm.cwiseAbs().rowwise().sum().maxCoeff());
            }
        }
    }
    CHECK(std::isfinite(max_norm));
    for (std::size_t i = 1; i < points.size(); ++i) {
        const Vector f1 = forward(net, points[i].transpose()).row(0);
        const Vector f0 = forward(net, points[i - 1].transpose()).row(0);
        const double lhs = (f1 - f0).cwiseAbs().maxCoeff();
        const double rhs =
            max_norm * (points[i] - points[i - 1]).cwiseAbs().maxCoeff() + 1e-9;
        CHECK(lhs <= rhs);
    }
}

TEST_CASE("training a linear unit recovers the slope") {
    Rng rng(5);
    const Matrix V = oracles::random_gaussian(200, 1, rng);
    const Matrix U = 2.0 * V;
    Network shape = make_network(1, {}, 1, Activation::linear);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    cfg.seed = 7;
    const TrainResult result = train_adam(shape, V, U, cfg);
    CHECK_FALSE(result.non_convergent);
    CHECK(result.net.layers[0].weight(0, 0) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("dominating l1 penalty shrinks weights to zero") {
    Rng rng(6);
    const Matrix V = oracles::random_gaussian(100, 2, rng);
    const Matrix U = oracles::random_gaussian(100, 1, rng);
    Network shape = make_network(2, {4}, 1, Activation::softplus);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.learning_rate = 1e-2;
    cfg.l1_penalty = 1e3;
    cfg.seed = 3;
    const TrainResult result = train_adam(shape, V, U, cfg);
    for (const auto& layer : result.net.layers) {
        CHECK(layer.weight.cwiseAbs().maxCoeff() < 1e-2);
    }
}

TEST_CASE("training is deterministic in the seed") {
    Rng rng(8);
    const Matrix V = oracles::random_gaussian(64, 2, rng);
    const Matrix U = oracles::random_gaussian(64, 2, rng);
    Network shape = make_network(2, {6}, 2, Activation::softplus);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 11;
    const TrainResult a = train_adam(shape, V, U, cfg);
    const TrainResult b = train_adam(shape, V, U, cfg);
    REQUIRE(a.loss_curve.size() == b.loss_curve.size());
    for (std::size_t i = 0; i < a.loss_curve.size(); ++i) {
        CHECK(a.loss_curve[i] == b.loss_curve[i]);
    }
    for (std::size_t l = 0; l < a.net.layers.size(); ++l) {
        CHECK(a.net.layers[l].weight == b.net.layers[l].weight);
        CHECK(a.net.layers[l].bias == b.net.layers[l].bias);
    }
}

TEST_CASE("divergent training aborts with the last finite state") {
    Rng rng(9);
    const Matrix V = oracles::random_gaussian(32, 1, rng);
    const Matrix U = 1e150 * V;
    Network shape = make_network(1, {}, 1, Activation::linear);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 1e280; // forces overflow
    cfg.seed = 1;
    const TrainResult result = train_adam(shape, V, U, cfg);
    CHECK(result.aborted_non_finite);
    CHECK(result.net.layers[0].weight.allFinite());
}

TEST_CASE("forward validates dimensions and finiteness") {
    Network net = make_network(2, {3}, 1);
    CHECK_THROWS_AS(forward(net, Matrix::Zero(1, 3)), Error);
    Matrix bad(1, 2);
    bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS_AS(forward(net, bad), Error);
}

TEST_CASE("warm start seeds the first layer") {
    Rng rng(10);
    const Matrix V = oracles::random_gaussian(40, 2, rng);
    const Matrix U = V;
    Network shape = make_network(2, {4}, 2, Activation::softplus);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.0 + 1e-12; // essentially frozen
    cfg.seed = 5;
    cfg.init = InitScheme::pls_warm_start;
    Matrix warm = Matrix::Zero(4, 2);
    warm(0, 0) = 0.25;
    warm(1, 1) = -0.5;
    const TrainResult result = train_adam(shape, V, U, cfg, warm);
    CHECK(std::abs(result.net.layers[0].weight(0, 0) - 0.25) < 1e-6);
    CHECK(std::abs(result.net.layers[0].weight(1, 1) + 0.5) < 1e-6);
}
