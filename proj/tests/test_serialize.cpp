#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpls/data.hpp"
#include "dpls/dpls_model.hpp"
#include "dpls/rng.hpp"
#include "dpls/serialize.hpp"
#include "oracles.hpp"

using namespace dpls;

TEST_CASE("pls model round-trips with identical predictions") {
    Rng rng(1);
    const Matrix X = oracles::random_gaussian(40, 5, rng);
    const Matrix Y = oracles::random_gaussian(40, 2, rng);
    const PlsModel m = fit_nipals(X, Y, 3);
    const PlsModel back = pls_from_json(json::parse(to_json(m).dump()));
    const Matrix probe = oracles::random_gaussian(10, 5, rng);
    CHECK((predict(m, probe) - predict(back, probe)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("network json preserves forward outputs exactly") {
    Rng rng(2);
    const Network net =
        oracles::random_network(3, {7, 5}, 2, Activation::softplus, rng);
    const Network back = network_from_json(json::parse(to_json(net).dump()));
    const Matrix probe = oracles::random_matrix(20, 3, rng, -2.0, 2.0);
    const Matrix a = forward(net, probe);
    const Matrix b = forward(back, probe);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("dpls model round-trips") {
    SynthConfig cfg;
    cfg.n = 150;
    cfg.p = 5;
    cfg.q = 1;
    cfg.k_true = 2;
    cfg.link = SynthLink::tanh_link;
    cfg.noise_sd = 0.1;
    cfg.seed = 3;
    const SynthData d = generate_synthetic(cfg);
    DplsSpec spec;
    spec.K = 2;
    spec.hidden = {6};
    spec.train.epochs = 15;
    const DplsModel m = fit_dpls(d.X, d.Y, spec);
    const DplsModel back = dpls_from_json(json::parse(to_json(m).dump()));
    Rng rng(4);
    const Matrix probe = oracles::random_gaussian(12, 5, rng);
    CHECK((predict_dpls(m, probe) - predict_dpls(back, probe)).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("ols and lasso round-trip") {
    Rng rng(5);
    const Matrix X = oracles::random_gaussian(30, 3, rng);
    const Vector y = oracles::random_gaussian(30, 1, rng);
    const OlsModel ols = fit_ols(X, y);
    const OlsModel ols2 = ols_from_json(json::parse(to_json(ols).dump()));
    CHECK(ols.coefficients == ols2.coefficients);
    CHECK(ols.intercept == ols2.intercept);

    const LassoModel lasso = fit_lasso_cv(X, y, default_lambda_path(X, y, 10), 3, 1);
    const LassoModel lasso2 = lasso_from_json(json::parse(to_json(lasso).dump()));
    CHECK(lasso.coefficients == lasso2.coefficients);
    CHECK(lasso.intercept == lasso2.intercept);
    CHECK(lasso.lambda == lasso2.lambda);
}

TEST_CASE("serialization is byte-stable for identical fits") {
    Rng rng(6);
    const Matrix X = oracles::random_gaussian(30, 4, rng);
    const Matrix Y = oracles::random_gaussian(30, 1, rng);
    const std::string a = to_json(fit_nipals(X, Y, 2)).dump();
    const std::string b = to_json(fit_nipals(X, Y, 2)).dump();
    CHECK(a == b);
}
