#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpls/baselines.hpp"
#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/pls.hpp"
#include "dpls/rng.hpp"
#include "oracles.hpp"

using namespace dpls;

TEST_CASE("ols recovers an exact linear relation") {
    Rng rng(1);
    const Matrix X = oracles::random_gaussian(20, 1, rng);
    const Matrix Y = 3.0 * X;
    const OlsModel m = fit_ols(X, Y);
    CHECK(m.coefficients(0, 0) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(std::abs(m.intercept(0)) <= 1e-10);
}

TEST_CASE("ols with centered orthonormal design equals the cross product") {
    const Index n = 8;
    Matrix X(n, 2);
    X.col(0) << 1, 1, 1, 1, -1, -1, -1, -1;
    X.col(1) << 1, -1, 1, -1, 1, -1, 1, -1;
    X /= std::sqrt(static_cast<double>(n));
    Rng rng(2);
    const Matrix Y = oracles::random_gaussian(n, 1, rng);
    const OlsModel m = fit_ols(X, Y);
    const Matrix expected = X.transpose() * Y; // X^T X = I and columns centered
    CHECK((m.coefficients - expected).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ols residuals are orthogonal to the regressors") {
    Rng rng(3);
    const Matrix X = oracles::random_gaussian(40, 4, rng);
    const Matrix Y = oracles::random_gaussian(40, 2, rng);
    const OlsModel m = fit_ols(X, Y);
    const Matrix resid = Y - predict(m, X);
    CHECK((X.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(resid.colwise().sum().cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ols agrees with full-K helland") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 10);
        const Matrix X = oracles::random_gaussian(30, 4, rng);
        const Vector y = oracles::random_gaussian(30, 1, rng);
        const OlsModel ols = fit_ols(X, y);
        const LinearCoefficients pls = helland_coefficients(X, y, 4);
        const double scale = ols.coefficients.cwiseAbs().maxCoeff();
        CHECK((ols.coefficients - pls.coef_raw).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    }
}

TEST_CASE("ols r-squared stays within [0, 1] with an intercept") {
    Rng rng(4);
    const Matrix X = oracles::random_gaussian(50, 3, rng);
    const Vector y = oracles::random_gaussian(50, 1, rng);
    const OlsModel m = fit_ols(X, y);
    const Vector fitted = predict(m, X).col(0);
    const double tss = (y.array() - y.mean()).square().sum();
    const double rss = (y - fitted).squaredNorm();
    const double r2 = 1.0 - rss / tss;
    CHECK(r2 >= 0.0);
    CHECK(r2 <= 1.0);
    // Fitted + residual decomposition is exactly additive.
    CHECK(((fitted + (y - fitted)) - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("singular design falls back to the pseudo-inverse") {
    Rng rng(5);
    Matrix X = oracles::random_gaussian(20, 3, rng);
    X.col(2) = X.col(0); // exact collinearity
    const Vector y = oracles::random_gaussian(20, 1, rng);
    const OlsModel m = fit_ols(X, y);
    CHECK(m.used_pseudo_inverse);
    CHECK(m.coefficients.allFinite());
}

TEST_CASE("lasso zeroes everything at lambda_max") {
    Rng rng(6);
    const Matrix X = oracles::random_gaussian(60, 5, rng);
    const Vector beta = oracles::random_gaussian(5, 1, rng);
    const Vector y = X * beta + 0.1 * oracles::random_gaussian(60, 1, rng).col(0);
    const auto path = default_lambda_path(X, y, 5);
    // Refit at exactly lambda_max with a single-point path.
    const LassoModel m = fit_lasso_cv(X, y, {path.front()}, 3, 1);
    CHECK(m.coefficients.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("lasso at lambda ~ 0 equals ols") {
    Rng rng(7);
    const Matrix X = oracles::random_gaussian(50, 4, rng);
    const Vector beta = oracles::random_gaussian(4, 1, rng);
    const Vector y = X * beta + 0.05 * oracles::random_gaussian(50, 1, rng).col(0);
    const LassoModel m = fit_lasso_cv(X, y, {1e-10}, 3, 1);
    const OlsModel ols = fit_ols(X, y);
    const double scale = ols.coefficients.cwiseAbs().maxCoeff();
    CHECK((m.coefficients - ols.coefficients.col(0)).cwiseAbs().maxCoeff() <=
          1e-5 * scale);
}

TEST_CASE("single standardized predictor has the soft-threshold solution") {
    const Index n = 64;
    Rng rng(8);
    Vector x = oracles::random_gaussian(n, 1, rng).col(0);
    // Standardize with the n divisor so x^T x = n exactly.
    x.array() -= x.mean();
    x /= std::sqrt(x.squaredNorm() / static_cast<double>(n));
    Vector y = 0.8 * x + 0.2 * oracles::random_gaussian(n, 1, rng).col(0);
    y.array() -= y.mean();
    const double rho = x.dot(y) / static_cast<double>(n);
    for (double lambda : {0.05, 0.2, 0.5}) {
        const LassoModel m = fit_lasso_cv(Matrix(x), y, {lambda}, 2, 3);
        const double expected =
            rho > lambda ? rho - lambda : (rho < -lambda ? rho + lambda : 0.0);
        CHECK(m.coefficients(0) == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("lasso kkt conditions hold at the solution") {
    Rng rng(9);
    const Matrix X = oracles::random_gaussian(80, 6, rng);
    const Vector beta0 = oracles::random_gaussian(6, 1, rng);
    const Vector y = X * beta0 + 0.3 * oracles::random_gaussian(80, 1, rng).col(0);
    const auto path = default_lambda_path(X, y);
    const LassoModel m = fit_lasso_cv(X, y, path, 3, 4);

    // Check on the internally standardized scale (n divisor).
    const Index n = X.rows();
    Matrix Xs = X;
    for (Index j = 0; j < X.cols(); ++j) {
        const Vector c = X.col(j).array() - X.col(j).mean();
        Xs.col(j) = c / std::sqrt(c.squaredNorm() / static_cast<double>(n));
    }
    Vector beta_std(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        const Vector c = X.col(j).array() - X.col(j).mean();
        beta_std(j) =
            m.coefficients(j) * std::sqrt(c.squaredNorm() / static_cast<double>(n));
    }
    const Vector yc = y.array() - y.mean();
    const Vector resid = yc - Xs * beta_std;
    for (Index j = 0; j < X.cols(); ++j) {
        const double grad = Xs.col(j).dot(resid) / static_cast<double>(n);
        if (beta_std(j) == 0.0) {
            CHECK(std::abs(grad) <= m.lambda + 1e-6);
        } else {
            CHECK(grad == doctest::Approx(m.lambda * (beta_std(j) > 0 ? 1.0 : -1.0))
                              .epsilon(1e-4));
        }
    }
}

TEST_CASE("lasso rejects bad paths and folds") {
    Rng rng(10);
    const Matrix X = oracles::random_gaussian(20, 2, rng);
    const Vector y = oracles::random_gaussian(20, 1, rng);
    CHECK_THROWS_AS(fit_lasso_cv(X, y, {}, 3, 0), Error);
    CHECK_THROWS_AS(fit_lasso_cv(X, y, {0.1, 0.5}, 3, 0), Error); // ascending
    CHECK_THROWS_AS(fit_lasso_cv(X, y, {0.1}, 1, 0), Error);
}

TEST_CASE("pca reconstructs a rank-one panel exactly") {
    Rng rng(11);
    const Vector f = oracles::random_gaussian(12, 1, rng).col(0);
    const Vector b = oracles::random_gaussian(5, 1, rng).col(0);
    const Matrix panel = f * b.transpose();
    const PcaFactorModel m = fit_pca_factors(panel, 1);
    CHECK((reconstruct(m, 1) - panel).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("full-rank pca reconstruction is exact") {
    Rng rng(12);
    const Matrix panel = oracles::random_gaussian(6, 4, rng);
    const PcaFactorModel m = fit_pca_factors(panel, 4);
    CHECK((reconstruct(m, 4) - panel).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("explained variance matches an eigen-solver oracle") {
    Matrix panel(3, 3);
    panel << 2, 0, 1, 1, 3, 0, 0, 1, 5;
    const PcaFactorModel m = fit_pca_factors(panel, 3);
    const Matrix centered = panel.rowwise() - panel.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Matrix> es(centered.transpose() * centered);
    Vector ev = es.eigenvalues().reverse();
    const double total = ev.sum();
    for (Index k = 0; k < 3; ++k) {
        CHECK(m.explained_variance(k) == doctest::Approx(ev(k) / total).epsilon(1e-8));
    }
    // Ratios are non-increasing.
    for (Index k = 1; k < 3; ++k) {
        CHECK(m.explained_variance(k) <= m.explained_variance(k - 1) + 1e-12);
    }
}

TEST_CASE("pca reconstruction error is non-increasing in K") {
    Rng rng(13);
    const Matrix panel = oracles::random_gaussian(10, 6, rng);
    const PcaFactorModel m = fit_pca_factors(panel, 6);
    double last = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 6; ++k) {
        const double err = (reconstruct(m, k) - panel).squaredNorm();
        CHECK(err <= last + 1e-12);
        last = err;
    }
}

TEST_CASE("pca validates K") {
    Rng rng(14);
    const Matrix panel = oracles::random_gaussian(4, 3, rng);
    CHECK_THROWS_AS(fit_pca_factors(panel, 5), Error);
    CHECK_THROWS_AS(fit_pca_factors(panel, 0), Error);
}
