#include "dpls/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpls/data.hpp"
#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/rng.hpp"

namespace dpls {

OlsModel fit_ols(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "X and Y row counts differ");
    }
    if (X.rows() < 2) throw Error(ErrorCode::InvalidConfig, "need >= 2 observations");
    const Index n = X.rows();
    Matrix design(n, X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;

    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    OlsModel m;
    Matrix solution;
    if (qr.rank() < design.cols()) {
        m.used_pseudo_inverse = true;
        solution = pseudo_inverse(design) * Y;
    } else {
        solution = qr.solve(Y);
    }
    m.intercept = solution.row(0);
    m.coefficients = solution.bottomRows(X.cols());
    return m;
}

Matrix predict(const OlsModel& m, const Matrix& X) {
    if (X.cols() != m.coefficients.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "predictor count mismatch");
    }
    return (X * m.coefficients).rowwise() + m.intercept.transpose();
}

std::vector<double> default_lambda_path(const Matrix& X, const Vector& y, int n_points,
                                        double ratio) {
    const Index n = X.rows();
    const Standardizer s = fit_standardizer(X);
    Matrix Xs = X;
    for (Index j = 0; j < Xs.cols(); ++j) {
        // n-divisor scaling so the soft-threshold boundary is exact.
        const double sd_n = s.sds(j) * std::sqrt(static_cast<double>(n - 1) /
                                                 static_cast<double>(n));
        Xs.col(j) = (Xs.col(j).array() - s.means(j)) / sd_n;
    }
    const Vector yc = y.array() - y.mean();
    const double lambda_max =
        (Xs.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(n);
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double t = n_points == 1
                             ? 0.0
                             : static_cast<double>(i) / static_cast<double>(n_points - 1);
        path.push_back(lambda_max * std::pow(ratio, t));
    }
    return path;
}

namespace {

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

// Coordinate descent on (1/2n)||y - X b||^2 + lambda ||b||_1 with columns
// scaled to mean 0 and x_j^T x_j = n. Returns standardized-scale coefficients.
Vector coordinate_descent(const Matrix& Xs, const Vector& yc, double lambda,
                          Vector beta, int max_sweeps, double tol) {
    const Index n = Xs.rows();
    const Index p = Xs.cols();
    Vector residual = yc - Xs * beta;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double old = beta(j);
            const double rho = Xs.col(j).dot(residual) / static_cast<double>(n) + old;
            const double updated = soft_threshold(rho, lambda);
            if (updated != old) {
                residual += Xs.col(j) * (old - updated);
                beta(j) = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        if (max_change < tol) return beta;
    }
    throw Error(ErrorCode::NonConvergence,
                "coordinate descent did not converge in " + std::to_string(max_sweeps) +
                    " sweeps");
}

struct ScaledDesign {
    Matrix Xs;
    Vector means;
    Vector scales; // n-divisor sds
    double y_mean = 0.0;
    Vector yc;
};

ScaledDesign scale_for_lasso(const Matrix& X, const Vector& y) {
    ScaledDesign d;
    const Standardizer s = fit_standardizer(X);
    const Index n = X.rows();
    d.means = s.means;
    d.scales = s.sds * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
    d.Xs = X;
    for (Index j = 0; j < X.cols(); ++j) {
        d.Xs.col(j) = (X.col(j).array() - d.means(j)) / d.scales(j);
    }
    d.y_mean = y.mean();
    d.yc = y.array() - d.y_mean;
    return d;
}

} // namespace

LassoModel fit_lasso_cv(const Matrix& X, const Vector& y, std::vector<double> lambda_path,
                        int folds, std::uint64_t seed, bool one_se_rule) {
    if (X.rows() != y.size()) {
        throw Error(ErrorCode::DimensionMismatch, "X and y lengths differ");
    }
    if (lambda_path.empty()) throw Error(ErrorCode::GridEmpty, "empty lambda path");
    if (!std::is_sorted(lambda_path.rbegin(), lambda_path.rend())) {
        throw Error(ErrorCode::InvalidConfig, "lambda path must be descending");
    }
    if (folds < 2) throw Error(ErrorCode::InvalidConfig, "cross-validation needs >= 2 folds");

    const Index n = X.rows();
    const Index p = X.cols();
    constexpr int kMaxSweeps = 10000;
    constexpr double kTol = 1e-7;

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(seed, "lasso/cv"));
    for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[i], perm[j]);
    }

    std::vector<double> cv_sse(lambda_path.size(), 0.0);
    Index cv_count = 0;
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        const Index n_test = hi - lo;
        const Index n_train = n - n_test;
        if (n_test == 0 || n_train < 2) continue;
        Matrix Xtr(n_train, p), Xte(n_test, p);
        Vector ytr(n_train), yte(n_test);
        Index tr = 0, te = 0;
        for (Index i = 0; i < n; ++i) {
            if (i >= lo && i < hi) {
                Xte.row(te) = X.row(perm[i]);
                yte(te++) = y(perm[i]);
            } else {
                Xtr.row(tr) = X.row(perm[i]);
                ytr(tr++) = y(perm[i]);
            }
        }
        const ScaledDesign d = scale_for_lasso(Xtr, ytr);
        Vector beta = Vector::Zero(p);
        for (std::size_t g = 0; g < lambda_path.size(); ++g) {
            beta = coordinate_descent(d.Xs, d.yc, lambda_path[g], beta, kMaxSweeps, kTol);
            // Evaluate on the raw-scale held-out block.
            Vector coef_raw = beta.array() / d.scales.array();
            const double intercept = d.y_mean - coef_raw.dot(d.means);
            const Vector pred = (Xte * coef_raw).array() + intercept;
            cv_sse[g] += (pred - yte).squaredNorm();
        }
        cv_count += n_test;
    }

    std::vector<double> cv_mse(lambda_path.size());
    for (std::size_t g = 0; g < lambda_path.size(); ++g) {
        cv_mse[g] = cv_sse[g] / static_cast<double>(cv_count);
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < lambda_path.size(); ++g) {
        if (cv_mse[g] < cv_mse[best]) best = g;
    }
    if (one_se_rule) {
        // Largest lambda within one standard error of the minimum.
        const double se = sample_sd(Eigen::Map<const Vector>(cv_mse.data(),
                                                             static_cast<Index>(cv_mse.size()))) /
                          std::sqrt(static_cast<double>(cv_mse.size()));
        for (std::size_t g = 0; g <= best; ++g) {
            if (cv_mse[g] <= cv_mse[best] + se) {
                best = g;
                break;
            }
        }
    }

    // Final fit on all rows, warm-started along the path down to lambda*.
    const ScaledDesign d = scale_for_lasso(X, y);
    Vector beta = Vector::Zero(p);
    for (std::size_t g = 0; g <= best; ++g) {
        beta = coordinate_descent(d.Xs, d.yc, lambda_path[g], beta, kMaxSweeps, kTol);
    }

    LassoModel m;
    m.lambda = lambda_path[best];
    m.lambda_path = std::move(lambda_path);
    m.cv_mse = std::move(cv_mse);
    m.coefficients = beta.array() / d.scales.array();
    m.intercept = d.y_mean - m.coefficients.dot(d.means);
    return m;
}

Vector predict(const LassoModel& m, const Matrix& X) {
    if (X.cols() != m.coefficients.size()) {
        throw Error(ErrorCode::DimensionMismatch, "predictor count mismatch");
    }
    return (X * m.coefficients).array() + m.intercept;
}

PcaFactorModel fit_pca_factors(const Matrix& returns_panel, int K) {
    const Index T = returns_panel.rows();
    const Index N = returns_panel.cols();
    if (K < 1 || K > std::min(T, N)) {
        throw Error(ErrorCode::DimensionMismatch,
                    "K must satisfy 1 <= K <= min(T, N), got " + std::to_string(K));
    }
    PcaFactorModel m;
    m.K = K;
    m.mean = column_means(returns_panel);
    const Matrix centered = returns_panel.rowwise() - m.mean.transpose();
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double total = sv.array().square().sum();
    m.loadings = svd.matrixV().leftCols(K);
    m.factors = svd.matrixU().leftCols(K) * sv.head(K).asDiagonal();
    m.explained_variance.resize(K);
    for (Index k = 0; k < K; ++k) {
        m.explained_variance(k) = total > 0.0 ? sv(k) * sv(k) / total : 0.0;
    }
    return m;
}

Matrix reconstruct(const PcaFactorModel& m, int k) {
    if (k < 1 || k > m.K) throw Error(ErrorCode::InvalidConfig, "k out of range");
    return (m.factors.leftCols(k) * m.loadings.leftCols(k).transpose()).rowwise() +
           m.mean.transpose();
}

} // namespace dpls
