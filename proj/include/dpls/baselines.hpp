#pragma once

#include <cstdint>
#include <vector>

#include "dpls/types.hpp"

namespace dpls {

struct OlsModel {
    Matrix coefficients; // p x q
    Vector intercept;    // q
    bool used_pseudo_inverse = false;
};

OlsModel fit_ols(const Matrix& X, const Matrix& Y);
Matrix predict(const OlsModel& m, const Matrix& X);

struct LassoModel {
    Vector coefficients; // p, raw scale
    double intercept = 0.0;
    double lambda = 0.0;
    std::vector<double> lambda_path;
    std::vector<double> cv_mse; // aligned with lambda_path
};

std::vector<double> default_lambda_path(const Matrix& X, const Vector& y,
                                        int n_points = 50, double ratio = 1e-3);

// Cyclic coordinate descent with soft thresholding and warm starts along a
// descending path; lambda chosen by k-fold CV MSE. Predictors standardized
// internally with the n divisor so lambda_max zeroes every coefficient.
LassoModel fit_lasso_cv(const Matrix& X, const Vector& y,
                        std::vector<double> lambda_path, int folds,
                        std::uint64_t seed, bool one_se_rule = false);

Vector predict(const LassoModel& m, const Matrix& X);

struct PcaFactorModel {
    Matrix loadings;  // N x K, orthonormal columns
    Matrix factors;   // T x K
    Vector mean;      // N, column means of the panel
    Vector explained_variance; // K ratios, non-increasing
    int K = 0;
};

// SVD of the demeaned T x N returns panel.
PcaFactorModel fit_pca_factors(const Matrix& returns_panel, int K);
// In-sample reconstruction with the first k factors (k <= K).
Matrix reconstruct(const PcaFactorModel& m, int k);

} // namespace dpls
