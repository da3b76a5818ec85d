#pragma once

#include <cstdint>
#include <vector>

#include "dpls/data.hpp"
#include "dpls/types.hpp"

namespace dpls {

enum class ScoreMethod {
    rotation,     // X_std * W * (P W)^-1, reproduces training scores exactly
    loading_pinv, // X_std * P^+, kept for fidelity comparison
};

// Linear PLS model with orthonormal training x-scores.
struct PlsModel {
    int K = 0;    // components actually extracted
    Matrix P;     // K x p x-loadings
    Matrix Q;     // K x q y-loadings
    Vector beta;  // K inner regression coefficients (diagonal of B)
    Matrix W;     // p x K deflation weights
    Matrix V;     // N x K training x-scores, V^T V = I
    Matrix U;     // N x K training y-scores
    Standardizer x_std;
    Vector y_center; // q
    bool rank_deficient = false;

    Index p() const { return P.cols(); }
    Index q() const { return Q.cols(); }
    // p x K map from standardized features to scores.
    Matrix rotation() const;
    Matrix score(const Matrix& x_raw, ScoreMethod method = ScoreMethod::rotation) const;
};

PlsModel fit_nipals(const Matrix& X, const Matrix& Y, int K);

Matrix predict(const PlsModel& m, const Matrix& X_new);
// Prediction using only the first k score columns (k <= m.K). With k == m.K
// this is the exact prediction path.
Matrix predict_truncated(const PlsModel& m, const Matrix& X_new, int k);

// Coefficients on the standardized-X scale plus the raw-scale companion.
struct LinearCoefficients {
    Matrix coef_std; // p x q
    Matrix coef_raw; // p x q
    Vector intercept; // q, raw scale
    bool used_pseudo_inverse = false;
};

LinearCoefficients pls_coefficients(const PlsModel& m);

// Krylov basis of the closed-form estimator. For q > 1 the basis is the
// block form with K blocks of q columns each.
struct KrylovBasis {
    Matrix R;   // p x (K*q)
    Matrix Sxx; // p x p centered covariance of standardized X
    Matrix Sxy; // p x q
};

KrylovBasis krylov_basis(const Matrix& X, const Matrix& Y, int K);
LinearCoefficients helland_coefficients(const Matrix& X, const Matrix& Y, int K);

// Shrinkage diagnostics along the eigendirections of ave(x x^T).
struct ScaleFactorReport {
    Vector eigenvalues;       // R nonzero e_j^2, descending
    Vector factors;           // eigenbasis ratio; 0 where not defined
    std::vector<bool> defined;
    std::vector<bool> degenerate; // eigenvalue multiplicity within tolerance
    Vector alpha_ols;         // OLS coefficients in the eigenbasis
    Vector factors_closed_form; // polynomial form, cross-check route
    int K = 0;
};

ScaleFactorReport scale_factors(const Matrix& X, const Vector& y, int K);

struct CvSelection {
    int k_star = 0;
    std::vector<double> cv_mse; // aligned with k_grid
};

CvSelection select_k_cv(const Matrix& X, const Matrix& Y, const std::vector<int>& k_grid,
                        int folds, std::uint64_t seed);

} // namespace dpls
