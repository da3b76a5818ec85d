#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dpls/data.hpp"
#include "dpls/deepnet.hpp"
#include "dpls/pls.hpp"
#include "dpls/types.hpp"

namespace dpls {

// PLS projection composed with a deep map between score spaces.
struct DplsModel {
    PlsModel pls;
    Network net; // input dim K, output dim K
};

struct DplsSpec {
    int K = 2;
    std::vector<Index> hidden = {100, 100};
    Activation activation = Activation::softplus;
    TrainConfig train;
};

DplsModel fit_dpls(const Matrix& X, const Matrix& Y, const DplsSpec& spec);

Matrix predict_dpls(const DplsModel& m, const Matrix& X_new);
// Prediction summing only the first k output-score columns (k <= K).
Matrix predict_dpls_truncated(const DplsModel& m, const Matrix& X_new, int k);
// Prediction from already-standardized features; used by derivative checks.
Matrix predict_dpls_standardized(const DplsModel& m, const Matrix& X_std_rows);

// d y_hat / d x_std at a standardized point, q x p.
Matrix covariate_jacobian(const DplsModel& m, const Vector& x_std);
// Input Hessian of one response coordinate in standardized feature space.
Matrix covariate_hessian(const DplsModel& m, const Vector& x_std, Index output_index);

// Gradient of the score map at the origin times Q, K x q. For a linear inner
// map with coefficients diag(beta) this reduces to B Q.
Matrix latent_factors(const DplsModel& m);

// Second-order expansion of the prediction about the score-space origin.
// alpha absorbs the response centering constant, so a zero-score row has
// total == alpha. hot is the exact residual.
struct Attribution {
    Vector alpha;     // q
    Vector linear;    // q
    Vector quadratic; // q
    Vector hot;       // q
    Vector total;     // q
    Matrix factor_linear; // K x q, per-factor split of the linear term
};

std::vector<Attribution> taylor_attribution(const DplsModel& m, const Matrix& V_rows);

// Time/portfolio aggregate of attributions with the top factors itemized.
struct AttributionSummary {
    Vector alpha, linear, quadratic, hot, total; // mean over rows
    Matrix factor_linear;                        // K x q mean
    std::vector<Index> top_factors;              // ranked by |mean contribution|
};

AttributionSummary summarize_attribution(const std::vector<Attribution>& rows,
                                         Index n_top = 3);

struct QuantileTriplet {
    Matrix q05, q50, q95; // per-entry over bootstrap resamples
};

struct SensitivityReport {
    Matrix jacobian_at_zero; // q x p
    Matrix jacobian_mean;    // q x p, averaged over evaluation rows
    std::vector<Matrix> hessian_at_zero; // per response, p x p
    std::optional<QuantileTriplet> bootstrap_quantiles;
    int resamples_requested = 0;
    int resamples_failed = 0;
};

SensitivityReport sensitivity_report(const DplsModel& m, const Matrix& X_eval);

SensitivityReport bootstrap_sensitivities(const DplsSpec& spec, const Matrix& X,
                                          const Matrix& Y, int n_resamples,
                                          std::uint64_t seed, int jobs = 1);

// Monte-Carlo check that linear PLS recovers the composite coefficient
// directions under a nonlinear score map with Gaussian scores.
struct ConsistencyEntry {
    Index n = 0;
    Vector cosines; // per response column
    Vector kappas;  // per score column, Cov(G(w), w) / Var(w)
};

struct ConsistencyReport {
    std::vector<ConsistencyEntry> entries; // aligned with n_grid
    SynthLink link = SynthLink::linear;
};

ConsistencyReport verify_composability(const SynthConfig& cfg, int K,
                                       const std::vector<Index>& n_grid);

// Linear factor-model attributions (univariate returns).
Vector expected_return_attribution(const Matrix& loadings, const Vector& factor_mean);

struct VarianceAttribution {
    Vector variances; // per asset
    bool clipped_to_psd = false;
};

VarianceAttribution conditional_variance_attribution(const Matrix& loadings,
                                                     Matrix factor_cov,
                                                     const Vector& resid_var);

} // namespace dpls
