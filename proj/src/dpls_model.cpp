#include "dpls/dpls_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/parallel.hpp"
#include "dpls/rng.hpp"

namespace dpls {

DplsModel fit_dpls(const Matrix& X, const Matrix& Y, const DplsSpec& spec) {
    DplsModel m;
    // Step 1: PLS projections. Step 2: deep map between the frozen scores.
    m.pls = fit_nipals(X, Y, spec.K);
    const Network shape = make_network(m.pls.K, spec.hidden, m.pls.K, spec.activation);
    std::optional<Matrix> warm;
    if (spec.train.init == InitScheme::pls_warm_start) {
        // Seed the first layer with the inner linear coefficients.
        Matrix w0 = Matrix::Zero(shape.layers.front().weight.rows(), m.pls.K);
        const Index rows = std::min<Index>(w0.rows(), m.pls.K);
        for (Index i = 0; i < rows; ++i) w0(i, i) = m.pls.beta(i);
        warm = w0;
    }
    m.net = train_adam(shape, m.pls.V, m.pls.U, spec.train, warm).net;
    return m;
}

Matrix predict_dpls(const DplsModel& m, const Matrix& X_new) {
    return predict_dpls_truncated(m, X_new, m.pls.K);
}

Matrix predict_dpls_truncated(const DplsModel& m, const Matrix& X_new, int k) {
    if (k < 0 || k > m.pls.K) {
        throw Error(ErrorCode::InvalidConfig, "truncation k out of range");
    }
    const Matrix scores = m.pls.score(X_new);
    const Matrix u_hat = forward(m.net, scores);
    Matrix out = u_hat.leftCols(k) * m.pls.Q.topRows(k);
    out.rowwise() += m.pls.y_center.transpose();
    return out;
}

Matrix predict_dpls_standardized(const DplsModel& m, const Matrix& X_std_rows) {
    const Matrix scores = X_std_rows * m.pls.rotation();
    Matrix out = forward(m.net, scores) * m.pls.Q;
    out.rowwise() += m.pls.y_center.transpose();
    return out;
}

Matrix covariate_jacobian(const DplsModel& m, const Vector& x_std) {
    if (x_std.size() != m.pls.p()) {
        throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
    }
    const Matrix R = m.pls.rotation();            // p x K
    const Vector v = R.transpose() * x_std;       // K
    const Matrix Jg = jacobian(m.net, v);         // K x K
    return m.pls.Q.transpose() * Jg * R.transpose(); // q x p
}

Matrix covariate_hessian(const DplsModel& m, const Vector& x_std, Index output_index) {
    if (x_std.size() != m.pls.p()) {
        throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
    }
    if (output_index < 0 || output_index >= m.pls.q()) {
        throw Error(ErrorCode::InvalidConfig, "output index out of range");
    }
    const Matrix R = m.pls.rotation();
    const Vector v = R.transpose() * x_std;
    Matrix H = Matrix::Zero(m.pls.p(), m.pls.p());
    for (Index s = 0; s < m.pls.K; ++s) {
        const double weight = m.pls.Q(s, output_index);
        if (weight == 0.0) continue;
        H += weight * (R * hessian(m.net, v, s) * R.transpose());
    }
    return 0.5 * (H + H.transpose());
}

Matrix latent_factors(const DplsModel& m) {
    const Vector origin = Vector::Zero(m.pls.K);
    return jacobian(m.net, origin).transpose() * m.pls.Q; // K x q
}

std::vector<Attribution> taylor_attribution(const DplsModel& m, const Matrix& V_rows) {
    if (V_rows.cols() != m.pls.K) {
        throw Error(ErrorCode::DimensionMismatch, "score rows must have K columns");
    }
    const Index K = m.pls.K;
    const Index q = m.pls.q();
    const Vector origin = Vector::Zero(K);
    const Vector g0 = forward(m.net, origin.transpose()).row(0);
    const Matrix J0 = jacobian(m.net, origin); // K x K
    std::vector<Matrix> H0;
    H0.reserve(static_cast<std::size_t>(K));
    for (Index s = 0; s < K; ++s) H0.push_back(hessian(m.net, origin, s));

    // Prediction at the center, response centering folded into the intercept.
    const Vector alpha = m.pls.Q.transpose() * g0 + m.pls.y_center;
    const Matrix factors = J0.transpose() * m.pls.Q; // K x q

    const Matrix totals =
        (forward(m.net, V_rows) * m.pls.Q).rowwise() + m.pls.y_center.transpose();

    std::vector<Attribution> out;
    out.reserve(static_cast<std::size_t>(V_rows.rows()));
    for (Index i = 0; i < V_rows.rows(); ++i) {
        const Vector v = V_rows.row(i);
        Attribution a;
        a.alpha = alpha;
        a.factor_linear = Matrix::Zero(K, q);
        for (Index s = 0; s < K; ++s) a.factor_linear.row(s) = v(s) * factors.row(s);
        a.linear = a.factor_linear.colwise().sum();
        Vector quad_scores(K);
        for (Index s = 0; s < K; ++s) quad_scores(s) = 0.5 * v.dot(H0[s] * v);
        a.quadratic = m.pls.Q.transpose() * quad_scores;
        a.total = totals.row(i);
        a.hot = a.total - a.alpha - a.linear - a.quadratic;
        out.push_back(std::move(a));
    }
    return out;
}

AttributionSummary summarize_attribution(const std::vector<Attribution>& rows, Index n_top) {
    if (rows.empty()) throw Error(ErrorCode::InvalidConfig, "no attribution rows");
    AttributionSummary s;
    const Index q = rows.front().alpha.size();
    const Index K = rows.front().factor_linear.rows();
    s.alpha = Vector::Zero(q);
    s.linear = Vector::Zero(q);
    s.quadratic = Vector::Zero(q);
    s.hot = Vector::Zero(q);
    s.total = Vector::Zero(q);
    s.factor_linear = Matrix::Zero(K, q);
    for (const auto& a : rows) {
        s.alpha += a.alpha;
        s.linear += a.linear;
        s.quadratic += a.quadratic;
        s.hot += a.hot;
        s.total += a.total;
        s.factor_linear += a.factor_linear;
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    s.alpha *= inv;
    s.linear *= inv;
    s.quadratic *= inv;
    s.hot *= inv;
    s.total *= inv;
    s.factor_linear *= inv;

    std::vector<Index> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return s.factor_linear.row(a).cwiseAbs().sum() >
               s.factor_linear.row(b).cwiseAbs().sum();
    });
    const Index keep = std::min<Index>(n_top, K);
    s.top_factors.assign(order.begin(), order.begin() + keep);
    return s;
}

SensitivityReport sensitivity_report(const DplsModel& m, const Matrix& X_eval) {
    SensitivityReport r;
    const Vector zero = Vector::Zero(m.pls.p());
    r.jacobian_at_zero = covariate_jacobian(m, zero);
    r.jacobian_mean = Matrix::Zero(m.pls.q(), m.pls.p());
    const Matrix Xs = apply_standardizer(m.pls.x_std, X_eval);
    for (Index i = 0; i < Xs.rows(); ++i) {
        r.jacobian_mean += covariate_jacobian(m, Xs.row(i));
    }
    if (Xs.rows() > 0) r.jacobian_mean /= static_cast<double>(Xs.rows());
    for (Index j = 0; j < m.pls.q(); ++j) {
        r.hessian_at_zero.push_back(covariate_hessian(m, zero, j));
    }
    return r;
}

SensitivityReport bootstrap_sensitivities(const DplsSpec& spec, const Matrix& X,
                                          const Matrix& Y, int n_resamples,
                                          std::uint64_t seed, int jobs) {
    if (n_resamples < 2) {
        throw Error(ErrorCode::InvalidConfig, "bootstrap needs >= 2 resamples");
    }
    DplsSpec full_spec = spec;
    full_spec.train.seed = derive_seed(seed, "bootstrap/full");
    const DplsModel full = fit_dpls(X, Y, full_spec);
    SensitivityReport report = sensitivity_report(full, X);
    report.resamples_requested = n_resamples;

    const Index n = X.rows();
    std::vector<std::optional<Matrix>> draws(static_cast<std::size_t>(n_resamples));
    parallel_for(static_cast<std::size_t>(n_resamples), jobs, [&](std::size_t b) {
        Rng rng(derive_seed(seed, "bootstrap/rows", b));
        Matrix Xb(n, X.cols());
        Matrix Yb(n, Y.cols());
        for (Index i = 0; i < n; ++i) {
            const Index pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            Xb.row(i) = X.row(pick);
            Yb.row(i) = Y.row(pick);
        }
        DplsSpec bs = spec;
        bs.train.seed = derive_seed(seed, "bootstrap/net", b);
        try {
            const DplsModel mb = fit_dpls(Xb, Yb, bs);
            draws[b] = covariate_jacobian(mb, Vector::Zero(X.cols()));
        } catch (const Error&) {
            draws[b] = std::nullopt; // failed resample, dropped and counted
        }
    });

    std::vector<const Matrix*> kept;
    for (const auto& d : draws) {
        if (d.has_value()) kept.push_back(&*d);
    }
    report.resamples_failed = n_resamples - static_cast<int>(kept.size());
    if (kept.size() >= 2) {
        QuantileTriplet qt;
        const Index rows = kept.front()->rows();
        const Index cols = kept.front()->cols();
        qt.q05.resize(rows, cols);
        qt.q50.resize(rows, cols);
        qt.q95.resize(rows, cols);
        std::vector<double> cell;
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) {
                cell.clear();
                for (const Matrix* d : kept) cell.push_back((*d)(i, j));
                qt.q05(i, j) = empirical_quantile(cell, 0.05);
                qt.q50(i, j) = empirical_quantile(cell, 0.50);
                qt.q95(i, j) = empirical_quantile(cell, 0.95);
            }
        }
        report.bootstrap_quantiles = std::move(qt);
    }
    return report;
}

ConsistencyReport verify_composability(const SynthConfig& cfg, int K,
                                       const std::vector<Index>& n_grid) {
    if (cfg.regime != SynthRegime::gaussian) {
        throw Error(ErrorCode::InvalidLink,
                    "composability requires the gaussian regime; the theorem's "
                    "hypotheses fail otherwise");
    }
    if (n_grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty n grid");

    ConsistencyReport report;
    report.link = cfg.link;
    for (const Index n : n_grid) {
        SynthConfig local = cfg;
        local.n = n;
        const SynthData data = generate_synthetic(local);
        const PlsModel m = fit_nipals(data.X, data.Y, K);
        const Matrix est = pls_coefficients(m).coef_raw;
        const Matrix truth = data.P_true.transpose() * data.B_true * data.Q_true;

        ConsistencyEntry entry;
        entry.n = n;
        entry.cosines.resize(truth.cols());
        for (Index j = 0; j < truth.cols(); ++j) {
            entry.cosines(j) = abs_cosine(est.col(j), truth.col(j));
        }
        entry.kappas.resize(data.W_latent.cols());
        for (Index s = 0; s < data.W_latent.cols(); ++s) {
            const Vector w = data.W_latent.col(s);
            Vector g(w.size());
            for (Index i = 0; i < w.size(); ++i) g(i) = apply_link(cfg.link, w(i));
            const double wbar = w.mean();
            const double gbar = g.mean();
            const double cov = ((w.array() - wbar) * (g.array() - gbar)).sum() /
                               static_cast<double>(w.size() - 1);
            const double var = (w.array() - wbar).square().sum() /
                               static_cast<double>(w.size() - 1);
            entry.kappas(s) = cov / var;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

Vector expected_return_attribution(const Matrix& loadings, const Vector& factor_mean) {
    if (loadings.cols() != factor_mean.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "loadings have " + std::to_string(loadings.cols()) +
                        " factors, mean has " + std::to_string(factor_mean.size()));
    }
    return loadings * factor_mean;
}

VarianceAttribution conditional_variance_attribution(const Matrix& loadings,
                                                     Matrix factor_cov,
                                                     const Vector& resid_var) {
    if (factor_cov.rows() != factor_cov.cols() || factor_cov.rows() != loadings.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "factor covariance shape mismatch");
    }
    if (resid_var.size() != loadings.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "residual variance length mismatch");
    }
    if ((resid_var.array() < 0.0).any()) {
        throw Error(ErrorCode::InvalidConfig, "residual variances must be >= 0");
    }
    VarianceAttribution out;
    factor_cov = 0.5 * (factor_cov + factor_cov.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(factor_cov);
    Vector ev = es.eigenvalues();
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < 0.0) {
            ev(i) = 0.0;
            out.clipped_to_psd = true;
        }
    }
    const Matrix psd = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.variances.resize(loadings.rows());
    for (Index i = 0; i < loadings.rows(); ++i) {
        const Vector v = loadings.row(i);
        out.variances(i) = std::max(v.dot(psd * v), 0.0) + resid_var(i);
    }
    return out;
}

} // namespace dpls
