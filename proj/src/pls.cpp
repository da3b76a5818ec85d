#include "dpls/pls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/rng.hpp"

namespace dpls {

namespace {

void check_xy(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "X has " + std::to_string(X.rows()) + " rows, Y has " +
                        std::to_string(Y.rows()));
    }
    if (X.rows() < 2) throw Error(ErrorCode::InvalidConfig, "need >= 2 observations");
    if (!X.allFinite() || !Y.allFinite()) {
        throw Error(ErrorCode::InvalidConfig, "non-finite values in X or Y");
    }
}

// Flip the weight sign so the first element above tolerance is non-negative.
bool needs_sign_flip(const Vector& w) {
    const double tol = 1e-12 * w.norm();
    for (Index i = 0; i < w.size(); ++i) {
        if (std::abs(w(i)) > tol) return w(i) < 0.0;
    }
    return false;
}

} // namespace

Matrix PlsModel::rotation() const {
    if (K == 0) return Matrix(P.cols(), 0);
    // P W is upper triangular with positive diagonal by construction.
    return W * (P * W).partialPivLu().solve(Matrix::Identity(K, K));
}

Matrix PlsModel::score(const Matrix& x_raw, ScoreMethod method) const {
    const Matrix xs = apply_standardizer(x_std, x_raw);
    if (method == ScoreMethod::rotation) return xs * rotation();
    return xs * pseudo_inverse(P);
}

PlsModel fit_nipals(const Matrix& X, const Matrix& Y, int K) {
    check_xy(X, Y);
    const Index n = X.rows();
    const Index p = X.cols();
    const Index q = Y.cols();
    if (K < 1 || K > std::min<Index>(p, n - 1)) {
        throw Error(ErrorCode::InvalidConfig,
                    "K must satisfy 1 <= K <= min(p, N-1), got " + std::to_string(K));
    }

    PlsModel m;
    m.x_std = fit_standardizer(X);
    m.y_center = column_means(Y);

    Matrix Xd = apply_standardizer(m.x_std, X);
    Matrix Yd = Y.rowwise() - m.y_center.transpose();

    m.P.resize(K, p);
    m.Q.resize(K, q);
    m.W.resize(p, K);
    m.V.resize(n, K);
    m.U.resize(n, K);
    m.beta.resize(K);

    double sigma_first = 0.0;
    int k = 0;
    for (; k < K; ++k) {
        const Matrix cross = Xd.transpose() * Yd;
        SvdTriplet t = top_singular_triplet(cross);
        if (k == 0) sigma_first = t.sigma;
        if (t.sigma <= 1e-12 * std::max(sigma_first, 1.0)) {
            m.rank_deficient = true;
            break;
        }
        if (needs_sign_flip(t.left)) {
            t.left = -t.left;
            t.right = -t.right;
        }
        Vector v = Xd * t.left;
        // Re-orthogonalize against earlier scores to hold V^T V = I tightly.
        for (Index j = 0; j < k; ++j) v -= m.V.col(j).dot(v) * m.V.col(j);
        const double vnorm = v.norm();
        if (vnorm <= 1e-12) {
            m.rank_deficient = true;
            break;
        }
        v /= vnorm;
        const Vector u = Yd * t.right;

        m.W.col(k) = t.left;
        m.V.col(k) = v;
        m.U.col(k) = u;
        m.Q.row(k) = t.right.transpose();
        m.beta(k) = v.dot(u);
        m.P.row(k) = (Xd.transpose() * v).transpose();

        // Rank-one removal of the extracted component.
        Xd -= v * m.P.row(k);
        Yd -= v * (v.transpose() * Yd);
    }

    if (k < K) {
        m.P.conservativeResize(k, p);
        m.Q.conservativeResize(k, q);
        m.W.conservativeResize(p, k);
        m.V.conservativeResize(n, k);
        m.U.conservativeResize(n, k);
        m.beta.conservativeResize(k);
    }
    m.K = k;
    return m;
}

Matrix predict(const PlsModel& m, const Matrix& X_new) {
    return predict_truncated(m, X_new, m.K);
}

Matrix predict_truncated(const PlsModel& m, const Matrix& X_new, int k) {
    if (k < 0 || k > m.K) {
        throw Error(ErrorCode::InvalidConfig, "truncation k out of range");
    }
    const Matrix scores = m.score(X_new);
    Matrix out = Matrix::Zero(X_new.rows(), m.q());
    if (k > 0) {
        out = scores.leftCols(k) * m.beta.head(k).asDiagonal() * m.Q.topRows(k);
    }
    out.rowwise() += m.y_center.transpose();
    return out;
}

LinearCoefficients pls_coefficients(const PlsModel& m) {
    LinearCoefficients c;
    if (m.K == 0) {
        c.coef_std = Matrix::Zero(m.p(), m.q());
    } else {
        c.coef_std = m.rotation() * m.beta.asDiagonal() * m.Q;
    }
    c.coef_raw = c.coef_std.array().colwise() / m.x_std.sds.array();
    c.intercept = m.y_center - c.coef_raw.transpose() * m.x_std.means;
    return c;
}

KrylovBasis krylov_basis(const Matrix& X, const Matrix& Y, int K) {
    check_xy(X, Y);
    const Index n = X.rows();
    const Index p = X.cols();
    const Index q = Y.cols();
    if (K < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");

    const Standardizer s = fit_standardizer(X);
    const Matrix Xs = apply_standardizer(s, X);
    const Matrix Yc = Y.rowwise() - column_means(Y).transpose();

    KrylovBasis b;
    b.Sxx = Xs.transpose() * Xs / static_cast<double>(n - 1);
    b.Sxy = Xs.transpose() * Yc / static_cast<double>(n - 1);
    b.R.resize(p, static_cast<Index>(K) * q);
    Matrix block = b.Sxy;
    for (int k = 0; k < K; ++k) {
        b.R.middleCols(static_cast<Index>(k) * q, q) = block;
        if (k + 1 < K) block = b.Sxx * block;
    }
    return b;
}

LinearCoefficients helland_coefficients(const Matrix& X, const Matrix& Y, int K) {
    const KrylovBasis b = krylov_basis(X, Y, K);
    const Standardizer s = fit_standardizer(X);
    const Vector y_mean = column_means(Y);

    LinearCoefficients c;

    // Orthonormalize the Krylov block; the estimator is invariant under
    // right-multiplication by any invertible map, and powers of Sxx make the
    // raw columns nearly dependent.
    Eigen::JacobiSVD<Matrix> svd(b.R, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    const double tol = 1e-12 * sv(0);
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    if (rank < b.R.cols()) c.used_pseudo_inverse = true;
    const Matrix G = svd.matrixU().leftCols(rank);

    const Matrix inner = G.transpose() * b.Sxx * G;
    Eigen::SelfAdjointEigenSolver<Matrix> es(inner);
    const Vector& ev = es.eigenvalues();
    const double etol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Vector inv = Vector::Zero(rank);
    for (Index i = 0; i < rank; ++i) {
        if (ev(i) > etol) {
            inv(i) = 1.0 / ev(i);
        } else {
            c.used_pseudo_inverse = true;
        }
    }
    const Matrix inner_pinv =
        es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

    c.coef_std = G * inner_pinv * (G.transpose() * b.Sxy);
    c.coef_raw = c.coef_std.array().colwise() / s.sds.array();
    c.intercept = y_mean - c.coef_raw.transpose() * s.means;
    return c;
}

ScaleFactorReport scale_factors(const Matrix& X, const Vector& y, int K) {
    check_xy(X, Matrix(y));
    const Index n = X.rows();
    if (K < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");

    const Standardizer s = fit_standardizer(X);
    const Matrix Xs = apply_standardizer(s, X);
    const Vector yc = y.array() - y.mean();

    // Eigen-decomposition of the sample second-moment matrix ave(x x^T).
    const Matrix M = Xs.transpose() * Xs / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const Index p = X.cols();

    std::vector<Index> order(p);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index bdx) { return es.eigenvalues()(a) > es.eigenvalues()(bdx); });

    const double emax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    Index rank = 0;
    for (Index i = 0; i < p; ++i) {
        if (es.eigenvalues()(order[i]) > 1e-12 * std::max(emax, 1e-300)) ++rank;
    }
    if (rank == 0) throw Error(ErrorCode::InvalidConfig, "predictor matrix is numerically zero");

    Matrix evecs(p, rank);
    Vector evals(rank);
    for (Index i = 0; i < rank; ++i) {
        evals(i) = es.eigenvalues()(order[i]);
        evecs.col(i) = es.eigenvectors().col(order[i]);
    }

    // OLS route (standardized scale, min-norm when rank-deficient).
    const Vector beta_ols = pseudo_inverse(Xs) * yc;
    // Deflation route for the PLS coefficient.
    const int k_eff = std::min<int>(K, static_cast<int>(std::min<Index>(p, n - 1)));
    const PlsModel pm = fit_nipals(X, y, k_eff);
    const Vector beta_pls = pls_coefficients(pm).coef_std.col(0);

    ScaleFactorReport rep;
    rep.K = k_eff;
    rep.eigenvalues = evals;
    rep.alpha_ols.resize(rank);
    rep.factors = Vector::Zero(rank);
    rep.factors_closed_form = Vector::Zero(rank);
    rep.defined.assign(rank, false);
    rep.degenerate.assign(rank, false);

    for (Index j = 0; j < rank; ++j) rep.alpha_ols(j) = evecs.col(j).dot(beta_ols);
    const double alpha_scale = rep.alpha_ols.cwiseAbs().maxCoeff();

    for (Index j = 0; j < rank; ++j) {
        if (std::abs(rep.alpha_ols(j)) > 1e-8 * std::max(alpha_scale, 1e-300)) {
            rep.defined[j] = true;
            rep.factors(j) = evecs.col(j).dot(beta_pls) / rep.alpha_ols(j);
        }
        const bool near_prev = j > 0 && std::abs(evals(j - 1) - evals(j)) <= 1e-8 * emax;
        const bool near_next =
            j + 1 < rank && std::abs(evals(j) - evals(j + 1)) <= 1e-8 * emax;
        rep.degenerate[j] = near_prev || near_next;
    }

    // Closed-form cross-check: f_j = sum_k theta_k e_j^(2k) with theta from the
    // Krylov normal equations, evaluated on eigenvalues scaled by the largest
    // to keep the moment powers conditioned.
    {
        const Index kk = static_cast<Index>(k_eff);
        Matrix W(kk, kk);
        Vector eta(kk);
        const Vector scaled = evals / emax;
        for (Index a = 1; a <= kk; ++a) {
            double acc_eta = 0.0;
            for (Index j = 0; j < rank; ++j) {
                acc_eta += rep.alpha_ols(j) * rep.alpha_ols(j) *
                           std::pow(scaled(j), static_cast<double>(a + 1));
            }
            eta(a - 1) = acc_eta;
            for (Index bdx = 1; bdx <= kk; ++bdx) {
                double acc = 0.0;
                for (Index j = 0; j < rank; ++j) {
                    acc += rep.alpha_ols(j) * rep.alpha_ols(j) *
                           std::pow(scaled(j), static_cast<double>(a + bdx + 1));
                }
                W(a - 1, bdx - 1) = acc;
            }
        }
        const Vector theta = pseudo_inverse(W, 1e-13) * eta;
        for (Index j = 0; j < rank; ++j) {
            double f = 0.0;
            for (Index a = 1; a <= kk; ++a) {
                f += theta(a - 1) * std::pow(scaled(j), static_cast<double>(a));
            }
            rep.factors_closed_form(j) = f;
        }
    }
    return rep;
}

CvSelection select_k_cv(const Matrix& X, const Matrix& Y, const std::vector<int>& k_grid,
                        int folds, std::uint64_t seed) {
    if (k_grid.empty()) throw Error(ErrorCode::GridEmpty, "empty k grid");
    if (folds < 2) throw Error(ErrorCode::GridEmpty, "cross-validation needs >= 2 folds");
    check_xy(X, Y);
    const Index n = X.rows();
    if (folds > n) throw Error(ErrorCode::InvalidConfig, "more folds than observations");

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(seed, "cv/permutation"));
    for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[i], perm[j]);
    }

    std::vector<double> sse(k_grid.size(), 0.0);
    std::vector<Index> counts(k_grid.size(), 0);

    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        const Index n_test = hi - lo;
        const Index n_train = n - n_test;
        if (n_test == 0 || n_train < 2) continue;

        Matrix Xtr(n_train, X.cols()), Xte(n_test, X.cols());
        Matrix Ytr(n_train, Y.cols()), Yte(n_test, Y.cols());
        Index tr = 0, te = 0;
        for (Index i = 0; i < n; ++i) {
            if (i >= lo && i < hi) {
                Xte.row(te) = X.row(perm[i]);
                Yte.row(te++) = Y.row(perm[i]);
            } else {
                Xtr.row(tr) = X.row(perm[i]);
                Ytr.row(tr++) = Y.row(perm[i]);
            }
        }
        for (std::size_t g = 0; g < k_grid.size(); ++g) {
            const int k = k_grid[g];
            if (k < 1 || k > std::min<Index>(X.cols(), n_train - 1)) {
                throw Error(ErrorCode::InvalidConfig,
                            "grid k=" + std::to_string(k) + " infeasible for fold size");
            }
            const PlsModel m = fit_nipals(Xtr, Ytr, k);
            const Matrix pred = predict(m, Xte);
            sse[g] += (pred - Yte).squaredNorm();
            counts[g] += n_test * Y.cols();
        }
    }

    CvSelection sel;
    sel.cv_mse.resize(k_grid.size());
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        sel.cv_mse[g] = counts[g] > 0 ? sse[g] / static_cast<double>(counts[g])
                                      : std::numeric_limits<double>::infinity();
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < k_grid.size(); ++g) {
        const bool better = sel.cv_mse[g] < sel.cv_mse[best];
        const bool tie_smaller =
            sel.cv_mse[g] == sel.cv_mse[best] && k_grid[g] < k_grid[best];
        if (better || tie_smaller) best = g;
    }
    sel.k_star = k_grid[best];
    return sel;
}

} // namespace dpls
