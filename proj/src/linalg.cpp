#include "dpls/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpls/errors.hpp"

namespace dpls {

Matrix pseudo_inverse(const Matrix& m, double tol_scale) {
    if (m.size() == 0) return Matrix(m.cols(), m.rows());
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double tol = tol_scale * s(0);
    Vector inv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > tol) inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

SvdTriplet top_singular_triplet(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdTriplet t;
    t.left = svd.matrixU().col(0);
    t.right = svd.matrixV().col(0);
    t.sigma = svd.singularValues()(0);
    return t;
}

Vector column_means(const Matrix& m) { return m.colwise().mean(); }

Vector column_sds(const Matrix& m) {
    if (m.rows() < 2) throw Error(ErrorCode::InvalidConfig, "need >= 2 rows for a sample sd");
    const Vector mu = column_means(m);
    Vector out(m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        out(j) = std::sqrt((m.col(j).array() - mu(j)).square().sum() /
                           static_cast<double>(m.rows() - 1));
    }
    return out;
}

double sample_mean(const Vector& v) { return v.mean(); }

double sample_sd(const Vector& v) {
    if (v.size() < 2) throw Error(ErrorCode::InvalidConfig, "need >= 2 values for a sample sd");
    const double mu = v.mean();
    return std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size() - 1));
}

double sample_skewness(const Vector& v) {
    const double mu = v.mean();
    const auto centered = v.array() - mu;
    const double m2 = centered.square().mean();
    const double m3 = centered.cube().mean();
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

double abs_cosine(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::abs(a.dot(b)) / (na * nb);
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorCode::InvalidConfig, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values.front();
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace dpls
