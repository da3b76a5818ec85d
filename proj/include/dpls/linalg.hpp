#pragma once

#include "dpls/types.hpp"

namespace dpls {

// Moore-Penrose pseudo-inverse via SVD; singular values below
// tol_scale * sigma_max are treated as zero.
Matrix pseudo_inverse(const Matrix& m, double tol_scale = 1e-12);

// Rank-one oriented top singular triplet of a (typically small) matrix.
struct SvdTriplet {
    Vector left;
    Vector right;
    double sigma = 0.0;
};
SvdTriplet top_singular_triplet(const Matrix& m);

// Sample column means / standard deviations (n-1 divisor).
Vector column_means(const Matrix& m);
Vector column_sds(const Matrix& m);

double sample_mean(const Vector& v);
double sample_sd(const Vector& v); // n-1 divisor
double sample_skewness(const Vector& v);

// |cos angle| between two vectors; 0 if either is numerically null.
double abs_cosine(const Vector& a, const Vector& b);

// Empirical quantile with linear interpolation on the sorted sample.
double empirical_quantile(std::vector<double> values, double q);

} // namespace dpls
