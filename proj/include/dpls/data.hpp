#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpls/types.hpp"

namespace dpls {

// Column standardizer fitted on training rows only.
struct Standardizer {
    Vector means;
    Vector sds; // strictly positive
    double target_mean = 0.0;
    double target_sd = 1.0;

    Index dim() const { return means.size(); }
};

Standardizer fit_standardizer(const Matrix& features);
Matrix apply_standardizer(const Standardizer& s, const Matrix& features);
Vector apply_standardizer(const Standardizer& s, const Vector& row);

// One period of the panel: excess returns paired with lagged characteristics.
struct CrossSection {
    std::int64_t period_id = 0;
    std::vector<std::string> asset_ids;
    Vector returns;  // length N_t
    Matrix features; // N_t x p

    Index n_assets() const { return returns.size(); }
};

struct PanelDataset {
    std::vector<CrossSection> cross_sections;
    std::vector<std::string> feature_names;
    std::size_t dropped_rows = 0; // rows removed at ingestion

    Index n_periods() const { return static_cast<Index>(cross_sections.size()); }
    Index n_features() const { return static_cast<Index>(feature_names.size()); }
    // True when every period holds the same asset ids in the same order.
    bool constant_universe() const;
};

// Column-name mapping for CSV ingestion. Empty feature list means
// "every remaining column is a feature".
struct PanelSchema {
    std::string period_column = "period";
    std::string asset_column = "asset";
    std::string return_column = "ret_excess";
    std::vector<std::string> feature_columns;
};

PanelDataset load_panel(const std::string& path, const PanelSchema& schema = {});
void save_panel(const PanelDataset& panel, const std::string& path,
                const PanelSchema& schema = {});

enum class SynthLink { linear, tanh_link, cubic, softplus_mix };
enum class SynthRegime { gaussian, skewed };

SynthLink parse_link(const std::string& name);
SynthRegime parse_regime(const std::string& name);
std::string link_name(SynthLink link);
std::string regime_name(SynthRegime regime);

struct SynthConfig {
    Index n = 1000;
    Index p = 10;
    Index q = 1;
    Index k_true = 2;
    SynthLink link = SynthLink::linear;
    double noise_sd = 0.0;
    SynthRegime regime = SynthRegime::gaussian;
    std::uint64_t seed = 0;
};

// Latent mechanism: v ~ N(0, I_k); x = v P + noise; u = link(v B); y = u Q + noise.
// P has orthonormal rows with equal column norms (trigonometric frame) so that
// predictor columns share the same population variance; B is the identity and
// Q has unit-norm rows. The skewed regime post-transforms each x column through
// a recentred exponential to a target skewness near 1.
struct SynthData {
    Matrix X; // n x p
    Matrix Y; // n x q
    Matrix P_true; // k x p
    Matrix B_true; // k x k diagonal
    Matrix Q_true; // k x q
    Matrix V_latent; // n x k latent gaussian draws
    Matrix W_latent; // n x k pre-link scores V_latent * B_true
};

SynthData generate_synthetic(const SynthConfig& cfg);

// Apply the configured link elementwise.
double apply_link(SynthLink link, double w);

// Exponent used by the skewed regime; chosen so a standardized
// exp-transformed Gaussian has skewness ~= 1.
inline constexpr double kSkewExponent = 0.3142;

// T periods sharing one latent mechanism; cfg.n assets per period,
// univariate returns (cfg.q must be 1).
struct SynthPanel {
    PanelDataset panel;
    Matrix P_true;
    Matrix B_true;
    Matrix Q_true;
};

SynthPanel generate_panel(const SynthConfig& cfg, Index n_periods);

} // namespace dpls
