#include "dpls/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/rng.hpp"

namespace dpls {

Standardizer fit_standardizer(const Matrix& features) {
    if (features.rows() < 2) {
        throw Error(ErrorCode::InvalidConfig, "standardizer needs >= 2 rows");
    }
    Standardizer s;
    s.means = column_means(features);
    s.sds = column_sds(features);
    for (Index j = 0; j < s.sds.size(); ++j) {
        if (!(s.sds(j) > 0.0)) {
            throw Error(ErrorCode::ZeroVarianceColumn,
                        "column " + std::to_string(j) + " has zero sample variance");
        }
    }
    return s;
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
    if (features.cols() != s.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "standardizer has " + std::to_string(s.dim()) + " columns, input has " +
                        std::to_string(features.cols()));
    }
    Matrix out = features;
    for (Index j = 0; j < out.cols(); ++j) {
        out.col(j) = ((out.col(j).array() - s.means(j)) / s.sds(j)) * s.target_sd + s.target_mean;
    }
    return out;
}

Vector apply_standardizer(const Standardizer& s, const Vector& row) {
    if (row.size() != s.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "row length does not match standardizer");
    }
    return (((row - s.means).array() / s.sds.array()) * s.target_sd + s.target_mean).matrix();
}

bool PanelDataset::constant_universe() const {
    if (cross_sections.size() < 2) return true;
    const auto& first = cross_sections.front().asset_ids;
    for (const auto& cs : cross_sections) {
        if (cs.asset_ids != first) return false;
    }
    return true;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool is_missing_marker(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

// Returns false for a recognized missing marker; throws on garbage.
bool parse_cell(const std::string& raw, const std::string& column, std::size_t row,
                double* out) {
    const std::string s = trim(raw);
    if (is_missing_marker(s)) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == nullptr || *end != '\0' || end == s.c_str()) {
        throw Error(ErrorCode::NonNumericCell,
                    "column '" + column + "' row " + std::to_string(row) + ": '" + s + "'");
    }
    if (!std::isfinite(v)) return false;
    *out = v;
    return true;
}

} // namespace

PanelDataset load_panel(const std::string& path, const PanelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw Error(ErrorCode::EmptyPanel, path);
    std::vector<std::string> header = split_csv_line(header_line);
    for (auto& h : header) h = trim(h);

    auto column_index = [&](const std::string& name) -> Index {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error(ErrorCode::MissingColumn, "'" + name + "' not in header");
        }
        return static_cast<Index>(it - header.begin());
    };

    const Index period_col = column_index(schema.period_column);
    const Index asset_col = column_index(schema.asset_column);
    const Index return_col = column_index(schema.return_column);

    std::vector<std::string> feature_names;
    std::vector<Index> feature_cols;
    if (schema.feature_columns.empty()) {
        for (Index j = 0; j < static_cast<Index>(header.size()); ++j) {
            if (j == period_col || j == asset_col || j == return_col) continue;
            feature_names.push_back(header[j]);
            feature_cols.push_back(j);
        }
    } else {
        for (const auto& name : schema.feature_columns) {
            feature_cols.push_back(column_index(name));
            feature_names.push_back(name);
        }
    }
    if (feature_names.empty()) {
        throw Error(ErrorCode::MissingColumn, "header has no feature columns");
    }

    struct Row {
        std::string asset;
        double ret;
        std::vector<double> features;
    };
    std::map<std::int64_t, std::vector<Row>> by_period;
    std::size_t dropped = 0;
    std::size_t row_number = 1;
    std::string line;
    while (std::getline(in, line)) {
        ++row_number;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size()) {
            throw Error(ErrorCode::NonNumericCell,
                        "row " + std::to_string(row_number) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        }
        double period_value = 0.0;
        if (!parse_cell(fields[period_col], schema.period_column, row_number, &period_value)) {
            ++dropped;
            continue;
        }
        Row row;
        row.asset = trim(fields[asset_col]);
        bool ok = parse_cell(fields[return_col], schema.return_column, row_number, &row.ret);
        row.features.resize(feature_cols.size());
        for (std::size_t f = 0; ok && f < feature_cols.size(); ++f) {
            ok = parse_cell(fields[feature_cols[f]], feature_names[f], row_number,
                            &row.features[f]);
        }
        if (!ok || row.asset.empty()) {
            ++dropped;
            continue;
        }
        by_period[static_cast<std::int64_t>(period_value)].push_back(std::move(row));
    }

    if (by_period.empty()) throw Error(ErrorCode::EmptyPanel, path);

    PanelDataset panel;
    panel.feature_names = feature_names;
    panel.dropped_rows = dropped;
    for (auto& [period, rows] : by_period) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.asset < b.asset; });
        CrossSection cs;
        cs.period_id = period;
        cs.returns.resize(static_cast<Index>(rows.size()));
        cs.features.resize(static_cast<Index>(rows.size()),
                           static_cast<Index>(feature_names.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            cs.asset_ids.push_back(rows[i].asset);
            cs.returns(static_cast<Index>(i)) = rows[i].ret;
            for (std::size_t f = 0; f < rows[i].features.size(); ++f) {
                cs.features(static_cast<Index>(i), static_cast<Index>(f)) = rows[i].features[f];
            }
        }
        panel.cross_sections.push_back(std::move(cs));
    }
    return panel;
}

void save_panel(const PanelDataset& panel, const std::string& path, const PanelSchema& schema) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << schema.period_column << ',' << schema.asset_column << ',' << schema.return_column;
    for (const auto& name : panel.feature_names) out << ',' << name;
    out << '\n';
    char buf[64];
    auto write_value = [&](double v) {
        // 17 significant digits round-trip a double exactly.
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (const auto& cs : panel.cross_sections) {
        for (Index i = 0; i < cs.n_assets(); ++i) {
            out << cs.period_id << ',' << cs.asset_ids[i] << ',';
            write_value(cs.returns(i));
            for (Index j = 0; j < cs.features.cols(); ++j) {
                out << ',';
                write_value(cs.features(i, j));
            }
            out << '\n';
        }
    }
}

SynthLink parse_link(const std::string& name) {
    if (name == "linear") return SynthLink::linear;
    if (name == "tanh") return SynthLink::tanh_link;
    if (name == "cubic") return SynthLink::cubic;
    if (name == "softplus_mix") return SynthLink::softplus_mix;
    throw Error(ErrorCode::InvalidConfig, "unknown link '" + name + "'");
}

SynthRegime parse_regime(const std::string& name) {
    if (name == "gaussian") return SynthRegime::gaussian;
    if (name == "skewed") return SynthRegime::skewed;
    throw Error(ErrorCode::InvalidConfig, "unknown regime '" + name + "'");
}

std::string link_name(SynthLink link) {
    switch (link) {
        case SynthLink::linear: return "linear";
        case SynthLink::tanh_link: return "tanh";
        case SynthLink::cubic: return "cubic";
        case SynthLink::softplus_mix: return "softplus_mix";
    }
    return "linear";
}

std::string regime_name(SynthRegime regime) {
    return regime == SynthRegime::gaussian ? "gaussian" : "skewed";
}

double apply_link(SynthLink link, double w) {
    switch (link) {
        case SynthLink::linear: return w;
        case SynthLink::tanh_link: return std::tanh(w);
        case SynthLink::cubic: return w + 0.2 * w * w * w;
        case SynthLink::softplus_mix: return std::log1p(std::exp(-std::abs(w))) +
                                             std::max(w, 0.0) - std::log(2.0) + 0.5 * w;
    }
    return w;
}

namespace {

void validate_config(const SynthConfig& cfg) {
    if (cfg.n < 1 || cfg.p < 1 || cfg.q < 1 || cfg.k_true < 1) {
        throw Error(ErrorCode::InvalidConfig, "all counts must be >= 1");
    }
    if (cfg.k_true > cfg.p) {
        throw Error(ErrorCode::InvalidConfig, "k_true must not exceed p");
    }
    if (!(cfg.noise_sd >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "noise_sd must be >= 0");
    }
    // A trigonometric frame with equal column norms needs k/2 distinct
    // frequencies below p/2 (plus the constant row when k is odd).
    const Index pairs = cfg.k_true / 2;
    if (pairs > (cfg.p - 1) / 2) {
        throw Error(ErrorCode::InvalidConfig,
                    "k_true too large for an equal-variance loading frame at this p");
    }
}

// k x p loading frame: orthonormal rows, exactly equal column norms, so
// every predictor column has the same population variance. Odd k uses the
// constant row; each frequency pair gets a random phase.
Matrix loading_frame(Index k, Index p, Rng& rng) {
    Matrix P(k, p);
    Index row = 0;
    if (k % 2 == 1) {
        P.row(row++).setConstant(1.0 / std::sqrt(static_cast<double>(p)));
    }
    const double amp = std::sqrt(2.0 / static_cast<double>(p));
    for (Index f = 1; row < k; ++f) {
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (Index i = 0; i < p; ++i) {
            const double angle =
                2.0 * M_PI * static_cast<double>(f) * static_cast<double>(i) /
                    static_cast<double>(p) +
                phase;
            P(row, i) = amp * std::cos(angle);
            P(row + 1, i) = amp * std::sin(angle);
        }
        row += 2;
    }
    return P;
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    }
    return m;
}

} // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
    validate_config(cfg);
    Rng rng(derive_seed(cfg.seed, "synth"));

    SynthData d;
    d.P_true = loading_frame(cfg.k_true, cfg.p, rng);
    d.B_true = Matrix::Identity(cfg.k_true, cfg.k_true);
    d.Q_true = gaussian_matrix(cfg.k_true, cfg.q, rng);
    for (Index m = 0; m < cfg.k_true; ++m) d.Q_true.row(m).normalize();

    d.V_latent = gaussian_matrix(cfg.n, cfg.k_true, rng);
    d.W_latent = d.V_latent * d.B_true;

    d.X = d.V_latent * d.P_true;
    if (cfg.noise_sd > 0.0) d.X += cfg.noise_sd * gaussian_matrix(cfg.n, cfg.p, rng);

    Matrix U(cfg.n, cfg.k_true);
    for (Index i = 0; i < cfg.n; ++i) {
        for (Index m = 0; m < cfg.k_true; ++m) U(i, m) = apply_link(cfg.link, d.W_latent(i, m));
    }
    d.Y = U * d.Q_true;
    if (cfg.noise_sd > 0.0) d.Y += cfg.noise_sd * gaussian_matrix(cfg.n, cfg.q, rng);

    if (cfg.regime == SynthRegime::skewed) {
        // Monotone convex map per column: standardize, exponentiate, recentre.
        for (Index j = 0; j < d.X.cols(); ++j) {
            const double mu = d.X.col(j).mean();
            const double sd = sample_sd(d.X.col(j));
            Vector col = ((d.X.col(j).array() - mu) / sd * kSkewExponent).exp();
            d.X.col(j) = (col.array() - col.mean()) / sample_sd(col);
        }
    }
    return d;
}

SynthPanel generate_panel(const SynthConfig& cfg, Index n_periods) {
    if (cfg.q != 1) {
        throw Error(ErrorCode::InvalidConfig, "panel generation expects univariate returns");
    }
    if (n_periods < 1) throw Error(ErrorCode::InvalidConfig, "need >= 1 period");
    validate_config(cfg);

    // One latent mechanism shared across periods, fresh draws per period.
    Rng mech_rng(derive_seed(cfg.seed, "panel/mechanism"));
    SynthPanel out;
    out.P_true = loading_frame(cfg.k_true, cfg.p, mech_rng);
    out.B_true = Matrix::Identity(cfg.k_true, cfg.k_true);
    out.Q_true = gaussian_matrix(cfg.k_true, 1, mech_rng);
    for (Index m = 0; m < cfg.k_true; ++m) out.Q_true.row(m).normalize();

    for (Index j = 0; j < cfg.p; ++j) {
        out.panel.feature_names.push_back("f" + std::to_string(j));
    }
    char asset_buf[32];
    for (Index t = 0; t < n_periods; ++t) {
        Rng rng(derive_seed(cfg.seed, "panel/period", static_cast<std::uint64_t>(t)));
        Matrix V = gaussian_matrix(cfg.n, cfg.k_true, rng);
        Matrix X = V * out.P_true;
        if (cfg.noise_sd > 0.0) X += cfg.noise_sd * gaussian_matrix(cfg.n, cfg.p, rng);
        Vector y(cfg.n);
        for (Index i = 0; i < cfg.n; ++i) {
            double acc = 0.0;
            for (Index m = 0; m < cfg.k_true; ++m) {
                acc += apply_link(cfg.link, V(i, m)) * out.Q_true(m, 0);
            }
            y(i) = acc;
        }
        if (cfg.noise_sd > 0.0) {
            for (Index i = 0; i < cfg.n; ++i) y(i) += cfg.noise_sd * rng.gaussian();
        }
        if (cfg.regime == SynthRegime::skewed) {
            for (Index j = 0; j < X.cols(); ++j) {
                const double mu = X.col(j).mean();
                const double sd = sample_sd(X.col(j));
                Vector col = ((X.col(j).array() - mu) / sd * kSkewExponent).exp();
                X.col(j) = (col.array() - col.mean()) / sample_sd(col);
            }
        }
        CrossSection cs;
        cs.period_id = t;
        cs.returns = y;
        cs.features = X;
        for (Index i = 0; i < cfg.n; ++i) {
            std::snprintf(asset_buf, sizeof(asset_buf), "A%05lld",
                          static_cast<long long>(i));
            cs.asset_ids.emplace_back(asset_buf);
        }
        out.panel.cross_sections.push_back(std::move(cs));
    }
    return out;
}

} // namespace dpls
