#include "dpls/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "dpls/baselines.hpp"
#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/parallel.hpp"
#include "dpls/rng.hpp"
#include "dpls/serialize.hpp"

namespace dpls {

Method parse_method(const std::string& name) {
    if (name == "ols") return Method::ols;
    if (name == "lasso") return Method::lasso;
    if (name == "pls") return Method::pls;
    if (name == "dpls") return Method::dpls;
    if (name == "pca" || name == "pca_insample_only") return Method::pca_insample_only;
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + name + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::ols: return "ols";
        case Method::lasso: return "lasso";
        case Method::pls: return "pls";
        case Method::dpls: return "dpls";
        case Method::pca_insample_only: return "pca_insample_only";
    }
    return "pls";
}

double linf_error(const Vector& pred, const Vector& actual) {
    if (pred.size() != actual.size() || pred.size() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "prediction/actual length mismatch");
    }
    return (pred - actual).cwiseAbs().maxCoeff();
}

double total_r2(const std::vector<Vector>& pred, const std::vector<Vector>& actual,
                Index min_obs) {
    if (pred.size() != actual.size()) {
        throw Error(ErrorCode::DimensionMismatch, "panel lengths differ");
    }
    double sse = 0.0;
    double denom = 0.0;
    Index count = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].size() != actual[t].size()) {
            throw Error(ErrorCode::DimensionMismatch, "period lengths differ");
        }
        sse += (pred[t] - actual[t]).squaredNorm();
        denom += actual[t].squaredNorm();
        count += actual[t].size();
    }
    if (count < min_obs || count == 0) {
        throw Error(ErrorCode::TooFewObservations,
                    std::to_string(count) + " observations, need " + std::to_string(min_obs));
    }
    if (denom == 0.0) return sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - sse / denom;
}

double r_squared(const Vector& pred, const Vector& actual) {
    const double mean = actual.mean();
    const double tss = (actual.array() - mean).square().sum();
    const double rss = (pred - actual).squaredNorm();
    if (tss == 0.0) return rss == 0.0 ? 1.0 : 0.0;
    return 1.0 - rss / tss;
}

std::vector<Index> select_top_n(const Vector& predictions,
                                const std::vector<std::string>& asset_ids, int n) {
    if (n < 1 || n > predictions.size()) {
        throw Error(ErrorCode::InsufficientAssets,
                    "portfolio size " + std::to_string(n) + " with " +
                        std::to_string(predictions.size()) + " assets");
    }
    std::vector<Index> order(predictions.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (predictions(a) != predictions(b)) return predictions(a) > predictions(b);
        return asset_ids[a] < asset_ids[b]; // stable tie-break by asset id
    });
    order.resize(static_cast<std::size_t>(n));
    return order;
}

std::vector<Index> select_random_n(Index universe, int n, std::uint64_t seed) {
    if (n < 1 || n > universe) {
        throw Error(ErrorCode::InsufficientAssets, "random portfolio size out of range");
    }
    std::vector<Index> pool(universe);
    std::iota(pool.begin(), pool.end(), Index{0});
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
        const Index j =
            i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(universe - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(n));
    return pool;
}

double information_ratio(const std::vector<double>& portfolio,
                         const std::vector<double>& benchmark, bool annualize) {
    if (portfolio.size() != benchmark.size()) {
        throw Error(ErrorCode::DimensionMismatch, "return series lengths differ");
    }
    if (portfolio.size() < 2) throw Error(ErrorCode::TooFewPeriods, "need >= 2 periods");
    Vector excess(static_cast<Index>(portfolio.size()));
    for (std::size_t t = 0; t < portfolio.size(); ++t) {
        excess(static_cast<Index>(t)) = portfolio[t] - benchmark[t];
    }
    const double sd = sample_sd(excess);
    const double scale = excess.cwiseAbs().maxCoeff();
    if (sd <= 1e-14 * std::max(scale, 1e-30)) {
        throw Error(ErrorCode::ZeroVolatility, "excess return volatility is zero");
    }
    const double ir = excess.mean() / sd;
    return annualize ? ir * std::sqrt(12.0) : ir;
}

FittedPeriodModel fit_period_model(const CrossSection& cs, const BacktestConfig& cfg,
                                   int k_fixed, std::uint64_t period_seed) {
    const Matrix& X = cs.features;
    const Matrix Y = cs.returns;
    FittedPeriodModel out;
    out.method = cfg.method;
    switch (cfg.method) {
        case Method::ols: {
            const OlsModel m = fit_ols(X, Y);
            out.model_json = to_json(m).dump();
            out.predict = [m](const Matrix& F) { return predict(m, F); };
            break;
        }
        case Method::lasso: {
            const auto path = default_lambda_path(X, cs.returns);
            const LassoModel m =
                fit_lasso_cv(X, cs.returns, path, cfg.cv_folds,
                             derive_seed(period_seed, "lasso"));
            out.model_json = to_json(m).dump();
            out.predict = [m](const Matrix& F) { return Matrix(predict(m, F)); };
            break;
        }
        case Method::pls: {
            out.k_used = k_fixed;
            const PlsModel m = fit_nipals(X, Y, k_fixed);
            out.k_used = m.K;
            out.model_json = to_json(m).dump();
            out.predict = [m](const Matrix& F) { return predict(m, F); };
            break;
        }
        case Method::dpls: {
            DplsSpec spec;
            spec.K = k_fixed;
            spec.hidden = cfg.net_hidden;
            spec.activation = cfg.net_activation;
            spec.train = cfg.train;
            spec.train.seed = derive_seed(period_seed, "net");
            const DplsModel m = fit_dpls(X, Y, spec);
            out.k_used = m.pls.K;
            out.model_json = to_json(m).dump();
            out.predict = [m](const Matrix& F) { return predict_dpls(m, F); };
            break;
        }
        case Method::pca_insample_only:
            throw Error(ErrorCode::InvalidConfig,
                        "pca_insample_only has no per-period predictive fit");
    }
    return out;
}

namespace {

// Component counts per period: re-tuned on stride anchors, reused between.
std::vector<int> component_schedule(const PanelDataset& panel, const BacktestConfig& cfg) {
    const Index T = panel.n_periods();
    std::vector<int> schedule(static_cast<std::size_t>(T), cfg.k);
    if (cfg.method != Method::pls && cfg.method != Method::dpls) return schedule;
    if (cfg.k > 0) return schedule;
    if (cfg.k_grid.empty()) throw Error(ErrorCode::GridEmpty, "empty k grid");

    const int stride = cfg.cv_first_period_only ? std::numeric_limits<int>::max()
                                                : std::max(cfg.cv_stride, 1);
    std::vector<Index> anchors;
    for (Index t = 0; t < T; t += stride) {
        anchors.push_back(t);
        if (stride == std::numeric_limits<int>::max()) break;
    }
    std::vector<int> anchor_k(anchors.size(), 0);
    parallel_for(anchors.size(), cfg.jobs, [&](std::size_t a) {
        const CrossSection& cs = panel.cross_sections[static_cast<std::size_t>(anchors[a])];
        const CvSelection sel =
            select_k_cv(cs.features, Matrix(cs.returns), cfg.k_grid, cfg.cv_folds,
                        derive_seed(cfg.seed, "ksel", static_cast<std::uint64_t>(anchors[a])));
        anchor_k[a] = sel.k_star;
    });
    std::size_t a = 0;
    for (Index t = 0; t < T; ++t) {
        if (a + 1 < anchors.size() && t >= anchors[a + 1]) ++a;
        schedule[static_cast<std::size_t>(t)] = anchor_k[a];
    }
    return schedule;
}

TiltTable compute_tilts(const PanelDataset& panel,
                        const std::map<int, std::vector<std::vector<Index>>>& selections,
                        Index first_period) {
    TiltTable table;
    table.feature_names = panel.feature_names;
    const Index p = panel.n_features();
    for (const auto& [size, per_period] : selections) {
        Vector acc = Vector::Zero(p);
        Index used = 0;
        for (std::size_t t = 0; t < per_period.size(); ++t) {
            const auto& members = per_period[t];
            if (members.empty()) continue;
            const CrossSection& cs =
                panel.cross_sections[static_cast<std::size_t>(first_period) + t];
            const Standardizer s = fit_standardizer(cs.features);
            const Matrix z = apply_standardizer(s, cs.features);
            Vector mean = Vector::Zero(p);
            for (Index idx : members) mean += z.row(idx).transpose();
            acc += mean / static_cast<double>(members.size());
            ++used;
        }
        if (used > 0) acc /= static_cast<double>(used);
        table.feature_tilts[size] = acc;
    }
    return table;
}

} // namespace

std::vector<KSweepRow> k_sweep(const PanelDataset& panel, const BacktestConfig& cfg) {
    if (cfg.method == Method::pca_insample_only) {
        // Panel-level reconstruction; out-of-sample entries are undefined.
        if (!panel.constant_universe()) {
            throw Error(ErrorCode::InvalidConfig,
                        "panel PCA needs a constant asset universe");
        }
        const Index T = panel.n_periods();
        const Index N = panel.cross_sections.front().n_assets();
        Matrix R(T, N);
        for (Index t = 0; t < T; ++t) {
            R.row(t) = panel.cross_sections[static_cast<std::size_t>(t)].returns.transpose();
        }
        const int k_cap = std::min<int>(cfg.k_max, static_cast<int>(std::min(T, N)));
        const PcaFactorModel m = fit_pca_factors(R, k_cap);
        std::vector<KSweepRow> rows;
        for (int k = 1; k <= k_cap; ++k) {
            const Matrix recon = reconstruct(m, k);
            KSweepRow row;
            row.k = k;
            row.obs_in = R.size();
            if (R.size() >= cfg.sweep_min_obs) {
                const double denom = R.squaredNorm();
                row.r2_total_in = denom > 0.0
                                      ? 1.0 - (recon - R).squaredNorm() / denom
                                      : 1.0;
            }
            rows.push_back(row);
        }
        return rows;
    }

    if (cfg.method != Method::pls && cfg.method != Method::dpls) {
        throw Error(ErrorCode::InvalidConfig, "k sweep needs pls, dpls, or pca");
    }
    const Index T = panel.n_periods();
    if (T < 2) throw Error(ErrorCode::TooFewPeriods, "need >= 2 periods");

    const std::vector<int> schedule = component_schedule(panel, cfg);

    struct PeriodSweep {
        bool ok = false;
        int k_star = 0;
        std::vector<Vector> in_pred;  // per k (1-based: index k-1)
        std::vector<Vector> out_pred; // prediction for period t+1
    };
    std::vector<PeriodSweep> fits(static_cast<std::size_t>(T));
    parallel_for(static_cast<std::size_t>(T), cfg.jobs, [&](std::size_t ti) {
        const Index t = static_cast<Index>(ti);
        const CrossSection& cs = panel.cross_sections[ti];
        PeriodSweep& slot = fits[ti];
        const int k_star = schedule[ti] > 0 ? schedule[ti] : cfg.k_grid.back();
        try {
            const std::uint64_t seed = derive_seed(cfg.seed, "sweep", ti);
            if (cfg.method == Method::pls) {
                const PlsModel m = fit_nipals(cs.features, Matrix(cs.returns), k_star);
                slot.k_star = m.K;
                for (int k = 1; k <= m.K; ++k) {
                    slot.in_pred.push_back(predict_truncated(m, cs.features, k).col(0));
                    if (t + 1 < T) {
                        slot.out_pred.push_back(
                            predict_truncated(
                                m, panel.cross_sections[ti + 1].features, k)
                                .col(0));
                    }
                }
            } else {
                DplsSpec spec;
                spec.K = k_star;
                spec.hidden = cfg.net_hidden;
                spec.activation = cfg.net_activation;
                spec.train = cfg.train;
                spec.train.seed = derive_seed(seed, "net");
                const DplsModel m = fit_dpls(cs.features, Matrix(cs.returns), spec);
                slot.k_star = m.pls.K;
                for (int k = 1; k <= m.pls.K; ++k) {
                    slot.in_pred.push_back(
                        predict_dpls_truncated(m, cs.features, k).col(0));
                    if (t + 1 < T) {
                        slot.out_pred.push_back(
                            predict_dpls_truncated(
                                m, panel.cross_sections[ti + 1].features, k)
                                .col(0));
                    }
                }
            }
            slot.ok = true;
        } catch (const Error&) {
            slot.ok = false;
        }
    });

    int k_cap = 0;
    for (const auto& f : fits) k_cap = std::max(k_cap, f.k_star);
    k_cap = std::min(k_cap, cfg.k_max);

    std::vector<KSweepRow> rows;
    for (int k = 1; k <= k_cap; ++k) {
        KSweepRow row;
        row.k = k;
        std::vector<Vector> in_pred, in_act, out_pred, out_act;
        for (Index t = 0; t < T; ++t) {
            const auto& f = fits[static_cast<std::size_t>(t)];
            if (!f.ok || f.k_star < k) continue;
            in_pred.push_back(f.in_pred[static_cast<std::size_t>(k - 1)]);
            in_act.push_back(panel.cross_sections[static_cast<std::size_t>(t)].returns);
            if (t + 1 < T) {
                out_pred.push_back(f.out_pred[static_cast<std::size_t>(k - 1)]);
                out_act.push_back(
                    panel.cross_sections[static_cast<std::size_t>(t) + 1].returns);
            }
        }
        Index n_in = 0, n_out = 0;
        for (const auto& v : in_act) n_in += v.size();
        for (const auto& v : out_act) n_out += v.size();
        row.obs_in = n_in;
        row.obs_out = n_out;
        if (n_in >= cfg.sweep_min_obs) row.r2_total_in = total_r2(in_pred, in_act);
        if (n_out >= cfg.sweep_min_obs) row.r2_total_out = total_r2(out_pred, out_act);
        rows.push_back(std::move(row));
    }
    return rows;
}

BacktestReport run_backtest(const PanelDataset& panel, const BacktestConfig& cfg) {
    const Index T = panel.n_periods();
    if (T < 2) throw Error(ErrorCode::TooFewPeriods, "need >= 2 periods");
    for (int size : cfg.portfolio_sizes) {
        if (size < 1) throw Error(ErrorCode::InvalidConfig, "portfolio sizes must be >= 1");
    }
    if (cfg.cv_stride < 1 && !cfg.cv_first_period_only) {
        throw Error(ErrorCode::InvalidConfig, "cv stride must be >= 1");
    }

    BacktestReport report;
    report.method = cfg.method;

    if (cfg.method == Method::pca_insample_only) {
        // In-sample factor reconstruction only; no prediction, no portfolio.
        if (!panel.constant_universe()) {
            throw Error(ErrorCode::InvalidConfig,
                        "panel PCA needs a constant asset universe");
        }
        const Index N = panel.cross_sections.front().n_assets();
        Matrix R(T, N);
        for (Index t = 0; t < T; ++t) {
            R.row(t) = panel.cross_sections[static_cast<std::size_t>(t)].returns.transpose();
        }
        const int k = cfg.k > 0 ? cfg.k : std::min<int>(cfg.k_max,
                                                        static_cast<int>(std::min(T, N)));
        const PcaFactorModel m = fit_pca_factors(R, k);
        const Matrix recon = reconstruct(m, k);
        std::vector<Vector> in_pred, in_act;
        for (Index t = 0; t < T; ++t) {
            PeriodMetrics pm;
            pm.period_id = panel.cross_sections[static_cast<std::size_t>(t)].period_id;
            pm.k_used = k;
            const Vector pred = recon.row(t);
            const Vector actual = R.row(t);
            pm.linf_in = linf_error(pred, actual);
            pm.mse_in = (pred - actual).squaredNorm() / static_cast<double>(N);
            pm.r2_in = r_squared(pred, actual);
            report.periods.push_back(pm);
            in_pred.push_back(pred);
            in_act.push_back(actual);
        }
        report.r2_total_in = total_r2(in_pred, in_act);
        report.ksweep = k_sweep(panel, cfg);
        report.tilts.feature_names = panel.feature_names;
        return report;
    }

    const std::vector<int> schedule = component_schedule(panel, cfg);

    std::vector<FittedPeriodModel> models(static_cast<std::size_t>(T));
    std::vector<bool> failed(static_cast<std::size_t>(T), false);
    parallel_for(static_cast<std::size_t>(T), cfg.jobs, [&](std::size_t ti) {
        const CrossSection& cs = panel.cross_sections[ti];
        try {
            models[ti] = fit_period_model(cs, cfg, schedule[ti],
                                          derive_seed(cfg.seed, "period", ti));
        } catch (const Error&) {
            failed[ti] = true;
        }
    });

    std::vector<Vector> in_pred, in_act, out_pred, out_act;
    for (Index t = 0; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const CrossSection& cs = panel.cross_sections[ti];
        PeriodMetrics pm;
        pm.period_id = cs.period_id;
        pm.fit_failed = failed[ti];
        if (!failed[ti]) {
            pm.k_used = models[ti].k_used;
            const Vector pred = models[ti].predict(cs.features).col(0);
            pm.linf_in = linf_error(pred, cs.returns);
            pm.mse_in = (pred - cs.returns).squaredNorm() /
                        static_cast<double>(cs.n_assets());
            pm.r2_in = r_squared(pred, cs.returns);
            in_pred.push_back(pred);
            in_act.push_back(cs.returns);
        } else {
            ++report.failed_periods;
        }
        if (t >= 1 && !failed[ti - 1]) {
            const Vector pred = models[ti - 1].predict(cs.features).col(0);
            pm.linf_out = linf_error(pred, cs.returns);
            pm.mse_out = (pred - cs.returns).squaredNorm() /
                         static_cast<double>(cs.n_assets());
            pm.r2_out = r_squared(pred, cs.returns);
            out_pred.push_back(pred);
            out_act.push_back(cs.returns);
        }
        report.periods.push_back(std::move(pm));
    }
    report.r2_total_in = total_r2(in_pred, in_act);
    if (!out_pred.empty()) report.r2_total_out = total_r2(out_pred, out_act);

    // Portfolio construction on out-of-sample predictions.
    std::map<int, std::vector<std::vector<Index>>> selections;
    for (int size : cfg.portfolio_sizes) {
        PortfolioSeries series;
        series.size = size;
        auto& sel = selections[size];
        for (Index t = 1; t < T; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const CrossSection& cs = panel.cross_sections[ti];
            if (failed[ti - 1]) {
                sel.emplace_back();
                continue;
            }
            const Vector pred = models[ti - 1].predict(cs.features).col(0);
            const auto members = select_top_n(pred, cs.asset_ids, size);
            double ret = 0.0;
            for (Index idx : members) ret += cs.returns(idx);
            series.returns.push_back(ret / static_cast<double>(members.size()));
            series.benchmark.push_back(cs.returns.mean());
            sel.push_back(members);
        }
        if (series.returns.size() >= 2) {
            try {
                series.information_ratio =
                    information_ratio(series.returns, series.benchmark);
            } catch (const Error&) {
                series.information_ratio = std::nullopt;
            }
        }
        report.portfolios.push_back(std::move(series));
    }
    report.tilts = compute_tilts(panel, selections, 1);

    if (cfg.method == Method::pls || cfg.method == Method::dpls) {
        report.ksweep = k_sweep(panel, cfg);
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

} // namespace

void write_report(const BacktestReport& report, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);

    {
        std::ofstream out(directory + "/metrics.csv");
        out << "period,k_used,fit_failed,linf_in,mse_in,r2_in,linf_out,mse_out,r2_out\n";
        for (const auto& pm : report.periods) {
            out << pm.period_id << ',' << pm.k_used << ',' << (pm.fit_failed ? 1 : 0) << ','
                << fmt(pm.linf_in) << ',' << fmt(pm.mse_in) << ',' << fmt(pm.r2_in) << ','
                << fmt_opt(pm.linf_out) << ',' << fmt_opt(pm.mse_out) << ','
                << fmt_opt(pm.r2_out) << '\n';
        }
    }
    {
        std::ofstream out(directory + "/portfolio.csv");
        out << "size,period_index,portfolio_return,benchmark_return\n";
        for (const auto& series : report.portfolios) {
            for (std::size_t t = 0; t < series.returns.size(); ++t) {
                out << series.size << ',' << t << ',' << fmt(series.returns[t]) << ','
                    << fmt(series.benchmark[t]) << '\n';
            }
        }
    }
    {
        std::ofstream out(directory + "/tilts.csv");
        out << "size,feature,tilt\n";
        for (const auto& [size, tilt] : report.tilts.feature_tilts) {
            for (Index j = 0; j < tilt.size(); ++j) {
                out << size << ',' << report.tilts.feature_names[static_cast<std::size_t>(j)]
                    << ',' << fmt(tilt(j)) << '\n';
            }
        }
    }
    {
        std::ofstream out(directory + "/ksweep.csv");
        out << "k,r2_total_in,r2_total_out,obs_in,obs_out\n";
        for (const auto& row : report.ksweep) {
            out << row.k << ',' << fmt_opt(row.r2_total_in) << ','
                << fmt_opt(row.r2_total_out) << ',' << row.obs_in << ',' << row.obs_out
                << '\n';
        }
    }
    {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["method"] = method_name(report.method);
        j["r2_total_in"] = report.r2_total_in;
        if (report.r2_total_out) {
            j["r2_total_out"] = *report.r2_total_out;
        } else {
            j["r2_total_out"] = nullptr;
        }
        j["failed_periods"] = report.failed_periods;
        json periods = json::array();
        for (const auto& pm : report.periods) {
            json pj;
            pj["period"] = pm.period_id;
            pj["k_used"] = pm.k_used;
            pj["fit_failed"] = pm.fit_failed;
            pj["linf_in"] = pm.linf_in;
            pj["mse_in"] = pm.mse_in;
            pj["r2_in"] = pm.r2_in;
            pj["linf_out"] = pm.linf_out ? json(*pm.linf_out) : json(nullptr);
            pj["mse_out"] = pm.mse_out ? json(*pm.mse_out) : json(nullptr);
            pj["r2_out"] = pm.r2_out ? json(*pm.r2_out) : json(nullptr);
            periods.push_back(std::move(pj));
        }
        j["periods"] = std::move(periods);
        json portfolios = json::array();
        for (const auto& series : report.portfolios) {
            json pj;
            pj["size"] = series.size;
            pj["information_ratio"] = series.information_ratio
                                          ? json(*series.information_ratio)
                                          : json(nullptr);
            pj["returns"] = series.returns;
            pj["benchmark"] = series.benchmark;
            portfolios.push_back(std::move(pj));
        }
        j["portfolios"] = std::move(portfolios);
        write_json_file(j, directory + "/report.json");
    }
}

} // namespace dpls
