#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpls/data.hpp"
#include "dpls/dpls_model.hpp"
#include "dpls/types.hpp"

namespace dpls {

enum class Method { ols, lasso, pls, dpls, pca_insample_only };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct BacktestConfig {
    Method method = Method::pls;
    int k = 0;                    // fixed component count; 0 selects by CV
    std::vector<int> k_grid = {1, 2, 3, 4, 5};
    int cv_folds = 3;
    int cv_stride = 10;           // periods between re-tuning
    bool cv_first_period_only = false;
    std::vector<Index> net_hidden = {100, 100};
    Activation net_activation = Activation::softplus;
    TrainConfig train;
    std::vector<int> portfolio_sizes = {10, 50};
    int k_max = 10;               // cap for the K sweep
    int sweep_min_obs = 100;      // pooled-observation floor per sweep entry
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct PeriodMetrics {
    std::int64_t period_id = 0;
    int k_used = 0;
    bool fit_failed = false;
    double linf_in = 0.0, mse_in = 0.0, r2_in = 0.0;
    std::optional<double> linf_out, mse_out, r2_out;
};

struct PortfolioSeries {
    int size = 0;
    std::vector<double> returns;   // realized equal-weight return per period
    std::vector<double> benchmark; // equal-weight universe return, aligned
    std::optional<double> information_ratio; // absent when volatility degenerate
};

struct TiltTable {
    std::vector<std::string> feature_names;
    // per portfolio size: time-averaged portfolio-mean standardized exposure
    std::map<int, Vector> feature_tilts;
    // optional group (dummy-column) tilts rescaled to sum to 1
    std::map<int, Vector> group_tilts;
    std::vector<Index> group_columns;
};

struct KSweepRow {
    int k = 0;
    std::optional<double> r2_total_in;  // absent below the pooled-obs floor
    std::optional<double> r2_total_out; // absent for in-sample-only methods
    Index obs_in = 0, obs_out = 0;
};

struct BacktestReport {
    Method method = Method::pls;
    std::vector<PeriodMetrics> periods;
    double r2_total_in = 0.0;
    std::optional<double> r2_total_out;
    std::vector<PortfolioSeries> portfolios;
    TiltTable tilts;
    std::vector<KSweepRow> ksweep;
    int failed_periods = 0;
};

// One period's fitted model with a serialization token for audit.
struct FittedPeriodModel {
    Method method = Method::pls;
    int k_used = 0;
    std::string model_json;
    std::function<Matrix(const Matrix&)> predict;
};

FittedPeriodModel fit_period_model(const CrossSection& cs, const BacktestConfig& cfg,
                                   int k_fixed, std::uint64_t period_seed);

// Alternating train/predict over the panel: the model fitted on period t is
// scored out-of-sample on period t+1 and never sees it during fitting.
BacktestReport run_backtest(const PanelDataset& panel, const BacktestConfig& cfg);

double linf_error(const Vector& pred, const Vector& actual);

// Pooled 1 - sum (r - r_hat)^2 / sum r^2 (uncentered denominator).
double total_r2(const std::vector<Vector>& pred, const std::vector<Vector>& actual,
                Index min_obs = 1);

// Centered per-period coefficient of determination.
double r_squared(const Vector& pred, const Vector& actual);

std::vector<KSweepRow> k_sweep(const PanelDataset& panel, const BacktestConfig& cfg);

// Top-n selection by predicted return (ties broken by asset id order);
// n <= 0 requests the random control drawn with the seed.
std::vector<Index> select_top_n(const Vector& predictions,
                                const std::vector<std::string>& asset_ids, int n);
std::vector<Index> select_random_n(Index universe, int n, std::uint64_t seed);

double information_ratio(const std::vector<double>& portfolio,
                         const std::vector<double>& benchmark, bool annualize = false);

void write_report(const BacktestReport& report, const std::string& directory);

} // namespace dpls
