// Command-line front end: synthesize panels, fit models, run backtests,
// attribute predictions, report sensitivities, and run self-checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpls/backtest.hpp"
#include "dpls/baselines.hpp"
#include "dpls/data.hpp"
#include "dpls/dpls_model.hpp"
#include "dpls/errors.hpp"
#include "dpls/linalg.hpp"
#include "dpls/parallel.hpp"
#include "dpls/pls.hpp"
#include "dpls/rng.hpp"
#include "dpls/serialize.hpp"

namespace fs = std::filesystem;
using dpls::Index;
using dpls::json;
using dpls::Matrix;
using dpls::Vector;

namespace {

constexpr const char* kVersion = "dpls 1.0.0";

std::vector<Index> parse_index_list(const std::string& csv) {
    std::vector<Index> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(static_cast<Index>(std::stoll(item)));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

// Seed range "a..b" (inclusive) or a comma list.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const auto lo = std::stoull(text.substr(0, dots));
        const auto hi = std::stoull(text.substr(dots + 2));
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const json& resolved) {
    json manifest;
    manifest["schema_version"] = dpls::kSchemaVersion;
    manifest["version"] = kVersion;
    manifest["subcommand"] = subcommand;
    manifest["config"] = resolved;
    dpls::write_json_file(manifest, out_dir + "/run_manifest.json");
}

struct CommonOptions {
    std::string panel_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int jobs = 1;
};

Matrix stack_features(const dpls::PanelDataset& panel) {
    Index total = 0;
    for (const auto& cs : panel.cross_sections) total += cs.n_assets();
    Matrix X(total, panel.n_features());
    Index at = 0;
    for (const auto& cs : panel.cross_sections) {
        X.middleRows(at, cs.n_assets()) = cs.features;
        at += cs.n_assets();
    }
    return X;
}

Vector stack_returns(const dpls::PanelDataset& panel) {
    Index total = 0;
    for (const auto& cs : panel.cross_sections) total += cs.n_assets();
    Vector y(total);
    Index at = 0;
    for (const auto& cs : panel.cross_sections) {
        y.segment(at, cs.n_assets()) = cs.returns;
        at += cs.n_assets();
    }
    return y;
}

const dpls::CrossSection& pick_period(const dpls::PanelDataset& panel,
                                      std::int64_t period) {
    if (period < 0) return panel.cross_sections.front();
    for (const auto& cs : panel.cross_sections) {
        if (cs.period_id == period) return cs;
    }
    throw dpls::Error(dpls::ErrorCode::InvalidConfig,
                      "period " + std::to_string(period) + " not in panel");
}

int run_verify_consistency(Index n, const std::string& link, std::uint64_t seed) {
    dpls::SynthConfig cfg;
    cfg.p = 10;
    cfg.q = 2;
    cfg.k_true = 2;
    cfg.link = dpls::parse_link(link);
    cfg.noise_sd = 0.2;
    cfg.seed = seed;
    const auto report = dpls::verify_composability(cfg, 2, {n});
    bool pass = true;
    for (Index j = 0; j < report.entries.front().cosines.size(); ++j) {
        const double c = report.entries.front().cosines(j);
        std::printf("consistency column %lld cosine %.6f\n", static_cast<long long>(j), c);
        pass = pass && c >= 0.99;
    }
    std::printf("consistency: %s\n", pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

int run_verify_gradcheck(std::uint64_t seed) {
    double worst_jac = 0.0;
    double worst_hess = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        dpls::Rng rng(dpls::derive_seed(seed, "gradcheck", rep));
        const Index in = 2 + static_cast<Index>(rng.below(3));
        const Index out = 1 + static_cast<Index>(rng.below(3));
        dpls::Network net = dpls::make_network(in, {6, 5}, out,
                                               rep % 2 == 0
                                                   ? dpls::Activation::softplus
                                                   : dpls::Activation::tanh_act);
        for (auto& layer : net.layers) {
            for (Index i = 0; i < layer.weight.rows(); ++i) {
                for (Index j = 0; j < layer.weight.cols(); ++j) {
                    layer.weight(i, j) = rng.uniform(-1.0, 1.0);
                }
            }
            for (Index i = 0; i < layer.bias.size(); ++i) {
                layer.bias(i) = rng.uniform(-0.5, 0.5);
            }
        }
        Vector v(in);
        for (Index i = 0; i < in; ++i) v(i) = rng.uniform(-1.5, 1.5);

        const Matrix J = dpls::jacobian(net, v);
        const double h = 1e-5;
        for (Index j = 0; j < in; ++j) {
            Vector hi = v, lo = v;
            hi(j) += h;
            lo(j) -= h;
            const Matrix fhi = dpls::forward(net, hi.transpose());
            const Matrix flo = dpls::forward(net, lo.transpose());
            for (Index o = 0; o < out; ++o) {
                const double fd = (fhi(0, o) - flo(0, o)) / (2.0 * h);
                const double denom = std::max(std::abs(fd), 1e-8);
                worst_jac = std::max(worst_jac, std::abs(J(o, j) - fd) / denom);
            }
        }
        const Matrix H = dpls::hessian(net, v, 0);
        const double h2 = 1e-4;
        for (Index a = 0; a < in; ++a) {
            for (Index b = 0; b < in; ++b) {
                Vector pp = v, pm = v, mp = v, mm = v;
                pp(a) += h2; pp(b) += h2;
                pm(a) += h2; pm(b) -= h2;
                mp(a) -= h2; mp(b) += h2;
                mm(a) -= h2; mm(b) -= h2;
                const double fd = (dpls::forward(net, pp.transpose())(0, 0) -
                                   dpls::forward(net, pm.transpose())(0, 0) -
                                   dpls::forward(net, mp.transpose())(0, 0) +
                                   dpls::forward(net, mm.transpose())(0, 0)) /
                                  (4.0 * h2 * h2);
                worst_hess = std::max(worst_hess, std::abs(H(a, b) - fd));
            }
        }
    }
    std::printf("gradcheck max jacobian relative error %.3e\n", worst_jac);
    std::printf("gradcheck max hessian absolute error  %.3e\n", worst_hess);
    const bool pass = worst_jac <= 1e-4 && worst_hess <= 1e-3;
    std::printf("gradcheck: %s\n", pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

int run_verify_attribution(std::uint64_t seed) {
    dpls::SynthConfig cfg;
    cfg.n = 400;
    cfg.p = 8;
    cfg.q = 1;
    cfg.k_true = 2;
    cfg.link = dpls::SynthLink::tanh_link;
    cfg.noise_sd = 0.1;
    cfg.seed = seed;
    const auto data = dpls::generate_synthetic(cfg);
    dpls::DplsSpec spec;
    spec.K = 2;
    spec.hidden = {16, 16};
    spec.train.epochs = 60;
    spec.train.seed = dpls::derive_seed(seed, "attr-net");
    const auto model = dpls::fit_dpls(data.X, data.Y, spec);
    const auto rows = dpls::taylor_attribution(model, model.pls.V);
    double worst = 0.0;
    for (const auto& a : rows) {
        const double scale = std::max(1.0, a.total.cwiseAbs().maxCoeff());
        worst = std::max(worst,
                         (a.alpha + a.linear + a.quadratic + a.hot - a.total)
                                 .cwiseAbs()
                                 .maxCoeff() /
                             scale);
    }
    std::printf("attribution max |sum - total| / scale = %.3e\n", worst);
    const bool pass = worst <= 1e-12;
    std::printf("attribution: %s\n", pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep partial least squares toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file merged under the flags");

    // ---- synth ----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic panel CSV");
    CommonOptions synth_opt;
    Index synth_T = 20;
    dpls::SynthConfig synth_cfg;
    std::string synth_link = "tanh";
    std::string synth_regime = "gaussian";
    bool synth_dump_truth = false;
    synth->add_option("--out", synth_opt.out_dir, "Output directory")->required();
    synth->add_option("--periods", synth_T, "Number of periods");
    synth->add_option("--assets", synth_cfg.n, "Assets per period");
    synth->add_option("--features", synth_cfg.p, "Feature count");
    synth->add_option("--k-true", synth_cfg.k_true, "Latent dimension");
    synth->add_option("--link", synth_link, "linear|tanh|cubic|softplus_mix");
    synth->add_option("--regime", synth_regime, "gaussian|skewed");
    synth->add_option("--noise-sd", synth_cfg.noise_sd, "Noise level");
    synth->add_option("--seed", synth_opt.seed, "Master seed");
    synth->add_flag("--dump-truth", synth_dump_truth, "Write truth matrices as JSON");

    // ---- fit ------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "Fit one model on one period");
    CommonOptions fit_opt;
    std::string fit_method = "pls";
    std::int64_t fit_period = -1;
    int fit_k = 2;
    std::string fit_layers = "100,100";
    int fit_epochs = 200;
    double fit_lr = 1e-3;
    double fit_l1 = 0.0;
    fit->add_option("--panel", fit_opt.panel_path, "Panel CSV")->required();
    fit->add_option("--out", fit_opt.out_dir, "Output directory")->required();
    fit->add_option("--method", fit_method, "ols|lasso|pls|dpls");
    fit->add_option("--period", fit_period, "Period id (default: first)");
    fit->add_option("--k", fit_k, "Component count");
    fit->add_option("--layers", fit_layers, "Hidden widths, comma separated");
    fit->add_option("--epochs", fit_epochs, "Training epochs");
    fit->add_option("--lr", fit_lr, "Adam learning rate");
    fit->add_option("--l1", fit_l1, "L1 penalty");
    fit->add_option("--seed", fit_opt.seed, "Master seed");

    // ---- predict --------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Predict one period with a saved model");
    CommonOptions pred_opt;
    std::string pred_model;
    std::int64_t pred_period = -1;
    predict_cmd->add_option("--panel", pred_opt.panel_path, "Panel CSV")->required();
    predict_cmd->add_option("--model", pred_model, "Model JSON")->required();
    predict_cmd->add_option("--out", pred_opt.out_dir, "Output directory")->required();
    predict_cmd->add_option("--period", pred_period, "Period id (default: first)");

    // ---- backtest -------------------------------------------------------
    auto* backtest = app.add_subcommand("backtest", "Period-by-period train/predict");
    CommonOptions bt_opt;
    std::string bt_methods = "pls";
    std::string bt_seeds;
    int bt_k = 0;
    std::string bt_k_grid = "1,2,3,4,5";
    int bt_folds = 3;
    int bt_stride = 10;
    bool bt_first_only = false;
    std::string bt_layers = "100,100";
    int bt_epochs = 200;
    double bt_lr = 1e-3;
    double bt_l1 = 0.0;
    std::string bt_sizes = "10,50";
    backtest->add_option("--panel", bt_opt.panel_path, "Panel CSV")->required();
    backtest->add_option("--out", bt_opt.out_dir, "Output directory")->required();
    backtest->add_option("--methods", bt_methods, "Comma list of methods");
    backtest->add_option("--seeds", bt_seeds, "Seed sweep, e.g. 0..9");
    backtest->add_option("--k", bt_k, "Fixed K (0 selects by CV)");
    backtest->add_option("--k-grid", bt_k_grid, "CV grid");
    backtest->add_option("--folds", bt_folds, "CV folds");
    backtest->add_option("--cv-stride", bt_stride, "Periods between re-tuning");
    backtest->add_flag("--cv-first-period-only", bt_first_only, "Tune once, reuse");
    backtest->add_option("--layers", bt_layers, "Hidden widths for dpls");
    backtest->add_option("--epochs", bt_epochs, "Training epochs");
    backtest->add_option("--lr", bt_lr, "Adam learning rate");
    backtest->add_option("--l1", bt_l1, "L1 penalty");
    backtest->add_option("--portfolio-sizes", bt_sizes, "Comma list of sizes");
    backtest->add_option("--seed", bt_opt.seed, "Master seed");
    backtest->add_option("--jobs", bt_opt.jobs, "Parallel period fits");

    // ---- attribute ------------------------------------------------------
    auto* attribute = app.add_subcommand("attribute", "Taylor attribution of a dpls model");
    CommonOptions at_opt;
    std::string at_model;
    std::int64_t at_period = -1;
    attribute->add_option("--panel", at_opt.panel_path, "Panel CSV")->required();
    attribute->add_option("--model", at_model, "dpls model JSON")->required();
    attribute->add_option("--out", at_opt.out_dir, "Output directory")->required();
    attribute->add_option("--period", at_period, "Period id (default: first)");

    // ---- sensitivities --------------------------------------------------
    auto* sens = app.add_subcommand("sensitivities", "Covariate sensitivity report");
    CommonOptions se_opt;
    std::int64_t se_period = -1;
    int se_bootstrap = 0;
    int se_k = 2;
    std::string se_layers = "32,32";
    int se_epochs = 100;
    sens->add_option("--panel", se_opt.panel_path, "Panel CSV")->required();
    sens->add_option("--out", se_opt.out_dir, "Output directory")->required();
    sens->add_option("--period", se_period, "Period id (default: first)");
    sens->add_option("--k", se_k, "Component count");
    sens->add_option("--layers", se_layers, "Hidden widths");
    sens->add_option("--epochs", se_epochs, "Training epochs");
    sens->add_option("--bootstrap", se_bootstrap, "Bootstrap resamples (0 = off)");
    sens->add_option("--seed", se_opt.seed, "Master seed");
    sens->add_option("--jobs", se_opt.jobs, "Parallel resamples");

    // ---- diagnose-shrinkage ----------------------------------------------
    auto* diag = app.add_subcommand("diagnose-shrinkage", "Scale factor table");
    CommonOptions dg_opt;
    std::int64_t dg_period = -1;
    int dg_k = 2;
    diag->add_option("--panel", dg_opt.panel_path, "Panel CSV")->required();
    diag->add_option("--out", dg_opt.out_dir, "Output directory")->required();
    diag->add_option("--period", dg_period, "Period id (default: first)");
    diag->add_option("--k", dg_k, "Component count");

    // ---- verify -----------------------------------------------------------
    auto* verify = app.add_subcommand("verify", "Self-contained checks");
    std::string verify_what;
    Index verify_n = 50000;
    std::string verify_link = "tanh";
    std::uint64_t verify_seed = 0;
    verify->add_option("check", verify_what, "consistency|gradcheck|attribution")->required();
    verify->add_option("--n", verify_n, "Sample size for consistency");
    verify->add_option("--link", verify_link, "Link for consistency");
    verify->add_option("--seed", verify_seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        std::cerr << "error: code=Usage msg=\"" << e.what() << "\"\n";
        return 2;
    }

    try {
        if (!config_path.empty()) {
            // File values fill in only flags the user did not pass.
            const json cfg = dpls::read_json_file(config_path);
            for (auto* sub : {synth, fit, predict_cmd, backtest, attribute, sens, diag}) {
                if (!sub->parsed() || !cfg.contains(sub->get_name())) continue;
                for (const auto& [key, value] : cfg.at(sub->get_name()).items()) {
                    CLI::Option* opt = sub->get_option_no_throw("--" + key);
                    if (opt != nullptr && opt->count() == 0) {
                        opt->add_result(value.is_string()
                                            ? value.get<std::string>()
                                            : value.dump());
                    }
                }
            }
        }

        if (synth->parsed()) {
            synth_cfg.link = dpls::parse_link(synth_link);
            synth_cfg.regime = dpls::parse_regime(synth_regime);
            synth_cfg.seed = synth_opt.seed;
            fs::create_directories(synth_opt.out_dir);
            const auto generated = dpls::generate_panel(synth_cfg, synth_T);
            dpls::save_panel(generated.panel, synth_opt.out_dir + "/panel.csv");
            if (synth_dump_truth) {
                json truth;
                truth["schema_version"] = dpls::kSchemaVersion;
                truth["P_true"] = dpls::matrix_to_json(generated.P_true);
                truth["B_true"] = dpls::matrix_to_json(generated.B_true);
                truth["Q_true"] = dpls::matrix_to_json(generated.Q_true);
                truth["cfg"] = {{"n", synth_cfg.n},
                                {"p", synth_cfg.p},
                                {"q", synth_cfg.q},
                                {"k_true", synth_cfg.k_true},
                                {"link", dpls::link_name(synth_cfg.link)},
                                {"noise_sd", synth_cfg.noise_sd},
                                {"regime", dpls::regime_name(synth_cfg.regime)},
                                {"seed", synth_cfg.seed}};
                dpls::write_json_file(truth, synth_opt.out_dir + "/truth.json");
            }
            write_manifest(synth_opt.out_dir, "synth",
                           json{{"periods", synth_T},
                                {"assets", synth_cfg.n},
                                {"features", synth_cfg.p},
                                {"k_true", synth_cfg.k_true},
                                {"link", synth_link},
                                {"regime", synth_regime},
                                {"noise_sd", synth_cfg.noise_sd},
                                {"seed", synth_opt.seed},
                                {"dump_truth", synth_dump_truth}});
            return 0;
        }

        if (fit->parsed()) {
            const auto panel = dpls::load_panel(fit_opt.panel_path);
            const auto& cs = pick_period(panel, fit_period);
            fs::create_directories(fit_opt.out_dir);
            dpls::BacktestConfig cfg;
            cfg.method = dpls::parse_method(fit_method);
            cfg.k = fit_k;
            cfg.net_hidden = parse_index_list(fit_layers);
            cfg.train.epochs = fit_epochs;
            cfg.train.learning_rate = fit_lr;
            cfg.train.l1_penalty = fit_l1;
            cfg.seed = fit_opt.seed;
            const auto fitted = dpls::fit_period_model(
                cs, cfg, fit_k, dpls::derive_seed(fit_opt.seed, "fit"));
            {
                std::ofstream out(fit_opt.out_dir + "/model.json");
                out << fitted.model_json << '\n';
            }
            json summary;
            summary["schema_version"] = dpls::kSchemaVersion;
            summary["method"] = fit_method;
            summary["k_used"] = fitted.k_used;
            summary["period"] = cs.period_id;
            summary["n_assets"] = cs.n_assets();
            if (cfg.method == dpls::Method::dpls) {
                const auto model = dpls::dpls_from_json(json::parse(fitted.model_json));
                summary["parameter_count"] = dpls::count_parameters(model.net);
            }
            dpls::write_json_file(summary, fit_opt.out_dir + "/fit_summary.json");
            write_manifest(fit_opt.out_dir, "fit",
                           json{{"panel", fit_opt.panel_path},
                                {"method", fit_method},
                                {"period", cs.period_id},
                                {"k", fit_k},
                                {"layers", fit_layers},
                                {"epochs", fit_epochs},
                                {"lr", fit_lr},
                                {"l1", fit_l1},
                                {"seed", fit_opt.seed}});
            return 0;
        }

        if (predict_cmd->parsed()) {
            const auto panel = dpls::load_panel(pred_opt.panel_path);
            const auto& cs = pick_period(panel, pred_period);
            const json mj = dpls::read_json_file(pred_model);
            const std::string type = mj.at("model_type").get<std::string>();
            Vector pred;
            if (type == "pls") {
                pred = dpls::predict(dpls::pls_from_json(mj), cs.features).col(0);
            } else if (type == "dpls") {
                pred = dpls::predict_dpls(dpls::dpls_from_json(mj), cs.features).col(0);
            } else if (type == "ols") {
                pred = dpls::predict(dpls::ols_from_json(mj), cs.features).col(0);
            } else if (type == "lasso") {
                pred = dpls::predict(dpls::lasso_from_json(mj), cs.features);
            } else {
                throw dpls::Error(dpls::ErrorCode::InvalidConfig,
                                  "unknown model type '" + type + "'");
            }
            fs::create_directories(pred_opt.out_dir);
            std::ofstream out(pred_opt.out_dir + "/predictions.csv");
            out << "period,asset,prediction,actual\n";
            char buf[64];
            for (Index i = 0; i < cs.n_assets(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", pred(i));
                out << cs.period_id << ',' << cs.asset_ids[i] << ',' << buf << ',';
                std::snprintf(buf, sizeof(buf), "%.17g", cs.returns(i));
                out << buf << '\n';
            }
            write_manifest(pred_opt.out_dir, "predict",
                           json{{"panel", pred_opt.panel_path},
                                {"model", pred_model},
                                {"period", cs.period_id}});
            return 0;
        }

        if (backtest->parsed()) {
            const auto panel = dpls::load_panel(bt_opt.panel_path);
            const auto methods_raw = bt_methods;
            std::vector<std::string> methods;
            {
                std::stringstream ss(methods_raw);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (!item.empty()) methods.push_back(item);
                }
            }
            std::vector<std::uint64_t> seeds =
                bt_seeds.empty() ? std::vector<std::uint64_t>{bt_opt.seed}
                                 : parse_seeds(bt_seeds);

            json aggregate = json::array();
            for (const auto& method : methods) {
                std::vector<double> oos_r2;
                for (const auto seed : seeds) {
                    dpls::BacktestConfig cfg;
                    cfg.method = dpls::parse_method(method);
                    cfg.k = bt_k;
                    cfg.k_grid = parse_int_list(bt_k_grid);
                    cfg.cv_folds = bt_folds;
                    cfg.cv_stride = bt_stride;
                    cfg.cv_first_period_only = bt_first_only;
                    cfg.net_hidden = parse_index_list(bt_layers);
                    cfg.train.epochs = bt_epochs;
                    cfg.train.learning_rate = bt_lr;
                    cfg.train.l1_penalty = bt_l1;
                    cfg.portfolio_sizes = parse_int_list(bt_sizes);
                    cfg.seed = seed;
                    cfg.jobs = bt_opt.jobs;
                    const auto report = dpls::run_backtest(panel, cfg);
                    std::string dir = bt_opt.out_dir + "/" + method;
                    if (seeds.size() > 1) dir += "_seed" + std::to_string(seed);
                    dpls::write_report(report, dir);
                    if (report.r2_total_out) oos_r2.push_back(*report.r2_total_out);
                }
                json row;
                row["method"] = method;
                row["seeds"] = seeds.size();
                if (!oos_r2.empty()) {
                    row["median_r2_total_out"] =
                        dpls::empirical_quantile(oos_r2, 0.5);
                }
                aggregate.push_back(std::move(row));
            }
            fs::create_directories(bt_opt.out_dir);
            json agg;
            agg["schema_version"] = dpls::kSchemaVersion;
            agg["rows"] = std::move(aggregate);
            dpls::write_json_file(agg, bt_opt.out_dir + "/aggregate.json");
            write_manifest(bt_opt.out_dir, "backtest",
                           json{{"panel", bt_opt.panel_path},
                                {"methods", bt_methods},
                                {"seeds", bt_seeds.empty()
                                              ? std::to_string(bt_opt.seed)
                                              : bt_seeds},
                                {"k", bt_k},
                                {"k_grid", bt_k_grid},
                                {"folds", bt_folds},
                                {"cv_stride", bt_stride},
                                {"cv_first_period_only", bt_first_only},
                                {"layers", bt_layers},
                                {"epochs", bt_epochs},
                                {"lr", bt_lr},
                                {"l1", bt_l1},
                                {"portfolio_sizes", bt_sizes},
                                {"jobs", bt_opt.jobs}});
            return 0;
        }

        if (attribute->parsed()) {
            const auto panel = dpls::load_panel(at_opt.panel_path);
            const auto& cs = pick_period(panel, at_period);
            const auto model = dpls::dpls_from_json(dpls::read_json_file(at_model));
            const Matrix scores = model.pls.score(cs.features);
            const auto rows = dpls::taylor_attribution(model, scores);
            const auto summary = dpls::summarize_attribution(rows);
            fs::create_directories(at_opt.out_dir);
            {
                std::ofstream out(at_opt.out_dir + "/attribution.csv");
                out << "period,entity,component,value\n";
                char buf[64];
                auto emit = [&](const std::string& entity, const std::string& comp,
                                double v) {
                    std::snprintf(buf, sizeof(buf), "%.17g", v);
                    out << cs.period_id << ',' << entity << ',' << comp << ',' << buf
                        << '\n';
                };
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    const auto& a = rows[i];
                    const std::string& asset = cs.asset_ids[i];
                    emit(asset, "alpha", a.alpha(0));
                    emit(asset, "linear", a.linear(0));
                    emit(asset, "quadratic", a.quadratic(0));
                    emit(asset, "hot", a.hot(0));
                    emit(asset, "total", a.total(0));
                }
                for (Index k = 0; k < summary.factor_linear.rows(); ++k) {
                    emit("PORTFOLIO", "factor_" + std::to_string(k),
                         summary.factor_linear(k, 0));
                }
                emit("PORTFOLIO", "alpha", summary.alpha(0));
                emit("PORTFOLIO", "linear", summary.linear(0));
                emit("PORTFOLIO", "quadratic", summary.quadratic(0));
                emit("PORTFOLIO", "hot", summary.hot(0));
                emit("PORTFOLIO", "total", summary.total(0));
            }
            dpls::write_json_file(dpls::to_json(summary),
                                  at_opt.out_dir + "/attribution.json");
            write_manifest(at_opt.out_dir, "attribute",
                           json{{"panel", at_opt.panel_path},
                                {"model", at_model},
                                {"period", cs.period_id}});
            return 0;
        }

        if (sens->parsed()) {
            const auto panel = dpls::load_panel(se_opt.panel_path);
            const auto& cs = pick_period(panel, se_period);
            dpls::DplsSpec spec;
            spec.K = se_k;
            spec.hidden = parse_index_list(se_layers);
            spec.train.epochs = se_epochs;
            spec.train.seed = dpls::derive_seed(se_opt.seed, "sens-net");
            dpls::SensitivityReport report;
            if (se_bootstrap > 0) {
                report = dpls::bootstrap_sensitivities(spec, cs.features,
                                                       Matrix(cs.returns), se_bootstrap,
                                                       se_opt.seed, se_opt.jobs);
            } else {
                const auto model = dpls::fit_dpls(cs.features, Matrix(cs.returns), spec);
                report = dpls::sensitivity_report(model, cs.features);
            }
            fs::create_directories(se_opt.out_dir);
            dpls::write_json_file(dpls::to_json(report),
                                  se_opt.out_dir + "/sensitivities.json");
            {
                std::ofstream out(se_opt.out_dir + "/sensitivities.csv");
                out << "period,entity,component,value\n";
                char buf[64];
                for (Index j = 0; j < report.jacobian_at_zero.cols(); ++j) {
                    std::snprintf(buf, sizeof(buf), "%.17g",
                                  report.jacobian_at_zero(0, j));
                    out << cs.period_id << ','
                        << panel.feature_names[static_cast<std::size_t>(j)]
                        << ",jacobian_at_zero," << buf << '\n';
                }
            }
            write_manifest(se_opt.out_dir, "sensitivities",
                           json{{"panel", se_opt.panel_path},
                                {"period", cs.period_id},
                                {"k", se_k},
                                {"layers", se_layers},
                                {"epochs", se_epochs},
                                {"bootstrap", se_bootstrap},
                                {"seed", se_opt.seed},
                                {"jobs", se_opt.jobs}});
            return 0;
        }

        if (diag->parsed()) {
            const auto panel = dpls::load_panel(dg_opt.panel_path);
            const auto& cs = pick_period(panel, dg_period);
            const auto report = dpls::scale_factors(cs.features, cs.returns, dg_k);
            fs::create_directories(dg_opt.out_dir);
            std::ofstream out(dg_opt.out_dir + "/shrinkage.csv");
            out << "j,eigenvalue,factor,defined,degenerate\n";
            char buf[64];
            for (Index j = 0; j < report.eigenvalues.size(); ++j) {
                out << j << ',';
                std::snprintf(buf, sizeof(buf), "%.17g", report.eigenvalues(j));
                out << buf << ',';
                std::snprintf(buf, sizeof(buf), "%.17g", report.factors(j));
                out << buf << ',' << (report.defined[static_cast<std::size_t>(j)] ? 1 : 0)
                    << ',' << (report.degenerate[static_cast<std::size_t>(j)] ? 1 : 0)
                    << '\n';
            }
            write_manifest(dg_opt.out_dir, "diagnose-shrinkage",
                           json{{"panel", dg_opt.panel_path},
                                {"period", cs.period_id},
                                {"k", dg_k}});
            return 0;
        }

        if (verify->parsed()) {
            if (verify_what == "consistency") {
                return run_verify_consistency(verify_n, verify_link, verify_seed);
            }
            if (verify_what == "gradcheck") return run_verify_gradcheck(verify_seed);
            if (verify_what == "attribution") return run_verify_attribution(verify_seed);
            throw dpls::Error(dpls::ErrorCode::InvalidConfig,
                              "unknown check '" + verify_what + "'");
        }
    } catch (const dpls::Error& e) {
        std::cerr << "error: code=" << dpls::error_code_name(e.code()) << " msg=\""
                  << e.what() << "\"\n";
        return dpls::is_validation_error(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: code=Internal msg=\"" << e.what() << "\"\n";
        return 1;
    }
    return 0;
}
