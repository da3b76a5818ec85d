#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpls/backtest.hpp"
#include "dpls/data.hpp"
#include "dpls/errors.hpp"
#include "dpls/rng.hpp"
#include "oracles.hpp"

using namespace dpls;

namespace {

SynthPanel make_panel(Index periods, Index assets, Index p, std::uint64_t seed,
                      SynthLink link = SynthLink::linear, double noise = 0.05) {
    SynthConfig cfg;
    cfg.n = assets;
    cfg.p = p;
    cfg.q = 1;
    cfg.k_true = std::min<Index>(2, p);
    cfg.link = link;
    cfg.noise_sd = noise;
    cfg.seed = seed;
    return generate_panel(cfg, periods);
}

} // namespace

TEST_CASE("linf error") {
    Vector a(2), b(2);
    a << 0.1, 0.2;
    b << 0.1, 0.5;
    CHECK(linf_error(a, b) == doctest::Approx(0.3));
    CHECK(linf_error(a, a) == 0.0);
    CHECK_THROWS_AS(linf_error(a, Vector::Zero(3)), Error);

    // Scan oracle over random pairs.
    Rng rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        const Vector x = oracles::random_gaussian(20, 1, rng).col(0);
        const Vector y = oracles::random_gaussian(20, 1, rng).col(0);
        double scan = 0.0;
        for (Index i = 0; i < 20; ++i) scan = std::max(scan, std::abs(x(i) - y(i)));
        CHECK(linf_error(x, y) == scan);
    }
}

TEST_CASE("total r2 identities") {
    Rng rng(2);
    const Vector actual = oracles::random_gaussian(50, 1, rng).col(0);
    CHECK(total_r2({actual}, {actual}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(total_r2({Vector::Zero(50)}, {actual}) == doctest::Approx(0.0).epsilon(1e-12));
    const Vector half = 0.5 * actual;
    CHECK(total_r2({half}, {actual}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(total_r2({half}, {actual}, 100), Error);
}

TEST_CASE("information ratio") {
    // Two-point hand computation.
    const std::vector<double> p{0.01, 0.03};
    const std::vector<double> b{0.0, 0.0};
    CHECK(information_ratio(p, b) == doctest::Approx(1.414214).epsilon(1e-6));
    CHECK(information_ratio(p, b, true) ==
          doctest::Approx(1.414214 * std::sqrt(12.0)).epsilon(1e-6));
    // Sign flip.
    const std::vector<double> neg{-0.01, -0.03};
    CHECK(information_ratio(neg, b) == doctest::Approx(-1.414214).epsilon(1e-6));
    // Degenerate excess refused.
    CHECK_THROWS_AS(information_ratio(p, p), Error);
    CHECK_THROWS_AS(information_ratio({0.1}, {0.0}), Error);
}

TEST_CASE("top-n selection and the sort oracle") {
    Vector pred(5);
    pred << 0.3, -0.1, 0.5, 0.3, 0.0;
    const std::vector<std::string> ids{"A", "B", "C", "D", "E"};
    const auto top2 = select_top_n(pred, ids, 2);
    CHECK(top2[0] == 2);
    CHECK(top2[1] == 0); // tie with D broken by id order
    const auto all = select_top_n(pred, ids, 5);
    CHECK(all.size() == 5);
    CHECK_THROWS_AS(select_top_n(pred, ids, 6), Error);

    // Oracle predictor: predictions equal realized returns.
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector returns = oracles::random_gaussian(30, 1, rng).col(0);
        std::vector<std::string> names;
        for (int i = 0; i < 30; ++i) names.push_back("S" + std::to_string(i));
        const auto sel = select_top_n(returns, names, 5);
        std::vector<double> sorted(returns.data(), returns.data() + returns.size());
        std::sort(sorted.rbegin(), sorted.rend());
        double expected = 0.0;
        for (int i = 0; i < 5; ++i) expected += sorted[static_cast<std::size_t>(i)];
        double got = 0.0;
        for (const auto idx : sel) got += returns(idx);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("random selection is deterministic and in range") {
    const auto a = select_random_n(20, 5, 7);
    const auto b = select_random_n(20, 5, 7);
    CHECK(a == b);
    for (const auto idx : a) CHECK(idx < 20);
    std::set<Index> unique(a.begin(), a.end());
    CHECK(unique.size() == 5);
}

TEST_CASE("three-period ols backtest has full alignment") {
    const SynthPanel sp = make_panel(3, 40, 4, 11);
    BacktestConfig cfg;
    cfg.method = Method::ols;
    cfg.portfolio_sizes = {5};
    const BacktestReport report = run_backtest(sp.panel, cfg);
    REQUIRE(report.periods.size() == 3);
    int in_rows = 0, out_rows = 0;
    for (const auto& pm : report.periods) {
        if (!pm.fit_failed) ++in_rows;
        if (pm.r2_out) ++out_rows;
    }
    CHECK(in_rows == 3);
    CHECK(out_rows == 2);
    CHECK_FALSE(report.periods.front().r2_out.has_value());
}

TEST_CASE("constant returns are learned exactly by an intercept model") {
    SynthPanel sp = make_panel(3, 30, 3, 12);
    for (auto& cs : sp.panel.cross_sections) cs.returns.setConstant(0.02);
    BacktestConfig cfg;
    cfg.method = Method::ols;
    cfg.portfolio_sizes = {};
    const BacktestReport report = run_backtest(sp.panel, cfg);
    for (const auto& pm : report.periods) {
        if (pm.mse_out) {
            CHECK(*pm.mse_out <= 1e-20);
            CHECK(*pm.linf_out <= 1e-9);
        }
    }
}

TEST_CASE("backtest needs two periods and valid sizes") {
    const SynthPanel sp = make_panel(1, 30, 3, 13);
    BacktestConfig cfg;
    cfg.method = Method::ols;
    CHECK_THROWS_AS(run_backtest(sp.panel, cfg), Error);
    const SynthPanel ok = make_panel(3, 30, 3, 13);
    BacktestConfig bad;
    bad.method = Method::ols;
    bad.portfolio_sizes = {0};
    CHECK_THROWS_AS(run_backtest(ok.panel, bad), Error);
}

TEST_CASE("look-ahead sentinel: corrupting t+1 leaves the period-t model unchanged") {
    const SynthPanel clean = make_panel(4, 50, 5, 14);
    SynthPanel corrupted = clean;
    corrupted.panel.cross_sections[2].features.setConstant(1e6);
    corrupted.panel.cross_sections[2].returns.setConstant(-1e6);

    BacktestConfig cfg;
    cfg.method = Method::pls;
    cfg.k = 2;
    cfg.seed = 5;
    const auto a = fit_period_model(clean.panel.cross_sections[1], cfg, 2,
                                    derive_seed(cfg.seed, "period", 1));
    const auto b = fit_period_model(corrupted.panel.cross_sections[1], cfg, 2,
                                    derive_seed(cfg.seed, "period", 1));
    CHECK(a.model_json == b.model_json);
}

TEST_CASE("portfolio weights are equal and sum to one") {
    // Equal weighting is structural: the portfolio return is the mean of the
    // selected returns, i.e. weights 1/n summing to one.
    const SynthPanel sp = make_panel(4, 30, 4, 15);
    BacktestConfig cfg;
    cfg.method = Method::ols;
    cfg.portfolio_sizes = {30};
    const BacktestReport report = run_backtest(sp.panel, cfg);
    REQUIRE(report.portfolios.size() == 1);
    // Full-universe portfolio equals the benchmark mean each period.
    const auto& series = report.portfolios.front();
    for (std::size_t t = 0; t < series.returns.size(); ++t) {
        CHECK(series.returns[t] == doctest::Approx(series.benchmark[t]).epsilon(1e-12));
    }
}

TEST_CASE("k sweep: r2 grows to the true dimension then plateaus") {
    SynthConfig scfg;
    scfg.n = 80;
    scfg.p = 8;
    scfg.q = 1;
    scfg.k_true = 3;
    scfg.link = SynthLink::linear;
    scfg.noise_sd = 0.01;
    scfg.seed = 16;
    const SynthPanel sp = generate_panel(scfg, 6);
    BacktestConfig cfg;
    cfg.method = Method::pls;
    cfg.k = 6;
    cfg.sweep_min_obs = 100;
    const auto rows = k_sweep(sp.panel, cfg);
    REQUIRE(rows.size() >= 4);
    REQUIRE(rows[2].r2_total_in.has_value());
    // K=3 captures nearly everything; K=1 and K=2 are strictly worse.
    CHECK(*rows[2].r2_total_in > *rows[0].r2_total_in);
    CHECK(*rows[2].r2_total_in > 0.98);
    for (std::size_t i = 3; i < rows.size(); ++i) {
        if (rows[i].r2_total_in) {
            CHECK(*rows[i].r2_total_in >= *rows[2].r2_total_in - 0.01);
        }
    }
}

TEST_CASE("k truncation at the full count is the prediction path bitwise") {
    const SynthPanel sp = make_panel(2, 60, 5, 17);
    const auto& cs = sp.panel.cross_sections[0];
    const PlsModel m = fit_nipals(cs.features, Matrix(cs.returns), 3);
    const Matrix full = predict(m, cs.features);
    const Matrix truncated = predict_truncated(m, cs.features, m.K);
    CHECK(full == truncated);
}

TEST_CASE("pca method is in-sample only") {
    const SynthPanel sp = make_panel(6, 25, 4, 18);
    BacktestConfig cfg;
    cfg.method = Method::pca_insample_only;
    cfg.k = 3;
    cfg.sweep_min_obs = 100;
    const BacktestReport report = run_backtest(sp.panel, cfg);
    CHECK_FALSE(report.r2_total_out.has_value());
    for (const auto& pm : report.periods) CHECK_FALSE(pm.r2_out.has_value());
    for (const auto& row : report.ksweep) CHECK_FALSE(row.r2_total_out.has_value());
    CHECK(report.portfolios.empty());
}

TEST_CASE("full-universe tilts vanish on standardized features") {
    const SynthPanel sp = make_panel(5, 40, 4, 19);
    BacktestConfig cfg;
    cfg.method = Method::ols;
    cfg.portfolio_sizes = {40};
    const BacktestReport report = run_backtest(sp.panel, cfg);
    const Vector& tilt = report.tilts.feature_tilts.at(40);
    CHECK(tilt.cwiseAbs().maxCoeff() <= 3.0 / std::sqrt(40.0));
}

TEST_CASE("random-control information ratio is centered near zero") {
    // Zero-mean i.i.d. returns; portfolios drawn at random per period.
    Rng noise(20);
    SynthPanel sp = make_panel(24, 50, 3, 20);
    for (auto& cs : sp.panel.cross_sections) {
        for (Index i = 0; i < cs.n_assets(); ++i) cs.returns(i) = 0.05 * noise.gaussian();
    }
    std::vector<double> irs;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::vector<double> port, bench;
        for (Index t = 1; t < sp.panel.n_periods(); ++t) {
            const auto& cs = sp.panel.cross_sections[static_cast<std::size_t>(t)];
            const auto members = select_random_n(
                cs.n_assets(), 10, derive_seed(seed, "random-control", t));
            double r = 0.0;
            for (const auto idx : members) r += cs.returns(idx);
            port.push_back(r / 10.0);
            bench.push_back(cs.returns.mean());
        }
        irs.push_back(information_ratio(port, bench));
    }
    const double t_eff = static_cast<double>(sp.panel.n_periods() - 1);
    CHECK(std::abs(oracles::median(irs)) <= 2.0 / std::sqrt(50.0 * t_eff));
}

TEST_CASE("backtest is deterministic and independent of jobs") {
    const SynthPanel sp = make_panel(5, 40, 5, 21, SynthLink::tanh_link, 0.1);
    BacktestConfig cfg;
    cfg.method = Method::dpls;
    cfg.k = 2;
    cfg.net_hidden = {8};
    cfg.train.epochs = 10;
    cfg.portfolio_sizes = {5};
    cfg.seed = 3;
    cfg.jobs = 1;
    const BacktestReport a = run_backtest(sp.panel, cfg);
    cfg.jobs = 4;
    const BacktestReport b = run_backtest(sp.panel, cfg);
    REQUIRE(a.periods.size() == b.periods.size());
    for (std::size_t t = 0; t < a.periods.size(); ++t) {
        CHECK(a.periods[t].mse_in == b.periods[t].mse_in);
        if (a.periods[t].mse_out) CHECK(*a.periods[t].mse_out == *b.periods[t].mse_out);
    }
    CHECK(a.r2_total_in == b.r2_total_in);
}

TEST_CASE("cv stride reuses the anchor selection") {
    const SynthPanel sp = make_panel(6, 60, 5, 22);
    BacktestConfig cfg;
    cfg.method = Method::pls;
    cfg.k = 0;
    cfg.k_grid = {1, 2, 3};
    cfg.cv_first_period_only = true;
    cfg.seed = 9;
    const BacktestReport report = run_backtest(sp.panel, cfg);
    const int k0 = report.periods.front().k_used;
    for (const auto& pm : report.periods) CHECK(pm.k_used == k0);
}
