#include <random>

#include "doctest.h"
#include "json.hpp"

#include "gridtwin/errors.hpp"
#include "gridtwin/estimation.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"
#include "gridtwin/telemetry.hpp"
#include "test_util.hpp"

using namespace gridtwin;
using testutil::data_path;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("noise-free system is recovered to machine precision") {
    const int p = 20;
    const Eigen::MatrixXd j_true = gaussian(p, p, 1);
    const Eigen::MatrixXd a = gaussian(p, 5 * p, 2);
    const Eigen::MatrixXd j_hat = lse_fit(a, j_true * a);
    CHECK((j_hat - j_true).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("too few columns is underdetermined") {
    const Eigen::MatrixXd a = gaussian(20, 20, 3);
    const Eigen::MatrixXd b = gaussian(20, 20, 4);
    try {
        lse_fit(a, b);
        FAIL("expected UnderdeterminedError");
    } catch (const UnderdeterminedError& err) {
        CHECK(err.columns == 20);
        CHECK(err.required == 20);
    }
}

TEST_CASE("rank deficiency is reported with the rank") {
    Eigen::MatrixXd a = gaussian(20, 60, 5);
    a.row(7).setZero();
    try {
        lse_fit(a, gaussian(20, 60, 6));
        FAIL("expected IllConditionedError");
    } catch (const IllConditionedError& err) {
        CHECK(err.rank == 19);
        CHECK(err.condition > 1e10);
    }
}

TEST_CASE("qr solution agrees with the normal equations") {
    const int p = 15;
    const Eigen::MatrixXd a = gaussian(p, 8 * p, 7);
    const Eigen::MatrixXd b = gaussian(p, p, 8) * a + 0.01 * gaussian(p, 8 * p, 9);

    const Eigen::MatrixXd j_qr = lse_fit(a, b);
    const Eigen::MatrixXd gram = a * a.transpose();
    const Eigen::MatrixXd j_ne = gram.ldlt().solve(a * b.transpose()).transpose();
    CHECK((j_qr - j_ne).norm() / j_ne.norm() < 1e-8);

    SUBCASE("residual is orthogonal to the data") {
        const Eigen::MatrixXd r = b - j_qr * a;
        CHECK((r * a.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("no perturbation does better") {
        const double best = (b - j_qr * a).norm();
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 5; ++trial) {
            const Eigen::MatrixXd e = 1e-3 * gaussian(p, p, 11 + static_cast<std::uint64_t>(trial));
            CHECK((b - (j_qr + e) * a).norm() >= best);
        }
    }
}

TEST_CASE("constant series has no information") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    FluctuationConfig cfg;
    cfg.relative_sigma = 0.0;
    cfg.injection_noise_sigma = 0.0;
    cfg.samples = 16;  // p + 2
    const TelemetrySeries s = simulate_series(net, cfg);
    CHECK_THROWS_AS(lse_jacobian(form_deltas(s, 0, 16), s.index_map), IllConditionedError);
}

TEST_CASE("to_vscaled rescales only the V columns") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    const StateIndexMap map = make_index_map(net);
    JacobianMatrix plain;
    plain.values = Eigen::MatrixXd::Ones(14, 14);
    plain.index_map = map;
    plain.provenance = Provenance::LeastSquares;

    Eigen::VectorXd means(6);
    means << 1.05, 0.95, 1.0, 1.01, 0.99, 0.97;
    const JacobianMatrix scaled = to_vscaled(plain, means);
    CHECK(scaled.values.leftCols(8).cwiseAbs().maxCoeff() == 1.0);
    for (int k = 0; k < 6; ++k) CHECK(scaled.values(0, 8 + k) == means[k]);
    CHECK(scaled.provenance == Provenance::LeastSquares);

    CHECK_THROWS_AS(to_vscaled(plain, Eigen::VectorXd::Ones(5)), DimensionError);
}

TEST_CASE("benchmark over a frozen series") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));

    SUBCASE("zero noise collapses the std to zero") {
        FluctuationConfig cfg;
        cfg.relative_sigma = 0.0;
        cfg.injection_noise_sigma = 0.0;
        cfg.samples = 6;
        const TelemetrySeries s = simulate_series(net, cfg);
        const JacobianBenchmark bench = benchmark_jacobian(net, s);
        CHECK(bench.j_std.cwiseAbs().maxCoeff() == 0.0);

        const PowerFlowSolution base = solve_powerflow(net);
        const Eigen::MatrixXd j0 = analytic_jacobian(net, base.v, base.theta).values;
        CHECK((bench.j_mean - j0).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(bench.samples == 6);
    }
    SUBCASE("operating-point spread stays small") {
        FluctuationConfig cfg;
        cfg.samples = 400;
        cfg.seed = 21;
        const TelemetrySeries s = simulate_series(net, cfg);
        const JacobianBenchmark bench = benchmark_jacobian(net, s);
        CHECK(bench.j_std.maxCoeff() < 0.05 * bench.j_mean.cwiseAbs().maxCoeff());
        CHECK(bench.j_std.minCoeff() >= 0.0);
    }
}

TEST_CASE("matching estimate yields an empty report") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    FluctuationConfig cfg;
    cfg.samples = 40;
    const TelemetrySeries s = simulate_series(net, cfg);
    const JacobianBenchmark bench = benchmark_jacobian(net, s);

    JacobianMatrix estimate;
    estimate.values = bench.j_mean;
    estimate.index_map = bench.index_map;
    const BiasReport rep = bias_report(estimate, bench);
    CHECK(rep.max_abs == 0.0);
    CHECK(rep.frobenius_rel == 0.0);
    CHECK(rep.outliers.empty());
}

TEST_CASE("a planted spike is flagged with its labels") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    FluctuationConfig cfg;
    cfg.samples = 40;
    const TelemetrySeries s = simulate_series(net, cfg);
    const JacobianBenchmark bench = benchmark_jacobian(net, s);

    JacobianMatrix estimate;
    estimate.values = bench.j_mean;
    estimate.index_map = bench.index_map;
    const double spike = 5.0 * bench.j_mean.cwiseAbs().maxCoeff();
    estimate.values(3, 2) += spike;  // dP5/dtheta4

    const BiasReport rep = bias_report(estimate, bench);
    REQUIRE(!rep.outliers.empty());
    CHECK(rep.outliers.front().row == 4);
    CHECK(rep.outliers.front().col == 3);
    CHECK(rep.outliers.front().label == "dP5/dtheta4");
    CHECK(rep.outliers.front().value == doctest::Approx(spike));
    CHECK(rep.outliers.front().zscore > 5.0);
    CHECK(rep.max_abs == doctest::Approx(spike));

    SUBCASE("a looser rule hides it") {
        OutlierRule rule;
        rule.threshold = 1e18;
        CHECK(bias_report(estimate, bench, rule).outliers.empty());
    }
    SUBCASE("cross-bus entries win score ties") {
        JacobianMatrix two = estimate;
        two.values = bench.j_mean;
        two.values(0, 0) += spike;  // dP2/dtheta2, same bus
        two.values(5, 2) += spike;  // dP7/dtheta4, cross bus
        const BiasReport pair = bias_report(two, bench);
        REQUIRE(pair.outliers.size() >= 2);
        CHECK(pair.outliers[0].label == "dP7/dtheta4");
        CHECK(pair.outliers[1].label == "dP2/dtheta2");
    }
}

TEST_CASE("bias json carries dimension, norms and outliers") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    FluctuationConfig cfg;
    cfg.samples = 40;
    const TelemetrySeries s = simulate_series(net, cfg);
    const JacobianBenchmark bench = benchmark_jacobian(net, s);
    JacobianMatrix estimate;
    estimate.values = bench.j_mean;
    estimate.index_map = bench.index_map;
    estimate.values(3, 2) += 100.0;

    const BiasReport rep = bias_report(estimate, bench);
    const std::string text = bias_to_json(rep);
    CHECK(bias_to_json(rep) == text);  // deterministic

    const auto doc = nlohmann::json::parse(text);
    CHECK(doc.at("dimension").get<int>() == 14);
    CHECK(doc.at("max_abs").get<double>() == rep.max_abs);
    CHECK(doc.at("outliers").size() == rep.outliers.size());
    CHECK(doc.at("outliers")[0].at("label").get<std::string>() == "dP5/dtheta4");
    CHECK(doc.at("outliers")[0].at("row").get<int>() == 4);
}

TEST_CASE("longer windows estimate better") {
    const Network net = load_case(data_path("data/cases/ieee9.case"));
    FluctuationConfig cfg;
    cfg.samples = 4800;
    cfg.seed = 1;
    const TelemetrySeries s = simulate_series(net, cfg);
    const JacobianBenchmark bench = benchmark_jacobian(net, s);

    const auto points = monotonicity_study(s, bench, {240, 480, 1920, 4800});
    REQUIRE(points.size() == 4);
    CHECK(points[0].window == 240);
    CHECK(points.back().frobenius_rel < points.front().frobenius_rel);
    // nonincreasing trend, small single inversions tolerated
    for (std::size_t k = 0; k + 1 < points.size(); ++k)
        CHECK(points[k + 1].frobenius_rel < 1.10 * points[k].frobenius_rel);
    CHECK(points.back().frobenius_rel < 1e-2);
}

TEST_CASE("missing duplicate circuit surfaces as a cross-pair outlier") {
    const Network net_true = load_case(data_path("data/cases/ieee118.case"));
    const Network net_desc =
        apply_branch_edit(net_true, {BranchEditKind::RemoveDuplicate, 49, 66, "", 0.0});

    // small-signal regime: curvature error scales with the fluctuation, so a
    // quiet system pins the estimate down to the planted topology signal
    FluctuationConfig cfg;
    cfg.relative_sigma = 1e-4;
    cfg.injection_noise_sigma = 1e-5;
    cfg.samples = 400;
    cfg.seed = 2;
    const TelemetrySeries s = simulate_series(net_true, cfg);

    const JacobianMatrix aligned =
        to_vscaled(lse_jacobian(form_deltas(s, 0, 400), s.index_map), window_v_means(s, 0, 400));

    const JacobianBenchmark wrong = benchmark_jacobian(net_desc, s);
    const BiasReport corrupted = bias_report(aligned, wrong);
    REQUIRE(!corrupted.outliers.empty());
    const std::string top = corrupted.outliers.front().label;
    const bool expected = top == "dP66/dtheta49" || top == "dP49/dtheta66";
    CHECK(expected);
    CHECK(corrupted.max_abs > 5.0);

    const JacobianBenchmark right = benchmark_jacobian(net_true, s);
    const BiasReport corrected = bias_report(aligned, right);
    CHECK(corrected.max_abs < corrupted.max_abs / 20.0);
}

}  // TEST_SUITE
