#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"
#include "gridtwin/telemetry.hpp"

namespace gridtwin {

// Entrywise mean and standard deviation of the analytic Jacobian over every
// sampled operating point in a series.
struct JacobianBenchmark {
    Eigen::MatrixXd j_mean;
    Eigen::MatrixXd j_std;
    StateIndexMap index_map;
    long samples = 0;
};

JacobianBenchmark benchmark_jacobian(const Network& net, const TelemetrySeries& series);

// Least squares fit J = argmin |J A - B|_F, i.e. J^T = (A A^T)^{-1} A B^T,
// computed through a rank-revealing QR of A^T rather than the normal
// equations. Throws UnderdeterminedError when A has at most p columns and
// IllConditionedError when A is numerically rank deficient.
Eigen::MatrixXd lse_fit(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// lse_fit on a delta window. The result is a plain finite-difference Jacobian
// dy/dx; apply to_vscaled before comparing with analytic benchmarks.
JacobianMatrix lse_jacobian(const DeltaMatrices& deltas, const StateIndexMap& map);

// Rescales the V columns by the given per-bus voltage means so the estimate
// uses the same (dy/dV) * V convention as the analytic Jacobian.
JacobianMatrix to_vscaled(const JacobianMatrix& plain, const Eigen::VectorXd& v_means);

struct OutlierRule {
    double threshold = 5.0;        // robust z-score cutoff
    double cross_bus_boost = 1e-3; // rank ties in favor of off-bus entries
};

struct Outlier {
    int row = 0;  // 1-based injection index
    int col = 0;  // 1-based state index
    std::string label;
    double value = 0.0;   // signed bias entry
    double zscore = 0.0;  // robust z of |value|
    double score = 0.0;   // ranking key
};

struct BiasReport {
    Eigen::MatrixXd bias;  // estimate - benchmark mean
    double max_abs = 0.0;
    double frobenius_rel = 0.0;     // |bias|_F / |benchmark|_F
    double threshold_value = 0.0;   // |value| implied by the z cutoff
    std::vector<Outlier> outliers;  // ranked, largest score first
    StateIndexMap index_map;
};

// Flags entries whose magnitude sits more than rule.threshold robust
// standard deviations (median/MAD) above the typical magnitude.
BiasReport bias_report(const JacobianMatrix& estimate, const JacobianBenchmark& benchmark,
                       const OutlierRule& rule = {});

std::string bias_to_json(const BiasReport& report);

struct MonotonicityPoint {
    long window = 0;
    double frobenius_rel = 0.0;
};

// Relative benchmark error of the aligned least squares estimate for a set
// of window lengths, all anchored at the start of the series.
std::vector<MonotonicityPoint> monotonicity_study(const TelemetrySeries& series,
                                                  const JacobianBenchmark& benchmark,
                                                  const std::vector<long>& windows);

}  // namespace gridtwin
