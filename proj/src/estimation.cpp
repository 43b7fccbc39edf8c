#include "gridtwin/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "gridtwin/errors.hpp"
#include "json.hpp"

namespace gridtwin {

namespace {

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(values.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

JacobianBenchmark benchmark_jacobian(const Network& net, const TelemetrySeries& series) {
    const StateIndexMap& map = series.index_map;
    const long t_total = series.x_series.cols();
    if (t_total < 1) throw DimensionError("series has no samples");

    Eigen::MatrixXd g, b;
    build_ybus_dense(net, g, b);
    // two passes over the samples, with the mean anchored at the first
    // sample's Jacobian: the shifted one-pass variance loses all precision
    // when the spread is tiny next to the mean, and an unanchored mean of a
    // constant series misses the exact value by rounding
    Eigen::VectorXd v, theta;
    unpack_state(net, map, series.x_series.col(0), v, theta);
    const Eigen::MatrixXd anchor = analytic_jacobian(g, b, map, v, theta).values;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(map.dimension(), map.dimension());
    for (long t = 1; t < t_total; ++t) {
        unpack_state(net, map, series.x_series.col(t), v, theta);
        sum += analytic_jacobian(g, b, map, v, theta).values - anchor;
    }

    JacobianBenchmark bench;
    bench.index_map = map;
    bench.samples = t_total;
    bench.j_mean = anchor + sum / static_cast<double>(t_total);

    Eigen::MatrixXd spread = Eigen::MatrixXd::Zero(map.dimension(), map.dimension());
    for (long t = 0; t < t_total; ++t) {
        unpack_state(net, map, series.x_series.col(t), v, theta);
        const Eigen::MatrixXd dev = analytic_jacobian(g, b, map, v, theta).values - bench.j_mean;
        spread += dev.cwiseProduct(dev);
    }
    bench.j_std = (spread / static_cast<double>(t_total)).cwiseSqrt();
    return bench;
}

Eigen::MatrixXd lse_fit(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::Index p = a.rows();
    if (b.rows() != p || b.cols() != a.cols())
        throw DimensionError("delta matrices disagree: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    if (a.cols() <= p) throw UnderdeterminedError(a.cols(), p);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    const Eigen::VectorXd rdiag = qr.matrixR().diagonal().head(p).cwiseAbs();
    const double condition =
        rdiag[p - 1] > 0.0 ? rdiag[0] / rdiag[p - 1] : std::numeric_limits<double>::infinity();
    if (qr.rank() < p) throw IllConditionedError(qr.rank(), condition, p);

    return qr.solve(b.transpose()).transpose();
}

JacobianMatrix lse_jacobian(const DeltaMatrices& deltas, const StateIndexMap& map) {
    if (deltas.a.rows() != map.dimension())
        throw DimensionError("delta rows do not match the index map dimension");
    JacobianMatrix jac;
    jac.values = lse_fit(deltas.a, deltas.b);
    jac.index_map = map;
    jac.provenance = Provenance::LeastSquares;
    return jac;
}

JacobianMatrix to_vscaled(const JacobianMatrix& plain, const Eigen::VectorXd& v_means) {
    const auto nt = static_cast<Eigen::Index>(plain.index_map.theta_bus_ids.size());
    const auto nv = static_cast<Eigen::Index>(plain.index_map.v_bus_ids.size());
    if (v_means.size() != nv)
        throw DimensionError("expected " + std::to_string(nv) + " voltage means, got " +
                             std::to_string(v_means.size()));
    JacobianMatrix out = plain;
    for (Eigen::Index l = 0; l < nv; ++l) out.values.col(nt + l) *= v_means[l];
    return out;
}

BiasReport bias_report(const JacobianMatrix& estimate, const JacobianBenchmark& benchmark,
                       const OutlierRule& rule) {
    if (estimate.values.rows() != benchmark.j_mean.rows() ||
        estimate.values.cols() != benchmark.j_mean.cols())
        throw DimensionError("estimate and benchmark shapes disagree");

    BiasReport report;
    report.index_map = benchmark.index_map;
    report.bias = estimate.values - benchmark.j_mean;
    report.max_abs = report.bias.size() > 0 ? report.bias.cwiseAbs().maxCoeff() : 0.0;
    const double bench_norm = benchmark.j_mean.norm();
    report.frobenius_rel = bench_norm > 0.0 ? report.bias.norm() / bench_norm
                                            : report.bias.norm();

    std::vector<double> magnitudes(static_cast<std::size_t>(report.bias.size()));
    for (Eigen::Index j = 0, at = 0; j < report.bias.cols(); ++j)
        for (Eigen::Index i = 0; i < report.bias.rows(); ++i)
            magnitudes[static_cast<std::size_t>(at++)] = std::abs(report.bias(i, j));
    const double med = median_of(magnitudes);
    std::vector<double> spread = magnitudes;
    for (double& v : spread) v = std::abs(v - med);
    // floored so a spike over an otherwise exact match still gets a huge,
    // finite z instead of dividing by a zero MAD
    const double scale = std::max(1.4826 * median_of(spread),
                                  1e-12 * (report.max_abs + 1e-300));
    report.threshold_value = med + rule.threshold * scale;

    const StateIndexMap& map = report.index_map;
    for (Eigen::Index i = 0; i < report.bias.rows(); ++i) {
        for (Eigen::Index j = 0; j < report.bias.cols(); ++j) {
            const double mag = std::abs(report.bias(i, j));
            const double z = (mag - med) / scale;
            if (z <= rule.threshold) continue;
            Outlier out;
            out.row = static_cast<int>(i) + 1;
            out.col = static_cast<int>(j) + 1;
            out.label = entry_label(map, out.row, out.col);
            out.value = report.bias(i, j);
            out.zscore = z;
            const Label row_label = index_to_label(map, out.row, Axis::Injection);
            const Label col_label = index_to_label(map, out.col, Axis::State);
            const bool cross_bus = row_label.bus_id != col_label.bus_id;
            out.score = mag * (1.0 + (cross_bus ? rule.cross_bus_boost : 0.0));
            report.outliers.push_back(std::move(out));
        }
    }
    std::sort(report.outliers.begin(), report.outliers.end(),
              [](const Outlier& lhs, const Outlier& rhs) {
                  if (lhs.score != rhs.score) return lhs.score > rhs.score;
                  if (lhs.row != rhs.row) return lhs.row < rhs.row;
                  return lhs.col < rhs.col;
              });
    return report;
}

std::string bias_to_json(const BiasReport& report) {
    nlohmann::json doc;
    doc["dimension"] = report.index_map.dimension();
    doc["max_abs"] = report.max_abs;
    doc["frobenius_rel"] = report.frobenius_rel;
    doc["threshold_value"] = report.threshold_value;
    nlohmann::json outliers = nlohmann::json::array();
    for (const Outlier& out : report.outliers)
        outliers.push_back({{"row", out.row},
                            {"col", out.col},
                            {"label", out.label},
                            {"value", out.value},
                            {"zscore", out.zscore},
                            {"score", out.score}});
    doc["outliers"] = outliers;
    return doc.dump(1) + "\n";
}

std::vector<MonotonicityPoint> monotonicity_study(const TelemetrySeries& series,
                                                  const JacobianBenchmark& benchmark,
                                                  const std::vector<long>& windows) {
    const double bench_norm = benchmark.j_mean.norm();
    std::vector<MonotonicityPoint> points;
    points.reserve(windows.size());
    for (long w : windows) {
        const DeltaMatrices deltas = form_deltas(series, 0, w);
        const JacobianMatrix plain = lse_jacobian(deltas, series.index_map);
        const JacobianMatrix aligned = to_vscaled(plain, window_v_means(series, 0, w));
        MonotonicityPoint point;
        point.window = w;
        point.frobenius_rel = (aligned.values - benchmark.j_mean).norm() / bench_norm;
        points.push_back(point);
    }
    return points;
}

}  // namespace gridtwin
