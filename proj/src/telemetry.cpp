#include "gridtwin/telemetry.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"

namespace gridtwin {

namespace {

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<unsigned>(seed & 0xffffffffu),
                      static_cast<unsigned>(seed >> 32),
                      static_cast<unsigned>(index & 0xffffffffu),
                      static_cast<unsigned>(index >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

TelemetrySeries simulate_series(const Network& net, const FluctuationConfig& config) {
    if (config.samples < 1) throw ConfigError("samples must be at least 1");
    if (config.relative_sigma < 0) throw ConfigError("relative_sigma must be nonnegative");
    if (config.injection_noise_sigma < 0)
        throw ConfigError("injection_noise_sigma must be nonnegative");

    const StateIndexMap map = make_index_map(net);
    Eigen::MatrixXd g, b;
    build_ybus_dense(net, g, b);
    const PowerFlowSolution base = solve_powerflow(net);

    // Buses in ascending id order fix the draw sequence within a sample.
    std::vector<int> bus_order(net.buses.size());
    for (std::size_t i = 0; i < net.buses.size(); ++i) bus_order[i] = static_cast<int>(i);
    std::sort(bus_order.begin(), bus_order.end(),
              [&](int lhs, int rhs) { return net.buses[static_cast<std::size_t>(lhs)].id <
                                             net.buses[static_cast<std::size_t>(rhs)].id; });
    std::map<int, double> pg_by_bus;  // total active dispatch per bus id
    for (const Gen& gen : net.gens) pg_by_bus[gen.bus] += gen.pg;
    Eigen::VectorXd q_gen = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.buses.size()));
    for (const Gen& gen : net.gens) q_gen[net.index_of(gen.bus)] += gen.qg;

    TelemetrySeries series;
    series.index_map = map;
    series.x_series.resize(map.dimension(), config.samples);
    series.y_series.resize(map.dimension(), config.samples);

    SolveOptions opts;  // defaults; warm start comes from the base solution
    std::normal_distribution<double> unit(0.0, 1.0);

    for (long t = 0; t < config.samples; ++t) {
        auto rng = sample_rng(config.seed, static_cast<std::uint64_t>(t));
        Eigen::VectorXd p_target(net.buses.size()), q_target(net.buses.size());

        for (int dense : bus_order) {
            const Bus& bus = net.buses[static_cast<std::size_t>(dense)];
            double pd = bus.p_demand;
            double qd = bus.q_demand;
            if (pd != 0.0) pd *= 1.0 + config.relative_sigma * unit(rng);
            if (qd != 0.0) qd *= 1.0 + config.relative_sigma * unit(rng);
            p_target[dense] = -pd;
            q_target[dense] = q_gen[dense] - qd;
        }
        for (int dense : bus_order) {
            const Bus& bus = net.buses[static_cast<std::size_t>(dense)];
            auto pg = pg_by_bus.find(bus.id);
            if (pg == pg_by_bus.end()) continue;
            double dispatch = pg->second;
            if (bus.kind == BusKind::PV && dispatch != 0.0)
                dispatch *= 1.0 + config.relative_sigma * unit(rng);
            p_target[dense] += dispatch;
        }
        for (int dense : map.theta_dense)
            p_target[dense] += config.injection_noise_sigma * unit(rng);
        for (int dense : map.v_dense)
            q_target[dense] += config.injection_noise_sigma * unit(rng);

        try {
            const PowerFlowSolution sol =
                solve_powerflow_from(g, b, map, p_target, q_target, base.v, base.theta, opts);
            series.x_series.col(t) = sol.point.x;
            series.y_series.col(t) = sol.point.y;
        } catch (const NonConvergenceError& err) {
            throw NonConvergenceError(err.iterations, err.mismatch, t);
        }
    }
    return series;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m, double noise_sigma, std::uint64_t seed) {
    if (noise_sigma < 0) throw ConfigError("noise sigma must be nonnegative");
    Eigen::MatrixXd out = m;
    if (noise_sigma > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += noise_sigma * unit(rng);
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double mean = out.row(i).mean();
        const double var = (out.row(i).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd == 0.0)
            throw ValidationError("row " + std::to_string(i) +
                                  " has zero variance and no noise to break the tie");
        out.row(i) = (out.row(i).array() - mean) / sd;
    }
    return out;
}

DeltaMatrices form_deltas(const TelemetrySeries& series, long start, long length) {
    const long t_total = series.x_series.cols();
    if (start < 0 || length < 2 || start + length > t_total)
        throw DimensionError("window [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") does not fit in " +
                             std::to_string(t_total) + " samples");
    DeltaMatrices deltas;
    deltas.a = series.x_series.middleCols(start + 1, length - 1) -
               series.x_series.middleCols(start, length - 1);
    deltas.b = series.y_series.middleCols(start + 1, length - 1) -
               series.y_series.middleCols(start, length - 1);
    return deltas;
}

Eigen::VectorXd window_v_means(const TelemetrySeries& series, long start, long length) {
    const long t_total = series.x_series.cols();
    if (start < 0 || length < 1 || start + length > t_total)
        throw DimensionError("window [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") does not fit in " +
                             std::to_string(t_total) + " samples");
    const auto nt = static_cast<Eigen::Index>(series.index_map.theta_bus_ids.size());
    const auto nv = static_cast<Eigen::Index>(series.index_map.v_bus_ids.size());
    return series.x_series.block(nt, start, nv, length).rowwise().mean();
}

std::string series_to_csv(const Eigen::MatrixXd& m, const StateIndexMap& map, Axis axis) {
    if (m.rows() != map.dimension())
        throw DimensionError("series has " + std::to_string(m.rows()) +
                             " rows, index map expects " + std::to_string(map.dimension()));
    std::string out;
    for (int k = 1; k <= map.dimension(); ++k) {
        if (k > 1) out += ',';
        out += to_string(index_to_label(map, k, axis));
    }
    out += '\n';
    out += matrix_to_csv(m.transpose());
    return out;
}

Eigen::MatrixXd series_from_csv(const std::string& text) {
    const std::size_t eol = text.find('\n');
    if (eol == std::string::npos) throw ParseError(1, "series file has no sample rows");
    const Eigen::MatrixXd samples = matrix_from_csv(text.substr(eol + 1));
    if (samples.size() == 0) throw ParseError(1, "series file has no sample rows");
    return samples.transpose();
}

}  // namespace gridtwin
