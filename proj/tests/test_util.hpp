#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"

namespace testutil {

inline std::string data_path(const std::string& rel) {
    return std::string(TEST_DATA_DIR) + "/" + rel;
}

// Slack feeding one PQ load over a single x = 0.1 line.
inline const char* kTwoBusCase =
    "BASE_MVA 100\n"
    "BUS\n"
    "1 3 0.0 0.0 0.0 0.0 1.0 0\n"
    "2 1 0.5 0.2 0.0 0.0 1.0 0\n"
    "BRANCH\n"
    "1 2 0.0 0.1 0.0 1.0 1\n"
    "GEN\n"
    "1 0.0 0.0 1.0\n";

// Random state in the usual operating envelope: solved angles nudged by up
// to 0.1 rad, PQ magnitudes by up to 3 percent.
inline void perturb_state(const gridtwin::Network& net, const gridtwin::StateIndexMap& map,
                          Eigen::VectorXd& v, Eigen::VectorXd& theta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(-0.1, 0.1);
    std::uniform_real_distribution<double> mag(-0.03, 0.03);
    for (int dense : map.theta_dense) theta[dense] += angle(rng);
    for (int dense : map.v_dense) v[dense] *= 1.0 + mag(rng);
    (void)net;
}

// Central finite differences of the reduced injections, V columns already in
// the (dy/dV) * V convention so the result is directly comparable with
// analytic_jacobian.
inline Eigen::MatrixXd fd_jacobian_vscaled(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                           const gridtwin::StateIndexMap& map,
                                           const Eigen::VectorXd& v,
                                           const Eigen::VectorXd& theta) {
    const int p = map.dimension();
    const auto n_theta = static_cast<int>(map.theta_dense.size());
    Eigen::MatrixXd jac(p, p);
    Eigen::VectorXd pw(v.size()), qw(v.size());

    auto reduced = [&](const Eigen::VectorXd& vv, const Eigen::VectorXd& tt) {
        gridtwin::injections(g, b, vv, tt, pw, qw);
        Eigen::VectorXd y(p);
        int at = 0;
        for (int dense : map.theta_dense) y[at++] = pw[dense];
        for (int dense : map.v_dense) y[at++] = qw[dense];
        return y;
    };

    for (int col = 0; col < p; ++col) {
        Eigen::VectorXd v_hi = v, v_lo = v, t_hi = theta, t_lo = theta;
        double scale = 1.0;
        if (col < n_theta) {
            const double h = 1e-6;
            const int dense = map.theta_dense[static_cast<std::size_t>(col)];
            t_hi[dense] += h;
            t_lo[dense] -= h;
            scale = 1.0 / (2.0 * h);
        } else {
            const int dense = map.v_dense[static_cast<std::size_t>(col - n_theta)];
            const double h = 1e-6 * std::max(1.0, std::abs(v[dense]));
            v_hi[dense] += h;
            v_lo[dense] -= h;
            scale = v[dense] / (2.0 * h);
        }
        jac.col(col) = (reduced(v_hi, t_hi) - reduced(v_lo, t_lo)) * scale;
    }
    return jac;
}

inline Eigen::MatrixXd fd_jacobian_vscaled(const gridtwin::Network& net,
                                           const Eigen::VectorXd& v,
                                           const Eigen::VectorXd& theta) {
    Eigen::MatrixXd g, b;
    gridtwin::build_ybus_dense(net, g, b);
    return fd_jacobian_vscaled(g, b, gridtwin::make_index_map(net), v, theta);
}

}  // namespace testutil
