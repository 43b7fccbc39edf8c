#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gridtwin/network.hpp"

namespace gridtwin {

// Reduced state/injection bookkeeping for a solved network.
//
// State order:     theta at every non-slack bus (ascending id), then V at
//                  every PQ bus (ascending id).
// Injection order: P at every non-slack bus, then Q at every PQ bus, with
//                  the same bus ordering.
//
// Both vectors therefore have dimension p = (n - 1) + n_pq and position k of
// the injection vector is the equation paired with position k of the state.
struct StateIndexMap {
    std::vector<int> theta_bus_ids;  // also the P rows
    std::vector<int> v_bus_ids;      // also the Q rows
    std::vector<int> theta_dense;    // positions into Network::buses
    std::vector<int> v_dense;

    int dimension() const {
        return static_cast<int>(theta_bus_ids.size() + v_bus_ids.size());
    }
};

StateIndexMap make_index_map(const Network& net);

enum class Quantity { Theta, V, P, Q };
enum class Axis { State, Injection };

struct Label {
    Quantity quantity = Quantity::Theta;
    int bus_id = 0;
};

// position is 1-based; anything outside [1, p] throws DimensionError.
Label index_to_label(const StateIndexMap& map, int position, Axis axis);
std::string to_string(const Label& label);  // "theta49", "V5", "P66", "Q9"
// 1-based matrix entry (row, col) -> "dP66/dtheta49".
std::string entry_label(const StateIndexMap& map, int row, int col);

struct OperatingPoint {
    Eigen::VectorXd x;  // reduced state
    Eigen::VectorXd y;  // reduced injections, consistent with x to machine precision
    StateIndexMap index_map;
};

enum class Provenance { Analytic, LeastSquares, ChainRule };

struct JacobianMatrix {
    Eigen::MatrixXd values;  // p x p, rows injections, cols states
    StateIndexMap index_map;
    Provenance provenance = Provenance::Analytic;
};

struct SolveOptions {
    double tolerance = 1e-8;  // infinity norm of the power mismatch
    int max_iter = 20;
    bool flat_start = true;  // theta = 0, V = 1 at PQ buses; false uses file setpoints
};

struct PowerFlowSolution {
    OperatingPoint point;
    Eigen::VectorXd v;      // full per-bus magnitudes
    Eigen::VectorXd theta;  // full per-bus angles, radians
    int iterations = 0;     // state updates applied
    double final_mismatch = 0.0;
    std::vector<double> mismatch_history;  // mismatch before each update, then final
};

// Net complex power injected into the grid at every bus (generation positive),
// evaluated from the full bus voltage state. The overload taking dense G and B
// avoids rebuilding the admittance matrix in sampling loops.
void injections(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& v,
                const Eigen::VectorXd& theta, Eigen::VectorXd& p, Eigen::VectorXd& q);
std::pair<Eigen::VectorXd, Eigen::VectorXd> injections(const Network& net,
                                                       const Eigen::VectorXd& v,
                                                       const Eigen::VectorXd& theta);

// Analytic power flow Jacobian in the voltage-scaled convention: the V block
// holds (dy_i / dV_j) * V_j, so all columns share the angle scale. Rows and
// columns follow the index map.
JacobianMatrix analytic_jacobian(const Network& net, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& theta);
JacobianMatrix analytic_jacobian(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                 const StateIndexMap& map, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& theta);

// Reduced state vector from full bus vectors and back. unpack_state fills the
// slack/PV entries from the network setpoints.
Eigen::VectorXd pack_state(const StateIndexMap& map, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& theta);
void unpack_state(const Network& net, const StateIndexMap& map, const Eigen::VectorXd& x,
                  Eigen::VectorXd& v, Eigen::VectorXd& theta);

// Newton-Raphson in polar form. Throws NonConvergenceError or
// SingularJacobianError.
PowerFlowSolution solve_powerflow(const Network& net, const SolveOptions& opts = {});

// Same solver against externally supplied admittance, targets and start
// state; this is the sampling-loop entry point.
PowerFlowSolution solve_powerflow_from(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                       const StateIndexMap& map,
                                       const Eigen::VectorXd& p_target,
                                       const Eigen::VectorXd& q_target, Eigen::VectorXd v0,
                                       Eigen::VectorXd theta0, const SolveOptions& opts);

std::string solution_to_json(const Network& net, const PowerFlowSolution& sol);

}  // namespace gridtwin
