#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace gridtwin {

// Bus kinds use the case-file codes directly.
enum class BusKind : int { PQ = 1, PV = 2, Slack = 3 };

struct Bus {
    int id = 0;  // external 1-based bus number, need not be contiguous
    BusKind kind = BusKind::PQ;
    double p_demand = 0.0;  // per unit on the system base
    double q_demand = 0.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    double v_setpoint = 1.0;
    double theta_setpoint = 0.0;      // radians
    double theta_setpoint_deg = 0.0;  // exact value from the file, kept for round trips
    int source_line = 0;              // 1-based line in the case file, 0 if synthetic
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging susceptance
    double tap = 1.0;         // off-nominal turns ratio on the from side
    bool status = true;
    int source_line = 0;
};

struct Gen {
    int bus = 0;
    double pg = 0.0;
    double qg = 0.0;  // informational; reactive output is solved, not fixed
    double v_setpoint = 1.0;
    int source_line = 0;
};

struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;  // duplicates allowed, they act in parallel
    std::vector<Gen> gens;

    // Dense position of a bus id in `buses` (0-based). Throws ValidationError
    // for unknown ids.
    int index_of(int bus_id) const;
    const Bus& bus(int bus_id) const;
    int slack_index() const;

    // Scheduled net injection targets per bus, generation minus demand.
    Eigen::VectorXd p_scheduled() const;
    Eigen::VectorXd q_scheduled() const;
};

// Nodal admittance matrix Y = G + jB, stored sparse. Row/column order follows
// Network::buses.
struct AdmittanceMatrix {
    Eigen::SparseMatrix<double> g;
    Eigen::SparseMatrix<double> b;

    Eigen::Index size() const { return g.rows(); }
    Eigen::MatrixXd g_dense() const { return Eigen::MatrixXd(g); }
    Eigen::MatrixXd b_dense() const { return Eigen::MatrixXd(b); }
};

// Throws ValidationError if the model is not solvable: duplicate bus ids,
// branch endpoints that do not exist, no slack or more than one, generators
// on unknown buses, nonpositive voltage setpoints, zero-impedance branches,
// or an electrically disconnected in-service network.
void validate(const Network& net);

// Parse the plain-text case format. Lines starting with '#' and blank lines
// are skipped; section headers are BASE_MVA, BUS, BRANCH, GEN. All electrical
// quantities are per unit, angles in the file are degrees. The parser records
// source line numbers and runs validate() before returning.
Network parse_case(const std::string& text);
Network load_case(const std::string& path);

// Inverse of parse_case up to comments: writing and re-parsing reproduces the
// network exactly, including duplicate branch rows and their order.
std::string write_case(const Network& net);

AdmittanceMatrix build_ybus(const Network& net);

// Dense G and B, assembled directly. Same numbers as build_ybus.
void build_ybus_dense(const Network& net, Eigen::MatrixXd& g, Eigen::MatrixXd& b);

enum class BranchEditKind { RemoveDuplicate, AddDuplicate, SetParameter };

struct BranchEdit {
    BranchEditKind kind = BranchEditKind::SetParameter;
    int from_bus = 0;
    int to_bus = 0;
    std::string parameter;  // r, x, b_charging, tap, status
    double value = 0.0;
};

// Returns an edited copy; the input is untouched. RemoveDuplicate drops the
// last of at least two identical parallel rows and throws ValidationError if
// the pair has no duplicate. AddDuplicate appends a copy of the first row
// between the pair. SetParameter rewrites one field on every row between the
// pair. The edited network is re-validated.
Network apply_branch_edit(const Network& net, const BranchEdit& edit);

}  // namespace gridtwin
