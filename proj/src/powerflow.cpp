#include "gridtwin/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "gridtwin/errors.hpp"
#include "json.hpp"

namespace gridtwin {

namespace {

// Blocks of the polar Jacobian for all buses; the reduced system is sliced
// out of these by the index map. V columns are pre-scaled by V_j.
struct FullBlocks {
    Eigen::MatrixXd h;  // dP/dtheta
    Eigen::MatrixXd n;  // dP/dV * V
    Eigen::MatrixXd k;  // dQ/dtheta
    Eigen::MatrixXd l;  // dQ/dV * V
};

FullBlocks full_jacobian_blocks(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd a = v.array() * theta.array().cos();  // Re of complex voltage
    const Eigen::VectorXd c = v.array() * theta.array().sin();  // Im of complex voltage

    // w_re(i,k) + j w_im(i,k) = V_i conj(V_k) in complex form; the products
    // below expand V_i V_k cos/sin(theta_i - theta_k) without per-entry trig.
    const Eigen::MatrixXd w_re = a * a.transpose() + c * c.transpose();
    const Eigen::MatrixXd w_im = c * a.transpose() - a * c.transpose();
    const Eigen::MatrixXd m_re = w_re.cwiseProduct(g) + w_im.cwiseProduct(b);
    const Eigen::MatrixXd m_im = w_im.cwiseProduct(g) - w_re.cwiseProduct(b);

    // Row sums of M are exactly P + jQ.
    const Eigen::VectorXd p = m_re.rowwise().sum();
    const Eigen::VectorXd q = m_im.rowwise().sum();

    FullBlocks blocks;
    blocks.h = m_im;
    blocks.h.diagonal() -= q;
    blocks.n = m_re;
    blocks.n.diagonal() += p;
    blocks.k = -m_re;
    blocks.k.diagonal() += p;
    blocks.l = m_im;
    blocks.l.diagonal() += q;
    return blocks;
}

Eigen::VectorXd pack_injections(const StateIndexMap& map, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& q) {
    const auto nt = static_cast<Eigen::Index>(map.theta_dense.size());
    const auto nv = static_cast<Eigen::Index>(map.v_dense.size());
    Eigen::VectorXd y(nt + nv);
    for (Eigen::Index k = 0; k < nt; ++k) y[k] = p[map.theta_dense[static_cast<std::size_t>(k)]];
    for (Eigen::Index l = 0; l < nv; ++l) y[nt + l] = q[map.v_dense[static_cast<std::size_t>(l)]];
    return y;
}

}  // namespace

StateIndexMap make_index_map(const Network& net) {
    std::vector<std::pair<int, int>> order;  // (id, dense)
    order.reserve(net.buses.size());
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        order.emplace_back(net.buses[i].id, static_cast<int>(i));
    std::sort(order.begin(), order.end());

    StateIndexMap map;
    for (const auto& [id, dense] : order) {
        const Bus& bus = net.buses[static_cast<std::size_t>(dense)];
        if (bus.kind != BusKind::Slack) {
            map.theta_bus_ids.push_back(id);
            map.theta_dense.push_back(dense);
        }
        if (bus.kind == BusKind::PQ) {
            map.v_bus_ids.push_back(id);
            map.v_dense.push_back(dense);
        }
    }
    return map;
}

Label index_to_label(const StateIndexMap& map, int position, Axis axis) {
    const int nt = static_cast<int>(map.theta_bus_ids.size());
    const int p = map.dimension();
    if (position < 1 || position > p)
        throw DimensionError("index " + std::to_string(position) + " outside [1, " +
                             std::to_string(p) + "]");
    const int at = position - 1;
    if (at < nt) {
        return {axis == Axis::State ? Quantity::Theta : Quantity::P,
                map.theta_bus_ids[static_cast<std::size_t>(at)]};
    }
    return {axis == Axis::State ? Quantity::V : Quantity::Q,
            map.v_bus_ids[static_cast<std::size_t>(at - nt)]};
}

std::string to_string(const Label& label) {
    switch (label.quantity) {
        case Quantity::Theta: return "theta" + std::to_string(label.bus_id);
        case Quantity::V: return "V" + std::to_string(label.bus_id);
        case Quantity::P: return "P" + std::to_string(label.bus_id);
        case Quantity::Q: return "Q" + std::to_string(label.bus_id);
    }
    return {};
}

std::string entry_label(const StateIndexMap& map, int row, int col) {
    return "d" + to_string(index_to_label(map, row, Axis::Injection)) + "/d" +
           to_string(index_to_label(map, col, Axis::State));
}

void injections(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& v,
                const Eigen::VectorXd& theta, Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const Eigen::VectorXd a = v.array() * theta.array().cos();
    const Eigen::VectorXd c = v.array() * theta.array().sin();
    const Eigen::VectorXd i_re = g * a - b * c;
    const Eigen::VectorXd i_im = g * c + b * a;
    p = a.cwiseProduct(i_re) + c.cwiseProduct(i_im);
    q = c.cwiseProduct(i_re) - a.cwiseProduct(i_im);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> injections(const Network& net,
                                                       const Eigen::VectorXd& v,
                                                       const Eigen::VectorXd& theta) {
    Eigen::MatrixXd g, b;
    build_ybus_dense(net, g, b);
    std::pair<Eigen::VectorXd, Eigen::VectorXd> out;
    injections(g, b, v, theta, out.first, out.second);
    return out;
}

JacobianMatrix analytic_jacobian(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                 const StateIndexMap& map, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& theta) {
    const FullBlocks blocks = full_jacobian_blocks(g, b, v, theta);
    const auto nt = static_cast<Eigen::Index>(map.theta_dense.size());
    const auto nv = static_cast<Eigen::Index>(map.v_dense.size());

    JacobianMatrix jac;
    jac.index_map = map;
    jac.provenance = Provenance::Analytic;
    jac.values.resize(nt + nv, nt + nv);
    jac.values.topLeftCorner(nt, nt) = blocks.h(map.theta_dense, map.theta_dense);
    jac.values.topRightCorner(nt, nv) = blocks.n(map.theta_dense, map.v_dense);
    jac.values.bottomLeftCorner(nv, nt) = blocks.k(map.v_dense, map.theta_dense);
    jac.values.bottomRightCorner(nv, nv) = blocks.l(map.v_dense, map.v_dense);
    return jac;
}

JacobianMatrix analytic_jacobian(const Network& net, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& theta) {
    Eigen::MatrixXd g, b;
    build_ybus_dense(net, g, b);
    return analytic_jacobian(g, b, make_index_map(net), v, theta);
}

Eigen::VectorXd pack_state(const StateIndexMap& map, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& theta) {
    const auto nt = static_cast<Eigen::Index>(map.theta_dense.size());
    const auto nv = static_cast<Eigen::Index>(map.v_dense.size());
    Eigen::VectorXd x(nt + nv);
    for (Eigen::Index k = 0; k < nt; ++k) x[k] = theta[map.theta_dense[static_cast<std::size_t>(k)]];
    for (Eigen::Index l = 0; l < nv; ++l) x[nt + l] = v[map.v_dense[static_cast<std::size_t>(l)]];
    return x;
}

void unpack_state(const Network& net, const StateIndexMap& map, const Eigen::VectorXd& x,
                  Eigen::VectorXd& v, Eigen::VectorXd& theta) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    const auto nt = static_cast<Eigen::Index>(map.theta_dense.size());
    if (x.size() != map.dimension())
        throw DimensionError("state vector has size " + std::to_string(x.size()) +
                             ", index map needs " + std::to_string(map.dimension()));
    v.resize(n);
    theta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = net.buses[static_cast<std::size_t>(i)].v_setpoint;
        theta[i] = net.buses[static_cast<std::size_t>(i)].theta_setpoint;
    }
    for (std::size_t k = 0; k < map.theta_dense.size(); ++k)
        theta[map.theta_dense[k]] = x[static_cast<Eigen::Index>(k)];
    for (std::size_t l = 0; l < map.v_dense.size(); ++l)
        v[map.v_dense[l]] = x[nt + static_cast<Eigen::Index>(l)];
}

PowerFlowSolution solve_powerflow_from(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b,
                                       const StateIndexMap& map,
                                       const Eigen::VectorXd& p_target,
                                       const Eigen::VectorXd& q_target, Eigen::VectorXd v,
                                       Eigen::VectorXd theta, const SolveOptions& opts) {
    const auto nt = static_cast<Eigen::Index>(map.theta_dense.size());
    const auto nv = static_cast<Eigen::Index>(map.v_dense.size());

    PowerFlowSolution sol;
    sol.point.index_map = map;
    Eigen::VectorXd p, q;

    const Eigen::VectorXd y_target = pack_injections(map, p_target, q_target);

    for (int it = 0;; ++it) {
        injections(g, b, v, theta, p, q);
        const Eigen::VectorXd r = y_target - pack_injections(map, p, q);
        const double mismatch = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
        sol.mismatch_history.push_back(mismatch);
        if (!std::isfinite(mismatch)) throw NonConvergenceError(it, mismatch);
        if (mismatch < opts.tolerance) {
            sol.iterations = it;
            sol.final_mismatch = mismatch;
            break;
        }
        if (it == opts.max_iter) throw NonConvergenceError(it, mismatch);

        const JacobianMatrix jac = analytic_jacobian(g, b, map, v, theta);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.values);
        const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
        const double pivot_max = pivots.size() > 0 ? pivots.maxCoeff() : 0.0;
        const double pivot_min = pivots.size() > 0 ? pivots.minCoeff() : 0.0;
        if (pivot_max == 0.0 || pivot_min < 1e-14 * pivot_max)
            throw SingularJacobianError("power flow Jacobian is singular at iteration " +
                                        std::to_string(it));
        const Eigen::VectorXd dx = lu.solve(r);
        for (Eigen::Index k = 0; k < nt; ++k)
            theta[map.theta_dense[static_cast<std::size_t>(k)]] += dx[k];
        for (Eigen::Index l = 0; l < nv; ++l)
            v[map.v_dense[static_cast<std::size_t>(l)]] *= 1.0 + dx[nt + l];
    }

    sol.v = v;
    sol.theta = theta;
    sol.point.x = pack_state(map, v, theta);
    sol.point.y = pack_injections(map, p, q);
    return sol;
}

PowerFlowSolution solve_powerflow(const Network& net, const SolveOptions& opts) {
    const StateIndexMap map = make_index_map(net);
    Eigen::MatrixXd g, b;
    build_ybus_dense(net, g, b);

    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Eigen::VectorXd v0(n), theta0(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& bus = net.buses[static_cast<std::size_t>(i)];
        if (opts.flat_start) {
            v0[i] = bus.kind == BusKind::PQ ? 1.0 : bus.v_setpoint;
            theta0[i] = bus.kind == BusKind::Slack ? bus.theta_setpoint : 0.0;
        } else {
            v0[i] = bus.v_setpoint;
            theta0[i] = bus.theta_setpoint;
        }
    }
    return solve_powerflow_from(g, b, map, net.p_scheduled(), net.q_scheduled(),
                                std::move(v0), std::move(theta0), opts);
}

std::string solution_to_json(const Network& net, const PowerFlowSolution& sol) {
    auto [p, q] = injections(net, sol.v, sol.theta);
    nlohmann::json doc;
    doc["base_mva"] = net.base_mva;
    doc["iterations"] = sol.iterations;
    doc["final_mismatch"] = sol.final_mismatch;
    nlohmann::json buses = nlohmann::json::array();
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const Bus& bus = net.buses[i];
        const auto d = static_cast<Eigen::Index>(i);
        buses.push_back({{"id", bus.id},
                         {"kind", static_cast<int>(bus.kind)},
                         {"vm", sol.v[d]},
                         {"va_rad", sol.theta[d]},
                         {"va_deg", sol.theta[d] * 180.0 / std::numbers::pi},
                         {"p", p[d]},
                         {"q", q[d]}});
    }
    doc["buses"] = buses;
    return doc.dump(1) + "\n";
}

}  // namespace gridtwin
