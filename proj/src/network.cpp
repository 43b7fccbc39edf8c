#include "gridtwin/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"

namespace gridtwin {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::vector<std::string> tokenize(const std::string& line) {
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream ss(cleaned);
    std::vector<std::string> toks;
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
}

double parse_number(const std::string& tok, int line) {
    double v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(line, "expected a number, got '" + tok + "'");
    return v;
}

int parse_int(const std::string& tok, int line) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(line, "expected an integer, got '" + tok + "'");
    return v;
}

bool same_pair(const Branch& br, int a, int b) {
    return (br.from_bus == a && br.to_bus == b) || (br.from_bus == b && br.to_bus == a);
}

bool identical_rows(const Branch& lhs, const Branch& rhs) {
    return lhs.from_bus == rhs.from_bus && lhs.to_bus == rhs.to_bus && lhs.r == rhs.r &&
           lhs.x == rhs.x && lhs.b_charging == rhs.b_charging && lhs.tap == rhs.tap &&
           lhs.status == rhs.status;
}

}  // namespace

int Network::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == bus_id) return static_cast<int>(i);
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

const Bus& Network::bus(int bus_id) const {
    return buses[static_cast<std::size_t>(index_of(bus_id))];
}

int Network::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::Slack) return static_cast<int>(i);
    throw ValidationError("network has no slack bus");
}

Eigen::VectorXd Network::p_scheduled() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) p[static_cast<Eigen::Index>(i)] = -buses[i].p_demand;
    for (const Gen& g : gens) p[index_of(g.bus)] += g.pg;
    return p;
}

Eigen::VectorXd Network::q_scheduled() const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) q[static_cast<Eigen::Index>(i)] = -buses[i].q_demand;
    for (const Gen& g : gens) q[index_of(g.bus)] += g.qg;
    return q;
}

void validate(const Network& net) {
    if (net.base_mva <= 0.0) throw ValidationError("base_mva must be positive");
    if (net.buses.empty()) throw ValidationError("network has no buses");

    std::set<int> ids;
    int slacks = 0;
    for (const Bus& b : net.buses) {
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::Slack) ++slacks;
        if (b.v_setpoint <= 0.0)
            throw ValidationError("bus " + std::to_string(b.id) + " has nonpositive voltage setpoint");
    }
    if (slacks == 0) throw ValidationError("network has no slack bus");
    if (slacks > 1) throw ValidationError("network has more than one slack bus");

    for (const Branch& br : net.branches) {
        auto where = br.source_line > 0 ? " (line " + std::to_string(br.source_line) + ")" : std::string{};
        if (!ids.count(br.from_bus))
            throw ValidationError("branch references unknown bus " + std::to_string(br.from_bus) + where);
        if (!ids.count(br.to_bus))
            throw ValidationError("branch references unknown bus " + std::to_string(br.to_bus) + where);
        if (br.from_bus == br.to_bus)
            throw ValidationError("branch from bus " + std::to_string(br.from_bus) + " to itself" + where);
        if (br.tap <= 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " has nonpositive tap" + where);
        if (br.status && br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " has zero impedance" + where);
    }

    for (const Gen& g : net.gens) {
        if (!ids.count(g.bus))
            throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
        const Bus& b = net.bus(g.bus);
        if (b.kind != BusKind::PQ && std::abs(g.v_setpoint - b.v_setpoint) > 1e-9)
            throw ValidationError("generator and bus voltage setpoints disagree at bus " +
                                  std::to_string(g.bus));
    }

    // Connectivity over in-service branches, starting from the slack.
    std::unordered_map<int, std::vector<int>> adj;
    for (const Branch& br : net.branches) {
        if (!br.status) continue;
        adj[br.from_bus].push_back(br.to_bus);
        adj[br.to_bus].push_back(br.from_bus);
    }
    std::set<int> seen;
    std::queue<int> frontier;
    int slack_id = net.buses[static_cast<std::size_t>(net.slack_index())].id;
    frontier.push(slack_id);
    seen.insert(slack_id);
    while (!frontier.empty()) {
        int at = frontier.front();
        frontier.pop();
        for (int next : adj[at])
            if (seen.insert(next).second) frontier.push(next);
    }
    for (const Bus& b : net.buses)
        if (!seen.count(b.id))
            throw ValidationError("bus " + std::to_string(b.id) +
                                  " is not connected to the slack bus");
}

Network parse_case(const std::string& text) {
    enum class Section { None, Bus, Branch, Gen };
    Network net;
    bool saw_base = false;
    Section section = Section::None;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::size_t first = raw.find_first_not_of(" \t");
        if (first == std::string::npos || raw[first] == '#') continue;
        auto toks = tokenize(raw);

        if (toks[0] == "BASE_MVA") {
            if (toks.size() != 2) throw ParseError(line_no, "BASE_MVA takes one value");
            net.base_mva = parse_number(toks[1], line_no);
            saw_base = true;
            continue;
        }
        if (toks[0] == "BUS" || toks[0] == "BRANCH" || toks[0] == "GEN") {
            if (toks.size() != 1)
                throw ParseError(line_no, "unexpected tokens after section header " + toks[0]);
            section = toks[0] == "BUS" ? Section::Bus
                      : toks[0] == "BRANCH" ? Section::Branch
                                            : Section::Gen;
            continue;
        }

        switch (section) {
            case Section::None:
                throw ParseError(line_no, "data row before any section header");
            case Section::Bus: {
                if (toks.size() != 8)
                    throw ParseError(line_no, "BUS row needs 8 fields, got " +
                                                  std::to_string(toks.size()));
                Bus b;
                b.id = parse_int(toks[0], line_no);
                int kind = parse_int(toks[1], line_no);
                if (kind < 1 || kind > 3)
                    throw ParseError(line_no, "bus kind must be 1 (PQ), 2 (PV) or 3 (slack)");
                b.kind = static_cast<BusKind>(kind);
                b.p_demand = parse_number(toks[2], line_no);
                b.q_demand = parse_number(toks[3], line_no);
                b.g_shunt = parse_number(toks[4], line_no);
                b.b_shunt = parse_number(toks[5], line_no);
                b.v_setpoint = parse_number(toks[6], line_no);
                b.theta_setpoint_deg = parse_number(toks[7], line_no);
                b.theta_setpoint = b.theta_setpoint_deg * kDegToRad;
                b.source_line = line_no;
                net.buses.push_back(b);
                break;
            }
            case Section::Branch: {
                if (toks.size() != 7)
                    throw ParseError(line_no, "BRANCH row needs 7 fields, got " +
                                                  std::to_string(toks.size()));
                Branch br;
                br.from_bus = parse_int(toks[0], line_no);
                br.to_bus = parse_int(toks[1], line_no);
                br.r = parse_number(toks[2], line_no);
                br.x = parse_number(toks[3], line_no);
                br.b_charging = parse_number(toks[4], line_no);
                br.tap = parse_number(toks[5], line_no);
                int status = parse_int(toks[6], line_no);
                if (status != 0 && status != 1)
                    throw ParseError(line_no, "branch status must be 0 or 1");
                br.status = status == 1;
                br.source_line = line_no;
                net.branches.push_back(br);
                break;
            }
            case Section::Gen: {
                if (toks.size() != 4)
                    throw ParseError(line_no, "GEN row needs 4 fields, got " +
                                                  std::to_string(toks.size()));
                Gen g;
                g.bus = parse_int(toks[0], line_no);
                g.pg = parse_number(toks[1], line_no);
                g.qg = parse_number(toks[2], line_no);
                g.v_setpoint = parse_number(toks[3], line_no);
                g.source_line = line_no;
                net.gens.push_back(g);
                break;
            }
        }
    }
    if (!saw_base) throw ParseError(line_no, "missing BASE_MVA");
    validate(net);
    return net;
}

Network load_case(const std::string& path) { return parse_case(read_text_file(path)); }

std::string write_case(const Network& net) {
    std::string out;
    out += "BASE_MVA " + format_double(net.base_mva) + "\n";
    out += "BUS\n# id kind Pd Qd Gs Bs Vset ThetaSet\n";
    for (const Bus& b : net.buses) {
        out += std::to_string(b.id) + " " + std::to_string(static_cast<int>(b.kind)) + " " +
               format_double(b.p_demand) + " " + format_double(b.q_demand) + " " +
               format_double(b.g_shunt) + " " + format_double(b.b_shunt) + " " +
               format_double(b.v_setpoint) + " " + format_double(b.theta_setpoint_deg) + "\n";
    }
    out += "BRANCH\n# from to r x b tap status\n";
    for (const Branch& br : net.branches) {
        out += std::to_string(br.from_bus) + " " + std::to_string(br.to_bus) + " " +
               format_double(br.r) + " " + format_double(br.x) + " " +
               format_double(br.b_charging) + " " + format_double(br.tap) + " " +
               (br.status ? "1" : "0") + "\n";
    }
    out += "GEN\n# bus Pg Qg Vset\n";
    for (const Gen& g : net.gens) {
        out += std::to_string(g.bus) + " " + format_double(g.pg) + " " + format_double(g.qg) +
               " " + format_double(g.v_setpoint) + "\n";
    }
    return out;
}

void build_ybus_dense(const Network& net, Eigen::MatrixXd& g, Eigen::MatrixXd& b) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    g = Eigen::MatrixXd::Zero(n, n);
    b = Eigen::MatrixXd::Zero(n, n);
    for (const Branch& br : net.branches) {
        if (!br.status) continue;
        const Eigen::Index f = net.index_of(br.from_bus);
        const Eigen::Index t = net.index_of(br.to_bus);
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> half_charge(0.0, br.b_charging / 2.0);
        const double tap2 = br.tap * br.tap;
        const std::complex<double> yff = (ys + half_charge) / tap2;
        const std::complex<double> yft = -ys / br.tap;
        const std::complex<double> ytt = ys + half_charge;
        g(f, f) += yff.real();
        b(f, f) += yff.imag();
        g(t, t) += ytt.real();
        b(t, t) += ytt.imag();
        g(f, t) += yft.real();
        b(f, t) += yft.imag();
        g(t, f) += yft.real();
        b(t, f) += yft.imag();
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto d = static_cast<Eigen::Index>(i);
        g(d, d) += net.buses[i].g_shunt;
        b(d, d) += net.buses[i].b_shunt;
    }
}

AdmittanceMatrix build_ybus(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    std::vector<Eigen::Triplet<double>> tg, tb;
    auto push = [&](Eigen::Index i, Eigen::Index j, const std::complex<double>& y) {
        tg.emplace_back(static_cast<int>(i), static_cast<int>(j), y.real());
        tb.emplace_back(static_cast<int>(i), static_cast<int>(j), y.imag());
    };
    for (const Branch& br : net.branches) {
        if (!br.status) continue;
        const Eigen::Index f = net.index_of(br.from_bus);
        const Eigen::Index t = net.index_of(br.to_bus);
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> half_charge(0.0, br.b_charging / 2.0);
        const double tap2 = br.tap * br.tap;
        push(f, f, (ys + half_charge) / tap2);
        push(t, t, ys + half_charge);
        push(f, t, -ys / br.tap);
        push(t, f, -ys / br.tap);
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto d = static_cast<Eigen::Index>(i);
        push(d, d, {net.buses[i].g_shunt, net.buses[i].b_shunt});
    }
    AdmittanceMatrix y;
    y.g.resize(n, n);
    y.b.resize(n, n);
    y.g.setFromTriplets(tg.begin(), tg.end());
    y.b.setFromTriplets(tb.begin(), tb.end());
    return y;
}

Network apply_branch_edit(const Network& net, const BranchEdit& edit) {
    Network out = net;
    std::vector<std::size_t> matches;
    for (std::size_t i = 0; i < out.branches.size(); ++i)
        if (same_pair(out.branches[i], edit.from_bus, edit.to_bus)) matches.push_back(i);
    const std::string pair_name =
        std::to_string(edit.from_bus) + "-" + std::to_string(edit.to_bus);
    if (matches.empty()) throw ValidationError("no branch between buses " + pair_name);

    switch (edit.kind) {
        case BranchEditKind::RemoveDuplicate: {
            std::size_t victim = out.branches.size();
            for (std::size_t a = 0; a < matches.size(); ++a)
                for (std::size_t b = a + 1; b < matches.size(); ++b)
                    if (identical_rows(out.branches[matches[a]], out.branches[matches[b]]))
                        victim = matches[b];
            if (victim == out.branches.size())
                throw ValidationError("branch between buses " + pair_name +
                                      " has no duplicate row to remove");
            out.branches.erase(out.branches.begin() + static_cast<std::ptrdiff_t>(victim));
            break;
        }
        case BranchEditKind::AddDuplicate: {
            Branch copy = out.branches[matches.front()];
            copy.source_line = 0;
            out.branches.push_back(copy);
            break;
        }
        case BranchEditKind::SetParameter: {
            for (std::size_t i : matches) {
                Branch& br = out.branches[i];
                if (edit.parameter == "r")
                    br.r = edit.value;
                else if (edit.parameter == "x")
                    br.x = edit.value;
                else if (edit.parameter == "b_charging")
                    br.b_charging = edit.value;
                else if (edit.parameter == "tap")
                    br.tap = edit.value;
                else if (edit.parameter == "status")
                    br.status = edit.value != 0.0;
                else
                    throw ValidationError("unknown branch parameter '" + edit.parameter + "'");
            }
            break;
        }
    }
    validate(out);
    return out;
}

}  // namespace gridtwin
