#include "matpower.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "gridtwin/errors.hpp"

namespace gridtwin {

namespace {

std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t at = line.find('%');
        if (at != std::string::npos) line.erase(at);
        out += line;
        out += '\n';
    }
    return out;
}

double number_at(const std::string& tok) {
    double v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(0, "bad matpower number '" + tok + "'");
    return v;
}

// Rows of the bracketed matrix assigned to `key`, e.g. key = "mpc.bus".
std::vector<std::vector<double>> matrix_block(const std::string& text, const std::string& key) {
    std::size_t at = text.find(key);
    if (at == std::string::npos) throw ParseError(0, "missing " + key + " table");
    at = text.find('[', at);
    const std::size_t end = text.find(']', at);
    if (at == std::string::npos || end == std::string::npos)
        throw ParseError(0, key + " table is not bracketed");

    std::vector<std::vector<double>> rows;
    std::string body = text.substr(at + 1, end - at - 1);
    for (char& c : body)
        if (c == ';' || c == '\n' || c == '\r') c = ';';
    std::istringstream by_row(body);
    std::string row_text;
    while (std::getline(by_row, row_text, ';')) {
        std::istringstream by_tok(row_text);
        std::vector<double> row;
        std::string tok;
        while (by_tok >> tok) row.push_back(number_at(tok));
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(0, key + " table is empty");
    return rows;
}

double scalar_value(const std::string& text, const std::string& key) {
    std::size_t at = text.find(key);
    if (at == std::string::npos) throw ParseError(0, "missing " + key);
    at = text.find('=', at);
    const std::size_t end = text.find(';', at);
    if (at == std::string::npos || end == std::string::npos)
        throw ParseError(0, key + " is not a scalar assignment");
    std::istringstream ss(text.substr(at + 1, end - at - 1));
    std::string tok;
    ss >> tok;
    return number_at(tok);
}

}  // namespace

Network parse_matpower(const std::string& raw) {
    const std::string text = strip_comments(raw);
    Network net;
    net.base_mva = scalar_value(text, "mpc.baseMVA");
    if (net.base_mva <= 0) throw ValidationError("baseMVA must be positive");

    for (const auto& row : matrix_block(text, "mpc.bus")) {
        if (row.size() < 13) throw ParseError(0, "bus row needs 13 columns");
        Bus bus;
        bus.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        if (type < 1 || type > 3)
            throw ValidationError("bus " + std::to_string(bus.id) + " has unsupported type " +
                                  std::to_string(type));
        bus.kind = static_cast<BusKind>(type);
        bus.p_demand = row[2] / net.base_mva;
        bus.q_demand = row[3] / net.base_mva;
        bus.g_shunt = row[4] / net.base_mva;
        bus.b_shunt = row[5] / net.base_mva;
        bus.v_setpoint = row[7];
        bus.theta_setpoint_deg = row[8];
        bus.theta_setpoint = bus.theta_setpoint_deg * std::numbers::pi / 180.0;
        net.buses.push_back(bus);
    }

    for (const auto& row : matrix_block(text, "mpc.branch")) {
        if (row.size() < 11) throw ParseError(0, "branch row needs 11 columns");
        Branch br;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        if (row[9] != 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) +
                                  " has a phase shift, which is not supported");
        br.status = row[10] != 0.0;
        net.branches.push_back(br);
    }

    std::set<int> dispatched;
    for (const auto& row : matrix_block(text, "mpc.gen")) {
        if (row.size() < 8) throw ParseError(0, "gen row needs 8 columns");
        if (row[7] <= 0.0) continue;  // out of service
        Gen gen;
        gen.bus = static_cast<int>(row[0]);
        gen.pg = row[1] / net.base_mva;
        gen.qg = row[2] / net.base_mva;
        gen.v_setpoint = row[5];
        net.gens.push_back(gen);
        dispatched.insert(gen.bus);
        for (Bus& bus : net.buses)
            if (bus.id == gen.bus && bus.kind != BusKind::PQ) bus.v_setpoint = gen.v_setpoint;
    }
    for (Bus& bus : net.buses)
        if (bus.kind == BusKind::PV && !dispatched.count(bus.id)) bus.kind = BusKind::PQ;

    validate(net);
    return net;
}

}  // namespace gridtwin
