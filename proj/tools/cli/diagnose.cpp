#include "diagnose.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "json.hpp"

#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"
#include "gridtwin/powerflow.hpp"

namespace gridtwin {

namespace {

constexpr double kDirectWeight = 1.0;
constexpr double kIncidentWeight = 0.25;

struct Suspect {
    double score = 0.0;
    std::set<int> lines;                // case-file lines, 1-based
    std::vector<std::string> evidence;  // one entry per contributing outlier
};

std::string join_lines(const std::set<int>& lines) {
    std::string out;
    for (int line : lines) {
        if (!out.empty()) out += ", ";
        out += std::to_string(line);
    }
    return out.empty() ? "none recorded" : out;
}

}  // namespace

std::string diagnose_report(const Network& net, const std::string& bias_json) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bias_json);
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(0, std::string("bias report is not valid JSON: ") + err.what());
    }
    const StateIndexMap map = make_index_map(net);
    if (!doc.contains("dimension") || !doc["dimension"].is_number_integer())
        throw ParseError(0, "bias report has no dimension field");
    if (doc["dimension"].get<int>() != map.dimension())
        throw DimensionError("bias report dimension " + doc["dimension"].dump() +
                             " does not match the network (p = " +
                             std::to_string(map.dimension()) + ")");

    std::string out;
    if (!doc.contains("outliers") || !doc["outliers"].is_array() || doc["outliers"].empty()) {
        out += "no suspects: the bias report lists no outliers above its threshold\n";
        return out;
    }

    // keys: branch endpoints as an ordered pair, or (bus, bus) for a shunt
    std::map<std::pair<int, int>, Suspect> branches;
    std::map<int, Suspect> shunts;
    for (const auto& entry : doc["outliers"]) {
        const int row = entry.at("row").get<int>();
        const int col = entry.at("col").get<int>();
        const double value = entry.at("value").get<double>();
        const double zscore = entry.at("zscore").get<double>();
        const int bus_i = index_to_label(map, row, Axis::Injection).bus_id;
        const int bus_j = index_to_label(map, col, Axis::State).bus_id;
        const double weight = std::abs(value);
        const std::string note = entry_label(map, row, col) + ": value " +
                                 format_double(value) + ", z " + format_double(zscore);

        if (bus_i == bus_j) {
            Suspect& shunt = shunts[bus_i];
            shunt.score += kDirectWeight * weight;
            shunt.lines.insert(net.bus(bus_i).source_line);
            shunt.evidence.push_back(note + " (own bus)");
        }
        for (const Branch& br : net.branches) {
            const bool touches_i = br.from_bus == bus_i || br.to_bus == bus_i;
            const bool touches_j = br.from_bus == bus_j || br.to_bus == bus_j;
            if (!touches_i && !touches_j) continue;
            const bool direct = bus_i != bus_j && touches_i && touches_j;
            const auto key = std::minmax(br.from_bus, br.to_bus);
            Suspect& suspect = branches[key];
            suspect.score += (direct ? kDirectWeight : kIncidentWeight) * weight;
            suspect.lines.insert(br.source_line);
            suspect.evidence.push_back(note + (direct ? " (direct)" : " (incident)"));
        }
    }

    struct Ranked {
        bool is_branch;
        std::pair<int, int> key;
        const Suspect* suspect;
    };
    std::vector<Ranked> ranked;
    for (const auto& [key, suspect] : branches) ranked.push_back({true, key, &suspect});
    for (const auto& [bus, suspect] : shunts) ranked.push_back({false, {bus, bus}, &suspect});
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& lhs, const Ranked& rhs) {
        if (lhs.suspect->score != rhs.suspect->score)
            return lhs.suspect->score > rhs.suspect->score;
        if (lhs.is_branch != rhs.is_branch) return lhs.is_branch;
        return lhs.key < rhs.key;
    });

    out += "suspects, strongest first:\n";
    int place = 0;
    for (const Ranked& item : ranked) {
        ++place;
        out += "  " + std::to_string(place) + ". ";
        if (item.is_branch)
            out += "branch " + std::to_string(item.key.first) + "-" +
                   std::to_string(item.key.second);
        else
            out += "shunt record of bus " + std::to_string(item.key.first);
        out += ": score " + format_double(item.suspect->score) + ", case line" +
               (item.suspect->lines.size() == 1 ? " " : "s ") +
               join_lines(item.suspect->lines) + "\n";
        for (const std::string& note : item.suspect->evidence) out += "       " + note + "\n";
    }
    return out;
}

}  // namespace gridtwin
