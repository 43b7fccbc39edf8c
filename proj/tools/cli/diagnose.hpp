#pragma once

#include <string>

#include "gridtwin/network.hpp"

namespace gridtwin {

// Maps the outliers of a serialized bias report onto the network description:
// a cross-bus outlier (P_i, theta_j) implicates branches between i and j
// first and branches touching either bus second; a same-bus outlier
// implicates the bus's own shunt record first. Returns the ranked report as
// text, one suspect per block with the case-file lines to inspect.
std::string diagnose_report(const Network& net, const std::string& bias_json);

}  // namespace gridtwin
