#pragma once

#include <string>

#include "gridtwin/network.hpp"

namespace gridtwin {

// Reads a Matpower .m case (mpc.baseMVA / mpc.bus / mpc.branch / mpc.gen
// tables) and converts it to a Network: MW quantities become per-unit on
// baseMVA, generator voltage setpoints overwrite their bus setpoints, and PV
// buses without an in-service generator fall back to PQ. Phase-shifting
// transformers are rejected.
Network parse_matpower(const std::string& text);

}  // namespace gridtwin
