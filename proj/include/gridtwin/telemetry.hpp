#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"

namespace gridtwin {

// Load/dispatch fluctuation model for synthetic telemetry.
//
// Per sample, every nonzero demand (P and Q, any bus) and every nonzero PV
// generator setpoint is scaled by (1 + relative_sigma * eps) with a fresh
// standard normal eps. On top of that, independent N(0, injection_noise^2)
// terms are added to every non-slack P target and every PQ Q target, so all
// state directions are excited even at buses with no load.
// artificial_noise_sigma is not used during simulation; it is the default
// measurement noise applied by standardize().
struct FluctuationConfig {
    double relative_sigma = 0.02;
    double artificial_noise_sigma = 1e-6;
    double injection_noise_sigma = 2e-3;
    std::uint64_t seed = 1;
    long samples = 2;
};

// Column t holds the reduced state x_t and the injections y_t computed from
// x_t, so each column pair satisfies the power flow equations to machine
// precision.
struct TelemetrySeries {
    Eigen::MatrixXd x_series;  // p x T
    Eigen::MatrixXd y_series;  // p x T
    StateIndexMap index_map;
};

struct DeltaMatrices {
    Eigen::MatrixXd a;  // state steps,     p x (length - 1)
    Eigen::MatrixXd b;  // injection steps, p x (length - 1)
};

// Repeated power flow under the fluctuation model. Deterministic in
// (network, config): sample t draws from its own generator seeded by
// (config.seed, t), so results do not depend on sample evaluation order.
// Solver failures carry the sample index.
TelemetrySeries simulate_series(const Network& net, const FluctuationConfig& config);

// Adds i.i.d. N(0, noise_sigma^2) to every entry, then z-scores each row.
// A zero-variance row with noise_sigma == 0 throws ValidationError.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& m, double noise_sigma, std::uint64_t seed);

// Consecutive differences over the half-open column window
// [start, start + length): a_k = x_{start+k+1} - x_{start+k}, same for b.
DeltaMatrices form_deltas(const TelemetrySeries& series, long start, long length);

// Mean voltage magnitude per V state over the same window, used to move
// plain dy/dV estimates into the voltage-scaled convention.
Eigen::VectorXd window_v_means(const TelemetrySeries& series, long start, long length);

// CSV with one header row of labels ("theta2,...,V5,..." for the state axis,
// "P2,...,Q5,..." for the injection axis) and one row per sample.
std::string series_to_csv(const Eigen::MatrixXd& m, const StateIndexMap& map, Axis axis);

// Inverse of series_to_csv: drops the header and returns the p x T layout.
Eigen::MatrixXd series_from_csv(const std::string& text);

}  // namespace gridtwin
