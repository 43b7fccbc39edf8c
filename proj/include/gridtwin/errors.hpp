#pragma once

#include <stdexcept>
#include <string>

namespace gridtwin {

// Base class for everything thrown by this library. Catching this at the
// CLI boundary is enough to map any failure to a process exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Lexical problem in a case file. line is 1-based.
struct ParseError : Error {
    int line;
    ParseError(int line_, const std::string& msg)
        : Error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

// Structurally valid input that does not describe a usable network
// (duplicate ids, dangling branch endpoints, missing slack, ...).
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct NonConvergenceError : Error {
    int iterations;
    double mismatch;
    long sample;  // telemetry sample index, -1 outside simulation
    NonConvergenceError(int iterations_, double mismatch_, long sample_ = -1)
        : Error("power flow did not converge after " + std::to_string(iterations_) +
                " iterations, mismatch " + std::to_string(mismatch_) +
                (sample_ >= 0 ? ", sample " + std::to_string(sample_) : std::string{})),
          iterations(iterations_), mismatch(mismatch_), sample(sample_) {}
};

struct SingularJacobianError : Error {
    explicit SingularJacobianError(const std::string& msg) : Error(msg) {}
};

// Least-squares system has fewer observations than unknowns.
struct UnderdeterminedError : Error {
    long columns;
    long required;
    UnderdeterminedError(long columns_, long required_)
        : Error("need more than " + std::to_string(required_) +
                " delta samples, got " + std::to_string(columns_)),
          columns(columns_), required(required_) {}
};

struct IllConditionedError : Error {
    long rank;
    double condition;
    IllConditionedError(long rank_, double condition_, long required_)
        : Error("delta matrix is rank deficient (rank " + std::to_string(rank_) +
                " of " + std::to_string(required_) + ", condition estimate " +
                std::to_string(condition_) + ")"),
          rank(rank_), condition(condition_) {}
};

struct DivergenceError : Error {
    int epoch;
    DivergenceError(int epoch_, double loss_)
        : Error("training diverged at epoch " + std::to_string(epoch_) +
                ", loss " + std::to_string(loss_)),
          epoch(epoch_) {}
};

}  // namespace gridtwin
