#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridtwin/estimation.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/neural.hpp"
#include "gridtwin/telemetry.hpp"

namespace gridtwin {

struct MlpStageConfig {
    bool enabled = false;
    MlpConfig train;
    // 1-based inclusive sample ranges into the simulated series.
    long train_begin = 1;
    long train_end = 0;
    long test_begin = 0;
    long test_end = 0;
};

struct AnalyticsConfig {
    int num_factors = -1;  // -1 asks for the spike-counting rule
};

struct ExperimentConfig {
    std::string case_path;
    std::string output_dir = "twin-out";
    FluctuationConfig fluctuation;
    std::vector<long> lse_windows;
    MlpStageConfig mlp;
    AnalyticsConfig analytics;
    OutlierRule outliers;
    // When set, the edit is applied to the true network to produce the
    // description used for benchmarks, staging a topology-description error.
    std::optional<BranchEdit> corruption;
    bool emit_heatmaps = false;
};

// Strict JSON schema: unknown keys are rejected so a typo cannot silently
// fall back to a default.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// Fully resolved config (every default filled in), as embedded in manifests.
std::string experiment_config_to_json(const ExperimentConfig& config);

// simulate -> benchmark -> window estimates -> bias reports -> optional MLP
// -> spectral comparison, all under output_dir. Returns artifact name ->
// content hash for everything written except the manifest itself. On any
// failure the manifest records the stage and error before the exception
// leaves this function.
std::map<std::string, std::string> run_twin(const ExperimentConfig& config);

}  // namespace gridtwin
