#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "diagnose.hpp"
#include "experiment.hpp"
#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"
#include "matpower.hpp"

namespace {

using namespace gridtwin;

// Distinct exit codes per failure class, so scripts can react without
// parsing stderr. 1 is reserved for unclassified failures, 2 for usage.
int exit_code_for(const std::exception& err) {
    if (dynamic_cast<const ConfigError*>(&err)) return 8;
    if (dynamic_cast<const UnderdeterminedError*>(&err) ||
        dynamic_cast<const IllConditionedError*>(&err))
        return 7;
    if (dynamic_cast<const NonConvergenceError*>(&err) ||
        dynamic_cast<const SingularJacobianError*>(&err) ||
        dynamic_cast<const DivergenceError*>(&err))
        return 6;
    if (dynamic_cast<const ValidationError*>(&err) || dynamic_cast<const DimensionError*>(&err))
        return 5;
    if (dynamic_cast<const ParseError*>(&err)) return 4;
    if (dynamic_cast<const IoError*>(&err)) return 3;
    return 1;
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

int run_solve(const std::string& case_path, const std::string& out_dir) {
    const Network net = load_case(case_path);
    const PowerFlowSolution sol = solve_powerflow(net);
    const std::string doc = solution_to_json(net, sol);
    if (out_dir.empty()) {
        std::cout << doc;
    } else {
        ensure_directory(out_dir);
        write_text_file(out_dir + "/solution.json", doc);
    }
    std::cerr << "converged in " << sol.iterations << " iterations, final mismatch "
              << format_double(sol.final_mismatch) << "\n";
    return 0;
}

int run_twin_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                     const std::string& out_dir, bool emit_heatmaps) {
    ExperimentConfig config = load_experiment_config(config_path);
    if (seed) config.fluctuation.seed = *seed;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (emit_heatmaps) config.emit_heatmaps = true;
    const auto artifacts = run_twin(config);
    std::cerr << "wrote " << artifacts.size() << " artifacts\n";
    std::cout << config.output_dir << "/manifest.json\n";
    return 0;
}

int run_diagnose(const std::string& bias_path, const std::string& case_path) {
    const Network net = load_case(case_path);
    std::cout << diagnose_report(net, read_text_file(bias_path));
    return 0;
}

int run_convert(const std::string& m_path, const std::string& out_dir) {
    const Network net = parse_matpower(read_text_file(m_path));
    const std::string text = write_case(net);
    if (out_dir.empty()) {
        std::cout << text;
    } else {
        ensure_directory(out_dir);
        const std::string name = std::filesystem::path(m_path).stem().string() + ".case";
        write_text_file(out_dir + "/" + name, text);
        std::cout << out_dir << "/" << name << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"steady-state power system digital twin toolkit"};
    app.require_subcommand(1);

    std::string solve_case, solve_out;
    CLI::App* solve = app.add_subcommand("solve", "solve AC power flow for a case file");
    solve->add_option("case", solve_case, "case file")->required();
    solve->add_option("--out", solve_out, "directory for solution.json (default: stdout)");

    std::string twin_config, twin_out;
    std::optional<std::uint64_t> twin_seed;
    bool twin_heatmaps = false;
    CLI::App* twin = app.add_subcommand("twin", "run a digital-twin experiment pipeline");
    twin->add_option("--config", twin_config, "experiment config (JSON)")->required();
    twin->add_option("--seed", twin_seed, "override the fluctuation seed");
    twin->add_option("--out", twin_out, "override the output directory");
    twin->add_flag("--emit-heatmaps", twin_heatmaps, "also write PGM heatmaps");

    std::string diag_bias, diag_case;
    CLI::App* diagnose =
        app.add_subcommand("diagnose", "map bias outliers to description-file suspects");
    diagnose->add_option("bias", diag_bias, "bias report JSON")->required();
    diagnose->add_option("case", diag_case, "case file the report was computed against")
        ->required();

    std::string convert_in, convert_out;
    CLI::App* convert =
        app.add_subcommand("convert-case", "convert a Matpower .m file to the case format");
    convert->add_option("matpower", convert_in, "Matpower .m case file")->required();
    convert->add_option("--out", convert_out, "directory for the .case file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return run_solve(solve_case, solve_out);
        if (twin->parsed()) return run_twin_command(twin_config, twin_seed, twin_out, twin_heatmaps);
        if (diagnose->parsed()) return run_diagnose(diag_bias, diag_case);
        if (convert->parsed()) return run_convert(convert_in, convert_out);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err);
    }
    return 2;
}
