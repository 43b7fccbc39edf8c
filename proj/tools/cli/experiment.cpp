#include "experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <string>

#include "json.hpp"

#include "gridtwin/errors.hpp"
#include "gridtwin/io_util.hpp"
#include "gridtwin/spectral.hpp"

namespace gridtwin {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* key) { return it.key() == key; }))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

const json& object_at(const json& doc, const char* key) {
    const json& v = doc.at(key);
    if (!v.is_object()) throw ConfigError(std::string(key) + " must be an object");
    return v;
}

template <typename T>
T pick(const json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

template <typename T>
T demand(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw ConfigError(where + " needs '" + key + "'");
    return pick<T>(obj, where, key, T{});
}

BranchEdit parse_edit(const json& obj) {
    require_keys(obj, "corruption", {"op", "from", "to", "parameter", "value"});
    BranchEdit edit;
    const auto op = demand<std::string>(obj, "corruption", "op");
    if (op == "remove_duplicate") edit.kind = BranchEditKind::RemoveDuplicate;
    else if (op == "add_duplicate") edit.kind = BranchEditKind::AddDuplicate;
    else if (op == "set_parameter") edit.kind = BranchEditKind::SetParameter;
    else throw ConfigError("unknown corruption op '" + op + "'");
    edit.from_bus = demand<int>(obj, "corruption", "from");
    edit.to_bus = demand<int>(obj, "corruption", "to");
    if (edit.kind == BranchEditKind::SetParameter) {
        edit.parameter = demand<std::string>(obj, "corruption", "parameter");
        edit.value = demand<double>(obj, "corruption", "value");
    } else if (obj.contains("parameter") || obj.contains("value")) {
        throw ConfigError("corruption parameter/value only apply to set_parameter");
    }
    return edit;
}

std::string edit_op_name(BranchEditKind kind) {
    switch (kind) {
        case BranchEditKind::RemoveDuplicate: return "remove_duplicate";
        case BranchEditKind::AddDuplicate: return "add_duplicate";
        case BranchEditKind::SetParameter: return "set_parameter";
    }
    return "set_parameter";
}

// Writes artifacts under one directory and remembers a content hash for each.
class ArtifactSink {
public:
    explicit ArtifactSink(std::string dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_ + ": " + ec.message());
    }

    void write(const std::string& name, const std::string& content) {
        write_text_file(dir_ + "/" + name, content);
        hashes_[name] = to_hex(fnv1a_hash(content));
    }

    const std::map<std::string, std::string>& hashes() const { return hashes_; }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::map<std::string, std::string> hashes_;
};

json spectrum_summary(const SpectrumReport& rep) {
    return {{"num_spikes", rep.spikes.size()},
            {"spike_threshold", rep.spike_threshold},
            {"sigma2", rep.sigma2},
            {"ks_distance", rep.ks_distance}};
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& err) {
        throw ConfigError(std::string("config is not valid JSON: ") + err.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    require_keys(doc, "config",
                 {"case", "output_dir", "emit_heatmaps", "fluctuation", "lse_windows", "mlp",
                  "analytics", "outliers", "corruption"});

    ExperimentConfig config;
    config.case_path = demand<std::string>(doc, "config", "case");
    if (config.case_path.empty()) throw ConfigError("config.case must not be empty");
    config.output_dir = pick<std::string>(doc, "config", "output_dir", config.output_dir);
    config.emit_heatmaps = pick<bool>(doc, "config", "emit_heatmaps", false);

    if (doc.contains("fluctuation")) {
        const json& f = object_at(doc, "fluctuation");
        const std::string where = "fluctuation";
        require_keys(f, where,
                     {"relative_sigma", "artificial_noise_sigma", "injection_noise_sigma",
                      "seed", "samples"});
        FluctuationConfig& fl = config.fluctuation;
        fl.relative_sigma = pick(f, where, "relative_sigma", fl.relative_sigma);
        fl.artificial_noise_sigma =
            pick(f, where, "artificial_noise_sigma", fl.artificial_noise_sigma);
        fl.injection_noise_sigma =
            pick(f, where, "injection_noise_sigma", fl.injection_noise_sigma);
        fl.seed = pick(f, where, "seed", fl.seed);
        fl.samples = pick(f, where, "samples", fl.samples);
    }

    config.lse_windows = pick(doc, "config", "lse_windows", config.lse_windows);
    for (long w : config.lse_windows)
        if (w < 2) throw ConfigError("lse_windows entries must be at least 2");

    if (doc.contains("mlp")) {
        const json& m = object_at(doc, "mlp");
        const std::string where = "mlp";
        require_keys(m, where,
                     {"enabled", "hidden_sizes", "epochs", "batch_size", "learning_rate",
                      "seed", "train_begin", "train_end", "test_begin", "test_end"});
        MlpStageConfig& mlp = config.mlp;
        mlp.enabled = pick(m, where, "enabled", mlp.enabled);
        mlp.train.hidden_sizes = pick(m, where, "hidden_sizes", mlp.train.hidden_sizes);
        mlp.train.epochs = pick(m, where, "epochs", mlp.train.epochs);
        mlp.train.batch_size = pick(m, where, "batch_size", mlp.train.batch_size);
        mlp.train.learning_rate = pick(m, where, "learning_rate", mlp.train.learning_rate);
        mlp.train.seed = pick(m, where, "seed", mlp.train.seed);
        mlp.train_begin = pick(m, where, "train_begin", mlp.train_begin);
        mlp.train_end = pick(m, where, "train_end", mlp.train_end);
        mlp.test_begin = pick(m, where, "test_begin", mlp.test_begin);
        mlp.test_end = pick(m, where, "test_end", mlp.test_end);
        if (mlp.enabled) {
            if (mlp.train_begin < 1 || mlp.train_end < mlp.train_begin)
                throw ConfigError("mlp needs 1 <= train_begin <= train_end");
            if (mlp.test_begin > 0 && mlp.test_end < mlp.test_begin)
                throw ConfigError("mlp needs test_begin <= test_end");
        }
    }

    if (doc.contains("analytics")) {
        const json& a = object_at(doc, "analytics");
        require_keys(a, "analytics", {"num_factors"});
        if (a.contains("num_factors")) {
            const json& v = a.at("num_factors");
            if (v.is_string() && v.get<std::string>() == "auto") {
                config.analytics.num_factors = -1;
            } else if (v.is_number_integer() && v.get<int>() >= 0) {
                config.analytics.num_factors = v.get<int>();
            } else {
                throw ConfigError("analytics.num_factors must be \"auto\" or a count");
            }
        }
    }

    if (doc.contains("outliers")) {
        const json& o = object_at(doc, "outliers");
        require_keys(o, "outliers", {"threshold"});
        config.outliers.threshold = pick(o, "outliers", "threshold", config.outliers.threshold);
        if (config.outliers.threshold <= 0)
            throw ConfigError("outliers.threshold must be positive");
    }

    if (doc.contains("corruption")) config.corruption = parse_edit(object_at(doc, "corruption"));
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(read_text_file(path));
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
    json doc;
    doc["case"] = config.case_path;
    doc["output_dir"] = config.output_dir;
    doc["emit_heatmaps"] = config.emit_heatmaps;
    doc["fluctuation"] = {{"relative_sigma", config.fluctuation.relative_sigma},
                          {"artificial_noise_sigma", config.fluctuation.artificial_noise_sigma},
                          {"injection_noise_sigma", config.fluctuation.injection_noise_sigma},
                          {"seed", config.fluctuation.seed},
                          {"samples", config.fluctuation.samples}};
    doc["lse_windows"] = config.lse_windows;
    doc["mlp"] = {{"enabled", config.mlp.enabled},
                  {"hidden_sizes", config.mlp.train.hidden_sizes},
                  {"epochs", config.mlp.train.epochs},
                  {"batch_size", config.mlp.train.batch_size},
                  {"learning_rate", config.mlp.train.learning_rate},
                  {"seed", config.mlp.train.seed},
                  {"train_begin", config.mlp.train_begin},
                  {"train_end", config.mlp.train_end},
                  {"test_begin", config.mlp.test_begin},
                  {"test_end", config.mlp.test_end}};
    if (config.analytics.num_factors < 0)
        doc["analytics"] = {{"num_factors", "auto"}};
    else
        doc["analytics"] = {{"num_factors", config.analytics.num_factors}};
    doc["outliers"] = {{"threshold", config.outliers.threshold}};
    if (config.corruption) {
        json edit = {{"op", edit_op_name(config.corruption->kind)},
                     {"from", config.corruption->from_bus},
                     {"to", config.corruption->to_bus}};
        if (config.corruption->kind == BranchEditKind::SetParameter) {
            edit["parameter"] = config.corruption->parameter;
            edit["value"] = config.corruption->value;
        }
        doc["corruption"] = edit;
    }
    return doc.dump(1) + "\n";
}

std::map<std::string, std::string> run_twin(const ExperimentConfig& config) {
    ArtifactSink sink(config.output_dir);
    const json resolved = json::parse(experiment_config_to_json(config));
    std::string stage = "load-case";

    auto write_manifest = [&](json manifest) {
        manifest["config"] = resolved;
        manifest["artifacts"] = sink.hashes();
        write_text_file(sink.dir() + "/manifest.json", manifest.dump(1) + "\n");
    };

    try {
        const Network net_true = load_case(config.case_path);
        const Network net_desc =
            config.corruption ? apply_branch_edit(net_true, *config.corruption) : net_true;

        stage = "simulate";
        const TelemetrySeries series = simulate_series(net_true, config.fluctuation);
        const StateIndexMap& map = series.index_map;
        sink.write("states.csv", series_to_csv(series.x_series, map, Axis::State));
        sink.write("injections.csv", series_to_csv(series.y_series, map, Axis::Injection));

        stage = "benchmark";
        const JacobianBenchmark bench = benchmark_jacobian(net_desc, series);
        sink.write("benchmark_mean.csv", matrix_to_csv(bench.j_mean));
        sink.write("benchmark_std.csv", matrix_to_csv(bench.j_std));
        if (config.emit_heatmaps) sink.write("benchmark_mean.pgm", matrix_to_pgm(bench.j_mean));
        std::optional<JacobianBenchmark> bench_true;
        if (config.corruption) bench_true = benchmark_jacobian(net_true, series);

        stage = "estimate";
        json summary;
        summary["case"] = config.case_path;
        summary["dimension"] = map.dimension();
        summary["samples"] = config.fluctuation.samples;
        json window_rows = json::array();
        std::optional<BiasReport> last_bias, last_corrected;
        for (long w : config.lse_windows) {
            const std::string tag = std::to_string(w);
            JacobianMatrix aligned = to_vscaled(
                lse_jacobian(form_deltas(series, 0, w), map), window_v_means(series, 0, w));
            sink.write("lse_window_" + tag + ".csv", matrix_to_csv(aligned.values));

            BiasReport rep = bias_report(aligned, bench, config.outliers);
            sink.write("bias_window_" + tag + ".csv", matrix_to_csv(rep.bias));
            sink.write("bias_window_" + tag + ".json", bias_to_json(rep));
            if (config.emit_heatmaps)
                sink.write("bias_window_" + tag + ".pgm", matrix_to_pgm(rep.bias));
            json row = {{"window", w},
                        {"frobenius_rel", rep.frobenius_rel},
                        {"max_abs", rep.max_abs}};

            if (bench_true) {
                BiasReport fixed = bias_report(aligned, *bench_true, config.outliers);
                sink.write("bias_corrected_" + tag + ".csv", matrix_to_csv(fixed.bias));
                sink.write("bias_corrected_" + tag + ".json", bias_to_json(fixed));
                if (config.emit_heatmaps)
                    sink.write("bias_corrected_" + tag + ".pgm", matrix_to_pgm(fixed.bias));
                row["corrected_frobenius_rel"] = fixed.frobenius_rel;
                row["corrected_max_abs"] = fixed.max_abs;
                last_corrected = std::move(fixed);
            }
            window_rows.push_back(row);
            last_bias = std::move(rep);
        }
        if (!window_rows.empty()) {
            sink.write("monotonicity.json", json{{"points", window_rows}}.dump(1) + "\n");
            summary["windows"] = window_rows;
        }
        if (last_bias && !last_bias->outliers.empty()) {
            const Outlier& top = last_bias->outliers.front();
            summary["top_outlier"] = {{"label", top.label},
                                      {"value", top.value},
                                      {"zscore", top.zscore}};
        }

        stage = "neural";
        if (config.mlp.enabled) {
            const long t_total = config.fluctuation.samples;
            if (config.mlp.train_end > t_total)
                throw ConfigError("mlp train range ends past the simulated samples");
            if (config.mlp.test_begin > 0 && config.mlp.test_end > t_total)
                throw ConfigError("mlp test range ends past the simulated samples");
            const long train_begin = config.mlp.train_begin - 1;  // to 0-based half-open
            const long train_len = config.mlp.train_end - train_begin;

            const TrainResult trained =
                train_mlp(series, train_begin, config.mlp.train_end, config.mlp.train);
            sink.write("mlp_model.json", model_to_json(trained.model));
            Eigen::MatrixXd loss(static_cast<Eigen::Index>(trained.loss_history.size()), 2);
            for (Eigen::Index e = 0; e < loss.rows(); ++e) {
                loss(e, 0) = static_cast<double>(e + 1);
                loss(e, 1) = trained.loss_history[static_cast<std::size_t>(e)];
            }
            sink.write("mlp_loss.csv", matrix_to_csv(loss));
            json mlp_summary;
            mlp_summary["final_loss"] = trained.loss_history.back();

            if (config.mlp.test_begin > 0) {
                const long n_test = config.mlp.test_end - config.mlp.test_begin + 1;
                const Eigen::MatrixXd x_test =
                    series.x_series.middleCols(config.mlp.test_begin - 1, n_test);
                const Eigen::MatrixXd y_test =
                    series.y_series.middleCols(config.mlp.test_begin - 1, n_test);
                const Eigen::MatrixXd pred = predict_batch(trained.model, x_test);
                sink.write("mlp_predictions.csv", series_to_csv(pred, map, Axis::Injection));
                json rmse;
                for (int k = 1; k <= map.dimension(); ++k) {
                    const double denom = y_test.row(k - 1).norm();
                    const double err = (pred.row(k - 1) - y_test.row(k - 1)).norm();
                    rmse[to_string(index_to_label(map, k, Axis::Injection))] =
                        denom > 0 ? err / denom : err;
                }
                mlp_summary["test_rmse"] = rmse;
            }

            const Eigen::VectorXd x_mean =
                series.x_series.middleCols(train_begin, train_len).rowwise().mean();
            const JacobianMatrix mlp_aligned =
                to_vscaled(chain_rule_jacobian(trained.model, x_mean, map),
                           window_v_means(series, train_begin, train_len));
            sink.write("mlp_jacobian.csv", matrix_to_csv(mlp_aligned.values));
            const BiasReport mlp_rep = bias_report(mlp_aligned, bench, config.outliers);
            sink.write("mlp_bias.json", bias_to_json(mlp_rep));
            if (config.emit_heatmaps) sink.write("mlp_bias.pgm", matrix_to_pgm(mlp_rep.bias));
            mlp_summary["frobenius_rel"] = mlp_rep.frobenius_rel;
            if (last_bias) {
                mlp_summary["lse_frobenius_rel"] = last_bias->frobenius_rel;
                mlp_summary["frobenius_ratio"] =
                    mlp_rep.frobenius_rel / last_bias->frobenius_rel;
            }
            summary["mlp"] = mlp_summary;
        }

        stage = "analytics";
        if (last_bias) {
            const int p = map.dimension();
            const auto resolve_factors = [&](const Eigen::MatrixXd& null_side) {
                if (config.analytics.num_factors >= 0) return config.analytics.num_factors;
                return std::min(suggest_num_factors(null_side), p - 1);
            };
            if (last_corrected) {
                const int k = resolve_factors(last_corrected->bias);
                const BiasSpectraComparison cmp =
                    compare_bias_spectra(last_bias->bias, last_corrected->bias, k);
                sink.write("spectrum_corrupted.json", spectrum_to_json(cmp.a));
                sink.write("spectrum_corrupted.csv", matrix_to_csv(cmp.a.eigenvalues));
                sink.write("spectrum_corrected.json", spectrum_to_json(cmp.b));
                sink.write("spectrum_corrected.csv", matrix_to_csv(cmp.b.eigenvalues));
                summary["spectra"] = {{"num_factors", cmp.num_factors},
                                      {"corrupted", spectrum_summary(cmp.a)},
                                      {"corrected", spectrum_summary(cmp.b)},
                                      {"separated",
                                       cmp.a.spikes.size() > cmp.b.spikes.size()}};
            } else {
                const int k = resolve_factors(last_bias->bias);
                const SpectrumReport rep = bias_spectrum(last_bias->bias, k);
                sink.write("spectrum_bias.json", spectrum_to_json(rep));
                sink.write("spectrum_bias.csv", matrix_to_csv(rep.eigenvalues));
                summary["spectra"] = {{"num_factors", k}, {"bias", spectrum_summary(rep)}};
            }
        }

        stage = "finalize";
        sink.write("compare_summary.json", summary.dump(1) + "\n");
        write_manifest({{"status", "ok"}});
        return sink.hashes();
    } catch (const std::exception& err) {
        try {
            write_manifest({{"status", "failed"}, {"stage", stage}, {"error", err.what()}});
        } catch (...) {
            // the original error matters more than a manifest write failure
        }
        throw;
    }
}

}  // namespace gridtwin
