#include "gridtwin/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gridtwin/errors.hpp"
#include "json.hpp"

namespace gridtwin {

namespace {

constexpr double kStdFloor = 1e-12;
constexpr double kLossCeiling = 1e12;

FeatureScaler fit_scaler(const Eigen::MatrixXd& data) {
    FeatureScaler s;
    s.mean = data.rowwise().mean();
    s.std = ((data.colwise() - s.mean).array().square().rowwise().mean())
                .sqrt()
                .max(kStdFloor)
                .matrix();
    return s;
}

Eigen::MatrixXd apply_scaler(const FeatureScaler& s, const Eigen::MatrixXd& data) {
    return (data.colwise() - s.mean).array().colwise() / s.std.array();
}

Eigen::MatrixXd unapply_scaler(const FeatureScaler& s, const Eigen::MatrixXd& data) {
    return (data.array().colwise() * s.std.array()).matrix().colwise() + s.mean;
}

// Forward pass in scaled space; activations[0] is the input, the last entry
// is the identity-output layer.
std::vector<Eigen::MatrixXd> forward(const MlpModel& model, const Eigen::MatrixXd& x_scaled) {
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(model.weights.size() + 1);
    activations.push_back(x_scaled);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        Eigen::MatrixXd z =
            (model.weights[l] * activations.back()).colwise() + model.biases[l];
        if (l + 1 < model.weights.size()) z = z.array().tanh();
        activations.push_back(std::move(z));
    }
    return activations;
}

// MSE over all entries of the batch, and its parameter gradients.
double backward(const MlpModel& model, const std::vector<Eigen::MatrixXd>& activations,
                const Eigen::MatrixXd& y_scaled, std::vector<Eigen::MatrixXd>& grad_w,
                std::vector<Eigen::VectorXd>& grad_b) {
    const std::size_t layers = model.weights.size();
    const double count = static_cast<double>(y_scaled.size());
    const Eigen::MatrixXd err = activations.back() - y_scaled;
    const double loss = err.squaredNorm() / count;

    grad_w.resize(layers);
    grad_b.resize(layers);
    Eigen::MatrixXd delta = 2.0 * err / count;
    for (std::size_t l = layers; l-- > 0;) {
        grad_w[l] = delta * activations[l].transpose();
        grad_b[l] = delta.rowwise().sum();
        if (l > 0)
            delta = (model.weights[l].transpose() * delta).array() *
                    (1.0 - activations[l].array().square());
    }
    return loss;
}

void check_shapes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.cols() != y.cols())
        throw DimensionError("x has " + std::to_string(x.cols()) + " samples, y has " +
                             std::to_string(y.cols()));
    if (x.cols() < 2) throw DimensionError("training needs at least 2 samples");
}

}  // namespace

MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ConfigError("need at least input and output layers");
    for (int size : layer_sizes)
        if (size < 1) throw ConfigError("layer sizes must be positive");

    MlpModel model;
    model.layer_sizes = layer_sizes;
    model.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform(rng);
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    const auto in = static_cast<Eigen::Index>(layer_sizes.front());
    const auto out = static_cast<Eigen::Index>(layer_sizes.back());
    model.input_scale = {Eigen::VectorXd::Zero(in), Eigen::VectorXd::Ones(in)};
    model.output_scale = {Eigen::VectorXd::Zero(out), Eigen::VectorXd::Ones(out)};
    return model;
}

TrainResult train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const MlpConfig& config) {
    check_shapes(x, y);
    if (config.epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (config.batch_size < 1) throw ConfigError("batch_size must be positive");
    if (config.learning_rate <= 0) throw ConfigError("learning_rate must be positive");

    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(x.rows()));
    sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    sizes.push_back(static_cast<int>(y.rows()));

    TrainResult result;
    result.model = init_mlp(sizes, config.seed);
    MlpModel& model = result.model;
    model.input_scale = fit_scaler(x);
    model.output_scale = fit_scaler(y);

    const Eigen::MatrixXd xs = apply_scaler(model.input_scale, x);
    const Eigen::MatrixXd ys = apply_scaler(model.output_scale, y);
    const long samples = xs.cols();

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<long> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), 0L);
    std::vector<Eigen::MatrixXd> grad_w;
    std::vector<Eigen::VectorXd> grad_b;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (long at = 0; at < samples; at += config.batch_size) {
            const long width = std::min<long>(config.batch_size, samples - at);
            Eigen::MatrixXd xb(xs.rows(), width);
            Eigen::MatrixXd yb(ys.rows(), width);
            for (long k = 0; k < width; ++k) {
                xb.col(k) = xs.col(order[static_cast<std::size_t>(at + k)]);
                yb.col(k) = ys.col(order[static_cast<std::size_t>(at + k)]);
            }
            const auto activations = forward(model, xb);
            backward(model, activations, yb, grad_w, grad_b);
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                model.weights[l] -= config.learning_rate * grad_w[l];
                model.biases[l] -= config.learning_rate * grad_b[l];
            }
        }
        const auto activations = forward(model, xs);
        const double loss = (activations.back() - ys).squaredNorm() /
                            static_cast<double>(ys.size());
        if (!std::isfinite(loss) || loss > kLossCeiling) throw DivergenceError(epoch, loss);
        result.loss_history.push_back(loss);
    }
    return result;
}

TrainResult train_mlp(const TelemetrySeries& series, long begin, long end,
                      const MlpConfig& config) {
    const long t_total = series.x_series.cols();
    if (begin < 0 || end <= begin || end > t_total)
        throw DimensionError("training window [" + std::to_string(begin) + ", " +
                             std::to_string(end) + ") does not fit in " +
                             std::to_string(t_total) + " samples");
    return train_mlp(series.x_series.middleCols(begin, end - begin),
                     series.y_series.middleCols(begin, end - begin), config);
}

Eigen::MatrixXd predict_batch(const MlpModel& model, const Eigen::MatrixXd& x) {
    if (x.rows() != model.layer_sizes.front())
        throw DimensionError("input has " + std::to_string(x.rows()) + " features, model wants " +
                             std::to_string(model.layer_sizes.front()));
    const auto activations = forward(model, apply_scaler(model.input_scale, x));
    return unapply_scaler(model.output_scale, activations.back());
}

Eigen::VectorXd predict(const MlpModel& model, const Eigen::VectorXd& x) {
    return predict_batch(model, x).col(0);
}

double scaled_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const auto activations = forward(model, apply_scaler(model.input_scale, x));
    const Eigen::MatrixXd ys = apply_scaler(model.output_scale, y);
    return (activations.back() - ys).squaredNorm() / static_cast<double>(ys.size());
}

void scaled_loss_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y, std::vector<Eigen::MatrixXd>& grad_w,
                           std::vector<Eigen::VectorXd>& grad_b) {
    const auto activations = forward(model, apply_scaler(model.input_scale, x));
    backward(model, activations, apply_scaler(model.output_scale, y), grad_w, grad_b);
}

Eigen::MatrixXd chain_rule_matrix(const MlpModel& model, const Eigen::VectorXd& x) {
    const auto activations = forward(model, apply_scaler(model.input_scale, x));
    Eigen::MatrixXd jac = model.weights.front();
    for (std::size_t l = 1; l < model.weights.size(); ++l) {
        const Eigen::VectorXd gate = 1.0 - activations[l].array().square();
        jac = model.weights[l] * gate.asDiagonal() * jac;
    }
    // Undo the z-scoring: y = std_y * f(x_scaled) + mean_y, x_scaled = (x - mean_x) / std_x.
    jac = model.output_scale.std.asDiagonal() * jac;
    jac = jac * model.input_scale.std.cwiseInverse().asDiagonal();
    return jac;
}

JacobianMatrix chain_rule_jacobian(const MlpModel& model, const Eigen::VectorXd& x,
                                   const StateIndexMap& map) {
    if (model.layer_sizes.front() != map.dimension() ||
        model.layer_sizes.back() != map.dimension())
        throw DimensionError("model width does not match the index map dimension");
    JacobianMatrix jac;
    jac.values = chain_rule_matrix(model, x);
    jac.index_map = map;
    jac.provenance = Provenance::ChainRule;
    return jac;
}

std::string model_to_json(const MlpModel& model) {
    nlohmann::json doc;
    doc["activation"] = "tanh";
    doc["layer_sizes"] = model.layer_sizes;
    doc["seed"] = model.seed;
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const Eigen::MatrixXd& w = model.weights[l];
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
        weights.push_back(flat);
        biases.push_back(vec(model.biases[l]));
    }
    doc["weights"] = weights;
    doc["biases"] = biases;
    doc["input_mean"] = vec(model.input_scale.mean);
    doc["input_std"] = vec(model.input_scale.std);
    doc["output_mean"] = vec(model.output_scale.mean);
    doc["output_std"] = vec(model.output_scale.std);
    return doc.dump(1) + "\n";
}

MlpModel model_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(0, std::string("bad model json: ") + err.what());
    }
    try {
        if (doc.at("activation").get<std::string>() != "tanh")
            throw ValidationError("unsupported activation " +
                                  doc["activation"].get<std::string>());
        MlpModel model;
        model.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
        model.seed = doc.at("seed").get<std::uint64_t>();
        auto vec = [](const nlohmann::json& j) {
            const auto data = j.get<std::vector<double>>();
            return Eigen::VectorXd(
                Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size())));
        };
        const auto& weights = doc.at("weights");
        const auto& biases = doc.at("biases");
        if (weights.size() + 1 != model.layer_sizes.size() || biases.size() != weights.size())
            throw ValidationError("layer count mismatch in model json");
        for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
            const auto rows = static_cast<Eigen::Index>(model.layer_sizes[l + 1]);
            const auto cols = static_cast<Eigen::Index>(model.layer_sizes[l]);
            const auto flat = weights[l].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
                throw ValidationError("weight matrix " + std::to_string(l) + " has wrong size");
            Eigen::MatrixXd w(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j)
                    w(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
            model.weights.push_back(std::move(w));
            model.biases.push_back(vec(biases[l]));
            if (model.biases.back().size() != rows)
                throw ValidationError("bias vector " + std::to_string(l) + " has wrong size");
        }
        model.input_scale = {vec(doc.at("input_mean")), vec(doc.at("input_std"))};
        model.output_scale = {vec(doc.at("output_mean")), vec(doc.at("output_std"))};
        if (model.input_scale.mean.size() != model.layer_sizes.front() ||
            model.output_scale.mean.size() != model.layer_sizes.back())
            throw ValidationError("scaler sizes do not match the layer sizes");
        return model;
    } catch (const nlohmann::json::exception& err) {
        throw ValidationError(std::string("bad model json: ") + err.what());
    }
}

}  // namespace gridtwin
