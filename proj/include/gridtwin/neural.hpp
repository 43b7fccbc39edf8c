#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridtwin/powerflow.hpp"
#include "gridtwin/telemetry.hpp"

namespace gridtwin {

// Fully connected tanh network with identity output, trained with mini-batch
// gradient descent on z-scored inputs and targets. Feature scaling is part of
// the model so prediction and differentiation work in physical units.
struct MlpConfig {
    std::vector<int> hidden_sizes = {50, 50, 50};
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-2;
    std::uint64_t seed = 7;
};

struct FeatureScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // floored away from zero for constant features
};

struct MlpModel {
    std::vector<int> layer_sizes;          // input, hidden..., output
    std::vector<Eigen::MatrixXd> weights;  // weights[l] maps layer l to l+1
    std::vector<Eigen::VectorXd> biases;
    FeatureScaler input_scale;
    FeatureScaler output_scale;
    std::uint64_t seed = 0;
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;  // scaled-space training MSE after each epoch
};

// Scaled-uniform fan-in initialization; scalers start as identity.
MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

// Columns of x and y are samples. Scalers are fitted on these columns before
// training. Throws DivergenceError when the loss stops being finite or runs
// away.
TrainResult train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const MlpConfig& config);

// Trains on the half-open column window [begin, end) of a telemetry series,
// mapping states to injections.
TrainResult train_mlp(const TelemetrySeries& series, long begin, long end,
                      const MlpConfig& config);

Eigen::VectorXd predict(const MlpModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd predict_batch(const MlpModel& model, const Eigen::MatrixXd& x);

// Mean squared error in the model's scaled space; the training objective.
double scaled_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
void scaled_loss_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y, std::vector<Eigen::MatrixXd>& grad_w,
                           std::vector<Eigen::VectorXd>& grad_b);

// Exact network Jacobian dy/dx at one input, by the chain rule through the
// tanh layers, mapped back to physical units. Plain convention; apply
// to_vscaled before comparing with analytic Jacobians.
Eigen::MatrixXd chain_rule_matrix(const MlpModel& model, const Eigen::VectorXd& x);
JacobianMatrix chain_rule_jacobian(const MlpModel& model, const Eigen::VectorXd& x,
                                   const StateIndexMap& map);

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

}  // namespace gridtwin
