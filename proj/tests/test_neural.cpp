#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"

#include "gridtwin/errors.hpp"
#include "gridtwin/neural.hpp"
#include "test_util.hpp"

using namespace gridtwin;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

bool same_weights(const MlpModel& a, const MlpModel& b) {
    if (a.layer_sizes != b.layer_sizes) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if ((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() != 0.0) return false;
        if ((a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

// a smooth target so a small network can actually fit it
Eigen::MatrixXd smooth_targets(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(2, x.cols());
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        y(0, t) = std::sin(x(0, t)) + 0.5 * x(1, t);
        y(1, t) = x(0, t) * x(1, t) * 0.25 - 0.1 * x(2, t);
    }
    return y;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("initialization is seeded and shaped") {
    const std::vector<int> sizes = {3, 10, 4};
    const MlpModel a = init_mlp(sizes, 5);
    const MlpModel b = init_mlp(sizes, 5);
    const MlpModel c = init_mlp(sizes, 6);

    CHECK(same_weights(a, b));
    CHECK(!same_weights(a, c));
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0].rows() == 10);
    CHECK(a.weights[0].cols() == 3);
    CHECK(a.weights[1].rows() == 4);
    CHECK(a.biases[0].cwiseAbs().maxCoeff() == 0.0);
    // fan-in bound
    CHECK(a.weights[0].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
}

TEST_CASE("zero epochs returns the initialization untouched") {
    const Eigen::MatrixXd x = gaussian(3, 40, 1);
    const Eigen::MatrixXd y = smooth_targets(x);
    MlpConfig cfg;
    cfg.hidden_sizes = {6};
    cfg.epochs = 0;
    cfg.seed = 9;

    const TrainResult res = train_mlp(x, y, cfg);
    CHECK(res.loss_history.empty());
    CHECK(same_weights(res.model, init_mlp({3, 6, 2}, 9)));

    cfg.epochs = -1;
    CHECK_THROWS_AS(train_mlp(x, y, cfg), ConfigError);
}

TEST_CASE("training is deterministic and the loss trends down") {
    const Eigen::MatrixXd x = gaussian(3, 300, 2);
    const Eigen::MatrixXd y = smooth_targets(x);
    MlpConfig cfg;
    cfg.hidden_sizes = {16, 16};
    cfg.epochs = 60;
    cfg.learning_rate = 0.05;
    cfg.seed = 4;

    const TrainResult a = train_mlp(x, y, cfg);
    const TrainResult b = train_mlp(x, y, cfg);
    CHECK(same_weights(a.model, b.model));
    CHECK(a.loss_history == b.loss_history);

    REQUIRE(a.loss_history.size() == 60);
    CHECK(a.loss_history.back() < 0.5 * a.loss_history.front());
}

TEST_CASE("a runaway learning rate raises divergence") {
    const Eigen::MatrixXd x = gaussian(3, 100, 3);
    const Eigen::MatrixXd y = smooth_targets(x);
    MlpConfig cfg;
    cfg.hidden_sizes = {8, 8};
    cfg.learning_rate = 1e3;
    try {
        train_mlp(x, y, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& err) {
        CHECK(err.epoch >= 0);
    }
}

TEST_CASE("all-zero weights predict zero") {
    MlpModel model = init_mlp({3, 5, 2}, 1);
    for (auto& w : model.weights) w.setZero();
    const Eigen::VectorXd out = predict(model, Eigen::VectorXd::Constant(3, 7.0));
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single linear layer is exactly affine") {
    MlpModel model = init_mlp({2, 2}, 1);
    model.weights[0] << 2.0, -1.0,
                        0.5, 3.0;
    model.biases[0] << 1.0, -2.0;
    Eigen::VectorXd x(2);
    x << 0.25, -0.5;

    const Eigen::VectorXd out = predict(model, x);
    const Eigen::VectorXd want = model.weights[0] * x + model.biases[0];
    CHECK((out - want).cwiseAbs().maxCoeff() == 0.0);

    // chain rule degenerates to the weight matrix
    CHECK((chain_rule_matrix(model, x) - model.weights[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict rejects wrong input sizes") {
    const MlpModel model = init_mlp({3, 4, 2}, 2);
    CHECK_THROWS_AS(predict(model, Eigen::VectorXd::Zero(5)), DimensionError);
    CHECK_THROWS_AS(train_mlp(gaussian(3, 10, 1), gaussian(2, 9, 2), MlpConfig{}), DimensionError);
}

TEST_CASE("backprop gradients match finite differences") {
    const Eigen::MatrixXd x = gaussian(3, 12, 6);
    const Eigen::MatrixXd y = gaussian(2, 12, 7);
    MlpModel model = init_mlp({3, 6, 5, 2}, 8);

    std::vector<Eigen::MatrixXd> grad_w;
    std::vector<Eigen::VectorXd> grad_b;
    scaled_loss_gradients(model, x, y, grad_w, grad_b);

    const double h = 1e-6;
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < model.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < model.weights[l].cols(); ++j) {
                MlpModel hi = model, lo = model;
                hi.weights[l](i, j) += h;
                lo.weights[l](i, j) -= h;
                const double fd = (scaled_loss(hi, x, y) - scaled_loss(lo, x, y)) / (2 * h);
                worst = std::max(worst, std::abs(fd - grad_w[l](i, j)));
                scale = std::max(scale, std::abs(fd));
            }
        for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) {
            MlpModel hi = model, lo = model;
            hi.biases[l][i] += h;
            lo.biases[l][i] -= h;
            const double fd = (scaled_loss(hi, x, y) - scaled_loss(lo, x, y)) / (2 * h);
            worst = std::max(worst, std::abs(fd - grad_b[l][i]));
            scale = std::max(scale, std::abs(fd));
        }
    }
    CHECK(worst / scale < 1e-5);
}

TEST_CASE("chain rule matches finite differences of predict") {
    // train briefly so the scalers are not identity
    const Eigen::MatrixXd x = 3.0 * gaussian(3, 60, 9);
    const Eigen::MatrixXd y = smooth_targets(x);
    MlpConfig cfg;
    cfg.hidden_sizes = {7, 7};
    cfg.epochs = 3;
    const MlpModel model = train_mlp(x, y, cfg).model;

    const Eigen::VectorXd at = x.col(4);
    const Eigen::MatrixXd jac = chain_rule_matrix(model, at);

    Eigen::MatrixXd fd(2, 3);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd hi = at, lo = at;
        hi[j] += h;
        lo[j] -= h;
        fd.col(j) = (predict(model, hi) - predict(model, lo)) / (2 * h);
    }
    CHECK((jac - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("model json round-trips bit for bit") {
    const Eigen::MatrixXd x = gaussian(3, 50, 12);
    const Eigen::MatrixXd y = smooth_targets(x);
    MlpConfig cfg;
    cfg.hidden_sizes = {5};
    cfg.epochs = 4;
    const MlpModel model = train_mlp(x, y, cfg).model;

    const std::string text = model_to_json(model);
    CHECK(model_to_json(model) == text);
    const MlpModel back = model_from_json(text);

    CHECK(same_weights(model, back));
    CHECK((back.input_scale.mean - model.input_scale.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.output_scale.std - model.output_scale.std).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd probe = x.col(1);
    CHECK((predict(back, probe) - predict(model, probe)).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(model_from_json("not json"), ParseError);
    CHECK_THROWS_AS(model_from_json("{\"layer_sizes\": [2]}"), ValidationError);
}

TEST_CASE("window training equals matrix training") {
    TelemetrySeries s;
    s.x_series = gaussian(3, 30, 20);
    s.y_series = gaussian(3, 30, 21);
    MlpConfig cfg;
    cfg.hidden_sizes = {4};
    cfg.epochs = 5;
    cfg.batch_size = 8;

    const TrainResult from_series = train_mlp(s, 5, 25, cfg);
    const TrainResult from_matrix =
        train_mlp(s.x_series.middleCols(5, 20), s.y_series.middleCols(5, 20), cfg);
    CHECK(same_weights(from_series.model, from_matrix.model));

    CHECK_THROWS_AS(train_mlp(s, 5, 31, cfg), DimensionError);
    CHECK_THROWS_AS(train_mlp(s, -1, 10, cfg), DimensionError);
}

}  // TEST_SUITE
