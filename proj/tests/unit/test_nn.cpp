#include "doctest.h"

#include <random>

#include "earlydet/error.hpp"
#include "earlydet/nn.hpp"

using namespace earlydet;

namespace {

NetworkParams zero_params(const NetworkLayout& layout) {
  NetworkParams p = init_params(layout, 1, 0.0);
  for (auto& l : p.layers) {
    l.weights.setZero();
    l.biases.setZero();
  }
  return p;
}

Vector random_input(Rng& rng, int dim = kFeatureDim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x[i] = n(rng);
  return x;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("dnn1 parameter shapes") {
    const auto p = init_params(NetworkLayout::dnn1(), 7, 0.5);
    REQUIRE(p.layers.size() == 4);
    const int rows[] = {512, 256, 512, 2};
    const int cols[] = {320, 512, 256, 512};
    for (int i = 0; i < 4; ++i) {
      CHECK(p.layers[i].weights.rows() == rows[i]);
      CHECK(p.layers[i].weights.cols() == cols[i]);
      CHECK(p.layers[i].biases.size() == rows[i]);
      CHECK(p.layers[i].biases.isZero(0.0));
    }
  }

  TEST_CASE("dnn2 output layer has C+2 units") {
    const auto p = init_params(NetworkLayout::dnn2(5), 7, 0.2);
    CHECK(p.layers.back().weights.rows() == 7);
    CHECK(p.layers.back().weights.cols() == 512);
  }

  TEST_CASE("initialization is deterministic per seed and scaled by fan-in") {
    const auto a = init_params(NetworkLayout::dnn1(), 7, 0.5);
    const auto b = init_params(NetworkLayout::dnn1(), 7, 0.5);
    const auto c = init_params(NetworkLayout::dnn1(), 8, 0.5);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      CHECK(a.layers[i].weights == b.layers[i].weights);
    }
    CHECK(a.layers[0].weights != c.layers[0].weights);
    const Matrix& w = a.layers[0].weights;
    const double var = w.array().square().mean();
    CHECK(var == doctest::Approx(2.0 / 320.0).epsilon(0.05));
  }

  TEST_CASE("invalid layouts are configuration errors") {
    CHECK_THROWS_AS(init_params(NetworkLayout::dnn2(0), 1, 0.0), ConfigError);
    NetworkLayout bad = NetworkLayout::dnn1();
    bad.hidden = {512, 0};
    CHECK_THROWS_AS(init_params(bad, 1, 0.0), ConfigError);
  }

  TEST_CASE("zero parameters give uniform outputs") {
    Rng rng(3);
    const Vector x = random_input(rng);
    const auto o1 = forward_dnn1(x, zero_params(NetworkLayout::dnn1()), Mode::kEval);
    CHECK(o1.posterior[0] == 0.5);
    CHECK(o1.posterior[1] == 0.5);
    const auto o2 = forward_dnn2(x, zero_params(NetworkLayout::dnn2(4)), Mode::kEval);
    for (int c = 0; c < 4; ++c) CHECK(o2.class_posterior[c] == 0.25);
    CHECK(o2.distances[0] == 0.5);
    CHECK(o2.distances[1] == 0.5);
  }

  TEST_CASE("eval forward passes are pure") {
    Rng rng(4);
    const auto p = init_params(NetworkLayout::dnn2(3), 11, 0.2);
    const Vector x = random_input(rng);
    const auto a = forward_dnn2(x, p, Mode::kEval);
    const auto b = forward_dnn2(x, p, Mode::kEval);
    CHECK(a.class_posterior == b.class_posterior);
    CHECK(a.distances == b.distances);
  }

  TEST_CASE("softmax sums to one and sigmoid stays inside (0,1) over random draws") {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    const NetworkLayout small{NetworkKind::kMultitask, 16, {12, 8}, 3};
    for (int draw = 0; draw < 1000; ++draw) {
      const auto p1 = init_params(NetworkLayout{NetworkKind::kForeBackground, 16, {12, 8}, 0},
                                  1000 + draw, 0.0);
      const auto p2 = init_params(small, 5000 + draw, 0.0);
      Vector x(16);
      for (int i = 0; i < 16; ++i) x[i] = 3.0 * n(rng);
      const auto o1 = forward_dnn1(x, p1, Mode::kEval);
      CHECK(std::abs(o1.posterior.sum() - 1.0) <= 1e-9);
      CHECK((o1.posterior.array() > 0.0).all());
      const auto o2 = forward_dnn2(x, p2, Mode::kEval);
      CHECK(std::abs(o2.class_posterior.sum() - 1.0) <= 1e-9);
      CHECK(o2.distances[0] > 0.0);
      CHECK(o2.distances[0] < 1.0);
      CHECK(o2.distances[1] > 0.0);
      CHECK(o2.distances[1] < 1.0);
    }
  }

  TEST_CASE("C=12 layout yields 12 posteriors and 2 distances") {
    Rng rng(6);
    const auto p = init_params(NetworkLayout::dnn2(12), 1, 0.2);
    const auto o = forward_dnn2(random_input(rng), p, Mode::kEval);
    CHECK(o.class_posterior.size() == 12);
    CHECK(o.distances.size() == 2);
  }

  TEST_CASE("non-finite input is an input error") {
    const auto p = init_params(NetworkLayout::dnn1(), 1, 0.5);
    Vector x = Vector::Zero(kFeatureDim);
    x[10] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward_dnn1(x, p, Mode::kEval), InputError);
    x[10] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(forward_dnn2(x, init_params(NetworkLayout::dnn2(2), 1, 0.2), Mode::kEval),
                    InputError);
  }

  TEST_CASE("inverted dropout zeroes units and rescales survivors") {
    NetworkParams p = init_params(NetworkLayout{NetworkKind::kForeBackground, 4, {2000}, 0},
                                  3, 0.5);
    Rng rng(9);
    const Matrix x = Matrix::Ones(4, 1);
    const auto train = forward(p, x, Mode::kTrain, &rng);
    const auto eval = forward(p, x, Mode::kEval);
    REQUIRE(train.masks.size() == 1);
    const Matrix& mask = train.masks[0];
    int dropped = 0;
    for (int i = 0; i < mask.rows(); ++i) {
      if (mask(i, 0) == 0.0) {
        ++dropped;
      } else {
        CHECK(mask(i, 0) == 2.0);
      }
    }
    CHECK(dropped > 900);
    CHECK(dropped < 1100);
    // Hidden activations in training equal eval activations times the mask.
    const Matrix expected = eval.activations[1].cwiseProduct(mask);
    CHECK((train.activations[1] - expected).cwiseAbs().maxCoeff() == 0.0);
    // Input is never dropped.
    CHECK(train.activations[0] == x);
  }

  TEST_CASE("adam: zero gradients leave parameters unchanged") {
    auto p = init_params(NetworkLayout{NetworkKind::kForeBackground, 3, {4}, 0}, 2, 0.0);
    const auto before = p.layers;
    auto state = AdamState::for_params(p);
    adam_step(p, zeros_like(p.layers), state);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      CHECK(p.layers[i].weights == before[i].weights);
      CHECK(p.layers[i].biases == before[i].biases);
    }
    CHECK(state.step == 1);
  }

  TEST_CASE("adam: first step with unit gradient moves by the learning rate") {
    NetworkParams p;
    p.layers = {LayerParams{Matrix::Constant(1, 1, 0.5), Vector::Zero(1)}};
    LayerSet grads = {LayerParams{Matrix::Constant(1, 1, 1.0), Vector::Zero(1)}};
    auto state = AdamState::for_params(p);
    AdamConfig config;
    CHECK(config.learning_rate == 1e-4);
    adam_step(p, grads, state, config);
    CHECK(std::abs((0.5 - p.layers[0].weights(0, 0)) - 1e-4) <= 1e-10);
  }

  TEST_CASE("adam: shape mismatch is a configuration error") {
    auto p = init_params(NetworkLayout{NetworkKind::kForeBackground, 3, {4}, 0}, 2, 0.0);
    auto state = AdamState::for_params(p);
    LayerSet grads = zeros_like(p.layers);
    grads[0].weights = Matrix::Zero(5, 3);
    CHECK_THROWS_AS(adam_step(p, grads, state), ConfigError);
  }
}
