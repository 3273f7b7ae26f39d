#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "imba_ids/optimizer.hpp"
#include "test_util.hpp"

using namespace imba_ids;

namespace {

ParamSet scalar_param(double v) {
  ParamSet p(1);
  p[0].weights = Matrix(1, 1, v);
  return p;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  MlpModel m = MlpModel::initialize(3, {5}, 2, rng);
  const MlpModel before = m;
  AdamState adam = AdamState::for_model(m, {});
  for (int i = 0; i < 10; ++i) adam.step(m, zeros_like(m.layers));
  EXPECT_EQ(m, before);
  EXPECT_EQ(adam.step_count(), 10u);
}

TEST(Adam, FirstStepMovesEachCoordinateByStepSizeAgainstTheGradient) {
  // With bias correction the first update is -zeta * g / (|g| + delta).
  Rng rng(2);
  std::vector<double> theta(50, 0.0), g(50), s(50, 0.0), r(50, 0.0);
  for (double& v : g) v = rng.normal() * std::pow(10.0, rng.uniform() * 6 - 3);
  const AdamHyperparams hp{};
  adam_update(theta, g, s, r, 1, hp);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_EQ(std::signbit(theta[k]), !std::signbit(g[k]));
    EXPECT_NEAR(std::abs(theta[k]), hp.step_size * std::abs(g[k]) / (std::abs(g[k]) + hp.delta), 1e-18);
  }
}

TEST(Adam, TwoStepScalarTrace) {
  // theta0 = 0, g = +1 then -1, zeta = 0.1, delta = 1e-8.
  AdamHyperparams hp;
  hp.step_size = 0.1;
  ParamSet theta = scalar_param(0.0);
  AdamState adam(theta, hp);
  adam.step(theta, scalar_param(1.0));
  EXPECT_NEAR(theta[0].weights(0, 0), -0.09999999900000001, 1e-12);
  adam.step(theta, scalar_param(-1.0));
  EXPECT_NEAR(theta[0].weights(0, 0), -0.09473684115789475, 1e-12);
}

TEST(Adam, AccumulatorsHoldUncorrectedMoments) {
  ParamSet theta = scalar_param(0.0);
  AdamState adam(theta, AdamHyperparams{});
  const double g = 0.5;
  for (int t = 1; t <= 5; ++t) {
    adam.step(theta, scalar_param(g));
    const double s = adam.first_moment()[0].weights(0, 0);
    const double r = adam.second_moment()[0].weights(0, 0);
    // A constant gradient makes the corrected moments exact: s / (1 - rho^t) = g.
    if (t == 1 || t == 2 || t == 5) {
      EXPECT_NEAR(s, (1 - std::pow(0.9, t)) * g, 1e-15);
      EXPECT_NEAR(r, (1 - std::pow(0.999, t)) * g * g, 1e-15);
      EXPECT_NEAR(s / (1 - std::pow(0.9, t)), g, 1e-14);
      EXPECT_NEAR(r / (1 - std::pow(0.999, t)), g * g, 1e-14);
    }
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  AdamHyperparams hp;
  hp.step_size = 0.01;
  ParamSet theta = scalar_param(1.0);
  AdamState adam(theta, hp);
  for (int i = 0; i < 500; ++i) adam.step(theta, scalar_param(2.0 * theta[0].weights(0, 0)));
  EXPECT_LT(std::abs(theta[0].weights(0, 0)), 0.1);
}

TEST(Adam, DefaultStepSizeBoundsTheMovePerStep) {
  // |update| <= zeta at every step for the default hyperparameters on a
  // steady gradient, so 500 steps move at most 0.05.
  ParamSet theta = scalar_param(1.0);
  AdamState adam(theta, AdamHyperparams{});
  double previous = 1.0;
  for (int i = 0; i < 500; ++i) {
    adam.step(theta, scalar_param(2.0 * theta[0].weights(0, 0)));
    const double now = theta[0].weights(0, 0);
    EXPECT_LE(std::abs(now - previous), 1e-4 * (1 + 1e-9));
    previous = now;
  }
  EXPECT_LT(previous, 1.0);
  EXPECT_GT(previous, 0.94);
}

TEST(Adam, ResetClearsMomentsAndStepCounter) {
  ParamSet theta = scalar_param(0.0);
  AdamState adam(theta, AdamHyperparams{});
  adam.step(theta, scalar_param(1.0));
  adam.reset();
  EXPECT_EQ(adam.step_count(), 0u);
  EXPECT_EQ(adam.first_moment()[0].weights(0, 0), 0.0);
  EXPECT_EQ(adam.second_moment()[0].weights(0, 0), 0.0);
}

TEST(Adam, RejectsUninitializedStateAndShapeMismatch) {
  AdamState blank;
  ParamSet theta = scalar_param(0.0);
  EXPECT_THROW(blank.step(theta, scalar_param(1.0)), std::logic_error);
  AdamState adam(theta, AdamHyperparams{});
  ParamSet wrong(1);
  wrong[0].weights = Matrix(2, 1);
  EXPECT_THROW(adam.step(theta, wrong), ShapeError);
  AdamHyperparams bad;
  bad.rho1 = 1.0;
  EXPECT_THROW(AdamState(theta, bad), std::invalid_argument);
}

TEST(Adam, StepBumpsModelRevision) {
  Rng rng(3);
  MlpModel m = MlpModel::initialize(2, {2}, 2, rng);
  AdamState adam = AdamState::for_model(m, {});
  const auto rev = m.revision;
  adam.step(m, zeros_like(m.layers));
  EXPECT_EQ(m.revision, rev + 1);
}

TEST(Sgd, PlainGradientStep) {
  ParamSet theta = scalar_param(1.0);
  sgd_step(theta, scalar_param(4.0), 0.25);
  EXPECT_DOUBLE_EQ(theta[0].weights(0, 0), 0.0);
  EXPECT_THROW(sgd_step(theta, scalar_param(1.0), 0.0), std::invalid_argument);
}
