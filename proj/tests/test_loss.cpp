#include <cmath>

#include <gtest/gtest.h>

#include "imba_ids/loss.hpp"
#include "test_util.hpp"

using namespace imba_ids;

namespace {

Matrix log_probs_of(const Matrix& probs) {
  Matrix lp = probs;
  for (double& v : lp.values()) v = std::log(v);
  return lp;
}

LabelVector random_labels(Rng& rng, std::size_t n, std::size_t c) {
  LabelVector y(n);
  for (auto& v : y) v = rng.below(c);
  return y;
}

// Relative error with a 1e-3 denominator floor: at step 1e-6 the central
// difference carries ~1e-9 of rounding noise, which would swamp tiny entries.
double worst_logit_gradient_error(const LossSpec& spec, const Matrix& logits, const LabelVector& y) {
  const Matrix lp = log_softmax(logits);
  const Matrix g = loss_grad_logits(spec, softmax(logits), lp, y);
  const double h = 1e-6;
  double worst = 0.0;
  Matrix z = logits;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double saved = z.values()[k];
    z.values()[k] = saved + h;
    const double plus = loss_value(spec, log_softmax(z), y);
    z.values()[k] = saved - h;
    const double minus = loss_value(spec, log_softmax(z), y);
    z.values()[k] = saved;
    const double numeric = (plus - minus) / (2 * h);
    const double analytic = g.values()[k];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3}));
  }
  return worst;
}

}  // namespace

TEST(CrossEntropy, TwoSampleHandValue) {
  // -(ln 0.9 + ln 0.1) / 2
  const Matrix lp = log_probs_of(Matrix::from_rows({{0.9, 0.1}, {0.9, 0.1}}));
  EXPECT_NEAR(ce_loss(lp, LabelVector{0, 1}), 1.2039728043259360, 1e-12);
}

TEST(CrossEntropy, RejectsOutOfRangeLabelNamingTheRow) {
  const Matrix lp = log_probs_of(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}));
  try {
    ce_loss(lp, LabelVector{0, 1, 5});
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ce_loss(lp, LabelVector{0, 1}), ShapeError);
}

TEST(AttackSharing, UniformBenignSampleIsElevenLogTwo) {
  const Matrix lp = log_probs_of(Matrix::from_rows({{0.5, 0.5}}));
  EXPECT_NEAR(as_loss(lp, LabelVector{0}, 10.0), 11.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(as_loss(lp, LabelVector{0}, 10.0), 7.624618986159398, 1e-12);
}

TEST(AttackSharing, LambdaZeroIsExactlyCrossEntropy) {
  Rng rng(100);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(10), c = 2 + rng.below(6);
    const Matrix logits = test::random_matrix(rng, n, c, 3.0);
    const Matrix lp = log_softmax(logits);
    const LabelVector y = random_labels(rng, n, c);
    ASSERT_EQ(as_loss(lp, y, 0.0), ce_loss(lp, y));
    const LossSpec as{AttackSharing{0.0}};
    const LossSpec ce{CrossEntropy{}};
    ASSERT_EQ(loss_grad_logits(as, softmax(logits), lp, y), loss_grad_logits(ce, softmax(logits), lp, y));
  }
}

TEST(AttackSharing, NonDecreasingInLambda) {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8), c = 2 + rng.below(5);
    const Matrix lp = log_softmax(test::random_matrix(rng, n, c, 2.0));
    const LabelVector y = random_labels(rng, n, c);
    double previous = as_loss(lp, y, 0.0);
    for (double lambda : {0.5, 1.0, 2.0, 10.0, 100.0}) {
      const double v = as_loss(lp, y, lambda);
      ASSERT_GE(v, previous);
      previous = v;
    }
  }
}

TEST(AttackSharing, PenaltyIgnoresHowAttackMassIsSplit) {
  // The penalty only sees p_benign, so moving mass between attacks is free.
  const Matrix a = log_probs_of(Matrix::from_rows({{0.2, 0.7, 0.1}}));
  const Matrix b = log_probs_of(Matrix::from_rows({{0.2, 0.1, 0.7}}));
  EXPECT_NEAR(attack_sharing_penalty(a, LabelVector{1}), attack_sharing_penalty(b, LabelVector{1}), 1e-15);
  EXPECT_NEAR(attack_sharing_penalty(a, LabelVector{1}), -std::log(0.8), 1e-15);
}

TEST(AttackSharing, ClampKeepsValueAndGradientFinite) {
  // Attack sample with the benign logit 100 units above the rest.
  const Matrix logits = Matrix::from_rows({{100.0, 0.0, 0.0}});
  const Matrix lp = log_softmax(logits);
  const double v = as_loss(lp, LabelVector{1}, 10.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(attack_sharing_penalty(lp, LabelVector{1}), -std::log(kAttackMassFloor), 1e-9);
  const Matrix g = loss_grad_logits(LossSpec{AttackSharing{10.0}}, softmax(logits), lp, LabelVector{1});
  EXPECT_TRUE(g.all_finite());
  // Inside the floor only the cross-entropy gradient remains.
  const Matrix ce = loss_grad_logits(LossSpec{CrossEntropy{}}, softmax(logits), lp, LabelVector{1});
  EXPECT_EQ(g, ce);
}

TEST(AttackSharing, RejectsNegativeLambdaAndBadBenignIndex) {
  const Matrix lp = log_probs_of(Matrix::from_rows({{0.5, 0.5}}));
  EXPECT_THROW(as_loss(lp, LabelVector{0}, -1.0), std::invalid_argument);
  EXPECT_THROW(as_loss(lp, LabelVector{0}, 1.0, 2), std::out_of_range);
  LossSpec spec{AttackSharing{1.0}, 3};
  EXPECT_THROW(spec.validate(3), std::invalid_argument);
}

TEST(LossGradient, MatchesCentralDifferencesForEveryKind) {
  Rng rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(6), c = 2 + rng.below(5);
    const Matrix logits = test::random_matrix(rng, n, c, 2.0);
    const LabelVector y = random_labels(rng, n, c);
    std::vector<double> w(c);
    for (double& v : w) v = 0.1 + 3.0 * rng.uniform();
    const Label benign = rng.below(c);
    for (const LossSpec& spec : {LossSpec{CrossEntropy{}}, LossSpec{AttackSharing{1.0}, benign},
                                 LossSpec{AttackSharing{10.0}}, LossSpec{WeightedCrossEntropy{w}}}) {
      EXPECT_LT(worst_logit_gradient_error(spec, logits, y), 1e-5) << "trial " << trial << " kind " << spec.kind.index();
    }
  }
}

TEST(LossGradient, RowsSumToZero) {
  // Every term is (p - target distribution), so each gradient row sums to 0.
  Rng rng(203);
  const Matrix logits = test::random_matrix(rng, 6, 4);
  const LabelVector y = random_labels(rng, 6, 4);
  const Matrix g = loss_grad_logits(LossSpec{AttackSharing{10.0}}, softmax(logits), log_softmax(logits), y);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double s = 0.0;
    for (double v : g.row(i)) s += v;
    EXPECT_NEAR(s, 0.0, 1e-14);
  }
}

TEST(WeightedCrossEntropy, UnitWeightsEqualCrossEntropy) {
  Rng rng(204);
  const Matrix lp = log_softmax(test::random_matrix(rng, 9, 3));
  const LabelVector y = random_labels(rng, 9, 3);
  EXPECT_EQ(weighted_ce_loss(lp, y, std::vector<double>{1, 1, 1}), ce_loss(lp, y));
  EXPECT_THROW(weighted_ce_loss(lp, y, std::vector<double>{1, 1}), ShapeError);
  EXPECT_THROW(weighted_ce_loss(lp, y, std::vector<double>{1, 0, 1}), std::invalid_argument);
}

TEST(WeightedCrossEntropy, InverseFrequencyWeightsHaveMeanOne) {
  const std::vector<std::size_t> counts = {972781, 3883390, 41102, 52, 1106};
  const auto w = inverse_frequency_weights(counts);
  const std::vector<double> expected = {0.0002549486328735576, 6.386409452446761e-05, 0.006033993139880596,
                                        4.769407423757158, 0.2242397703755626};
  ASSERT_EQ(w.size(), expected.size());
  for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(w[k], expected[k], 1e-12 * std::max(1.0, expected[k]));
  double mean = 0.0;
  for (double v : w) mean += v / static_cast<double>(w.size());
  EXPECT_NEAR(mean, 1.0, 1e-12);
}
