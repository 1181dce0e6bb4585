// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "wts/random.hpp"
#include "wts/teacher.hpp"

namespace wts {
namespace {

TEST(Similarities, CosineExamples) {
  TeacherHead head(Matrix(2, 2, std::vector<double>{1.0, 0.0, 0.0, 2.0}));
  const auto s = similarities(head, Matrix(2, 2, std::vector<double>{0.6, 0.8, 3.0, 0.0}));
  EXPECT_NEAR(s(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(s(0, 1), 0.8, 1e-15);
  EXPECT_NEAR(s(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(s(1, 1), 0.0, 1e-15);
}

TEST(Similarities, DimensionMismatchAndZeroRows) {
  TeacherHead head(Matrix(2, 3, 1.0));
  EXPECT_THROW(similarities(head, Matrix(1, 2, 1.0)), Error);
  EXPECT_THROW(similarities(head, Matrix(1, 3, 0.0)), Error);
}

TEST(TeacherProbs, Examples) {
  const auto uniform = teacher_probs(0.3, Matrix(1, 3, 0.0));
  for (double v : uniform.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  const auto p = teacher_probs(1.0, Matrix(1, 2, std::vector<double>{1.0, 0.0}));
  EXPECT_NEAR(p(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.7311, 1e-4);
  EXPECT_NEAR(p(0, 1), 0.2689, 1e-4);

  const auto hot = teacher_probs(1e6, Matrix(1, 4, std::vector<double>{1.0, -1.0, 0.5, 0.0}));
  for (double v : hot.data()) EXPECT_NEAR(v, 0.25, 1e-6);

  EXPECT_THROW(teacher_probs(0.0, Matrix(1, 2)), Error);
}

TEST(TeacherProbs, RowsPositiveAndNormalized) {
  Rng rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix s(5, 7);
    for (double& v : s.data()) v = std::tanh(g(rng));
    const double T = std::pow(10.0, -2.0 + 4.0 * uniform01(rng));
    const auto p = teacher_probs(T, s);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double sum = 0.0;
      for (double v : p.row(i)) {
        EXPECT_GT(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-10);
    }
  }
}

TEST(TextPredictedLabels, ArgmaxAndTies) {
  EXPECT_EQ(text_predicted_labels(Matrix(1, 2, std::vector<double>{0.1, 0.9})), (Labels{1}));
  EXPECT_EQ(text_predicted_labels(Matrix(1, 2, std::vector<double>{0.5, 0.5})), (Labels{0}));
  EXPECT_EQ(text_predicted_labels(Matrix(1, 3, std::vector<double>{0.2, 0.7, 0.7})), (Labels{1}));
}

TEST(TextPredictedLabels, TemperatureInvariantOnRandomBatches) {
  Rng rng(8);
  std::normal_distribution<double> g(0.0, 0.4);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix s(8, 1 + uniform_index(rng, 12));
    for (double& v : s.data()) v = g(rng);
    const double T = std::pow(10.0, -2.0 + 4.0 * uniform01(rng));
    // Brute-force argmax oracle over the raw scores.
    Labels expect(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 0; c < s.cols(); ++c)
        if (s(i, c) > s(i, best)) best = c;
      expect[i] = best;
    }
    ASSERT_EQ(text_predicted_labels(teacher_probs(T, s)), expect) << "T=" << T;
  }
}

TEST(OverlapRatio, Examples) {
  const Labels a{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(overlap_ratio(a, a), 1.0);
  EXPECT_DOUBLE_EQ(overlap_ratio(a, Labels{0, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(overlap_ratio(a, Labels{1, 2, 0, 0}), 0.5);
  EXPECT_THROW(overlap_ratio(Labels{}, Labels{}), Error);
  EXPECT_THROW(overlap_ratio(a, Labels{1}), Error);
}

TEST(TeacherHead, TemperatureIsExpOfLog) {
  TeacherHead head(Matrix(2, 2, 1.0), std::log(0.25));
  EXPECT_NEAR(head.temperature(), 0.25, 1e-15);
  EXPECT_EQ(head.classes(), 2u);
}

}  // namespace
}  // namespace wts
