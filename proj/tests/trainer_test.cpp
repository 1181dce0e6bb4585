// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "wts/noise.hpp"
#include "wts/trainer.hpp"

namespace wts {
namespace {

EmbeddingDataset noisy_set(double gamma, std::uint64_t seed, std::size_t per_class = 40) {
  SyntheticSpec spec;
  spec.classes = 5;
  spec.dim = 8;
  spec.samples_per_class = per_class;
  spec.cluster_spread = 0.2;
  spec.teacher_quality = 0.6;
  spec.seed = seed;
  auto ds = generate_synthetic(spec);
  if (gamma > 0.0) ds.observed_labels = apply_noise(*ds.true_labels, build_symmetric_matrix(5, gamma), seed + 1).observed_labels;
  return ds;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.learning_rate = 0.1;
  c.seed = 99;
  return c;
}

TEST(SampleBeta, UniformCaseMean) {
  Rng rng(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_beta(1.0, 1.0, rng);
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(SampleBeta, SymmetricTwoTwoMoments) {
  Rng rng(2);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_beta(2.0, 2.0, rng);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(var, 0.05, 0.005);
}

TEST(SampleBeta, SupportIsOpenInterval) {
  Rng rng(3);
  for (double alpha : {0.05, 0.5, 2.0}) {
    for (int i = 0; i < 20000; ++i) {
      const double x = sample_beta(alpha, alpha, rng);
      ASSERT_GT(x, 0.0);
      ASSERT_LT(x, 1.0);
    }
  }
}

TEST(SampleBeta, RejectsNonPositiveParameters) {
  Rng rng(4);
  EXPECT_THROW(sample_beta(0.0, 1.0, rng), Error);
  EXPECT_THROW(sample_beta(1.0, -2.0, rng), Error);
}

TEST(Sgd, VanillaStep) {
  std::vector<double> p{1.0, -2.0}, v{0.0, 0.0};
  const std::vector<double> g{0.5, 1.0};
  sgd_step(p, v, g, SgdSettings{0.1, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], -2.1);
}

TEST(Sgd, ZeroGradientDecaysVelocity) {
  std::vector<double> p{0.0}, v{1.0};
  const std::vector<double> g{0.0};
  sgd_step(p, v, g, SgdSettings{0.1, 0.9, 0.0});
  EXPECT_DOUBLE_EQ(v[0], 0.9);
  EXPECT_DOUBLE_EQ(p[0], -0.09);
}

TEST(Sgd, TwoStepUnrollWithWeightDecay) {
  std::vector<double> p{1.0}, v{0.0};
  const SgdSettings s{0.1, 0.9, 0.01};
  sgd_step(p, v, std::vector<double>{0.5}, s);
  EXPECT_NEAR(p[0], 0.949, 1e-12);
  sgd_step(p, v, std::vector<double>{-0.25}, s);
  EXPECT_NEAR(p[0], 0.927151, 1e-12);
}

TEST(Sgd, RejectsNonFiniteGradient) {
  std::vector<double> p{1.0}, v{0.0};
  EXPECT_THROW(sgd_step(p, v, std::vector<double>{NAN}, SgdSettings{0.1, 0.9, 0.0}), Error);
}

TEST(Train, DisabledSwitchMatchesUnreachableThreshold) {
  const auto ds = noisy_set(0.6, 5);
  auto off = small_config();
  off.wts_enabled = false;
  auto never = small_config();
  never.tau = -1.0;
  const auto a = train(ds, off), b = train(ds, never);
  EXPECT_EQ(a.probe.weights, b.probe.weights);
  EXPECT_EQ(a.probe.bias, b.probe.bias);
  EXPECT_EQ(a.log_temperature, b.log_temperature);
  for (const auto& r : a.batches) EXPECT_FALSE(r.fired);
}

TEST(Train, ThresholdAboveOneFiresWithBetaCoefficients) {
  const auto ds = noisy_set(0.0, 6);
  auto cfg = small_config();
  cfg.tau = 1.01;
  cfg.batch_size = 2;
  cfg.epochs = 10;
  cfg.learning_rate = 0.01;
  const auto r = train(ds, cfg);
  ASSERT_EQ(r.batches.size(), 1000u);
  std::vector<double> as;
  for (const auto& b : r.batches) {
    ASSERT_TRUE(b.fired);
    ASSERT_GT(b.a, 0.0);
    ASSERT_LT(b.a, 1.0);
    as.push_back(b.a);
  }
  // Kolmogorov-Smirnov distance against the Beta(2, 2) CDF 3x^2 - 2x^3.
  std::sort(as.begin(), as.end());
  double ks = 0.0;
  const double n = static_cast<double>(as.size());
  for (std::size_t i = 0; i < as.size(); ++i) {
    const double F = 3 * as[i] * as[i] - 2 * as[i] * as[i] * as[i];
    ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  EXPECT_LT(ks, 0.05);
}

TEST(Train, PerfectTeacherOnCleanLabelsNeverFires) {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.dim = 6;
  spec.samples_per_class = 30;
  spec.cluster_spread = 1e-6;
  spec.seed = 12;
  const auto r = train(generate_synthetic(spec), small_config());
  for (const auto& b : r.batches) {
    EXPECT_DOUBLE_EQ(b.overlap_ratio, 1.0);
    EXPECT_FALSE(b.fired);
  }
}

TEST(Train, SwitchFiresExactlyBelowThreshold) {
  const auto ds = noisy_set(0.5, 7);
  auto cfg = small_config();
  cfg.batch_size = 8;
  const auto r = train(ds, cfg);
  std::size_t fired = 0;
  for (const auto& b : r.batches) {
    EXPECT_EQ(b.fired, b.overlap_ratio < cfg.tau);
    fired += b.fired;
    if (!b.fired) {
      EXPECT_EQ(b.a, 1.0);
      EXPECT_EQ(b.loss, b.loss_observed);
      EXPECT_EQ(b.loss_teacher, 0.0);
    } else {
      EXPECT_NEAR(b.loss, b.a * b.loss_observed + (1 - b.a) * b.loss_teacher, 1e-10);
    }
  }
  EXPECT_GT(fired, 0u);
  EXPECT_LT(fired, r.batches.size());
}

TEST(Train, FirstStepLossIsRecomputable) {
  // The probe starts at zero, so the first CE loss is log C for any batch.
  const auto ds = noisy_set(0.3, 8);
  auto cfg = small_config();
  cfg.wts_enabled = false;
  const auto r = train(ds, cfg);
  EXPECT_NEAR(r.batches.front().loss, std::log(5.0), 1e-10);

  cfg.base_loss = BaseLoss::LA;
  const auto la = train(ds, cfg);
  // Zero logits adjusted by log prior give per-sample loss -log pi_y.
  const auto prior = ClassPrior::from_labels(ds.observed_labels, 5);
  const double worst = -std::log(*std::min_element(prior.pi.begin(), prior.pi.end()));
  const double best = -std::log(*std::max_element(prior.pi.begin(), prior.pi.end()));
  EXPECT_GE(la.batches.front().loss, best - 1e-12);
  EXPECT_LE(la.batches.front().loss, worst + 1e-12);
}

TEST(Train, EveryEpochCoversTheDataOnce) {
  const auto ds = noisy_set(0.2, 9, 21);
  auto cfg = small_config();
  cfg.batch_size = 10;
  const auto r = train(ds, cfg);
  std::vector<std::size_t> seen(cfg.epochs, 0);
  for (const auto& b : r.batches) seen[b.epoch] += b.size;
  for (std::size_t s : seen) EXPECT_EQ(s, ds.size());
  EXPECT_EQ(r.batches.size(), cfg.epochs * 11);
  EXPECT_EQ(r.batches.back().size, 5u);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto ds = noisy_set(0.6, 10);
  const auto a = train(ds, small_config()), b = train(ds, small_config());
  EXPECT_EQ(serialize_checkpoint(a.probe, a.log_temperature), serialize_checkpoint(b.probe, b.log_temperature));
  auto other = small_config();
  other.seed = 100;
  const auto c = train(ds, other);
  EXPECT_NE(serialize_checkpoint(a.probe, a.log_temperature), serialize_checkpoint(c.probe, c.log_temperature));
}

TEST(Train, LeavesPrototypesAlone) {
  const auto ds = noisy_set(0.6, 11);
  const Matrix before = ds.text_embeddings;
  auto cfg = small_config();
  cfg.tau = 2.0;
  const auto r = train(ds, cfg);
  EXPECT_EQ(ds.text_embeddings, before);
  EXPECT_NE(r.log_temperature, std::log(cfg.initial_temperature));
}

TEST(Train, ReportsEpochMetricsWithTestSet) {
  const auto ds = noisy_set(0.2, 12);
  const auto test = noisy_set(0.0, 13);
  std::size_t calls = 0;
  const auto r = train(ds, small_config(), &test, [&](const EpochMetrics& m) {
    ++calls;
    EXPECT_EQ(m.epoch, calls);
    ASSERT_TRUE(m.test.has_value());
    EXPECT_GE(m.test->overall, 0.0);
  });
  EXPECT_EQ(calls, 3u);
  const auto j = to_json(r, small_config());
  EXPECT_EQ(j["epochs"].size(), 3u);
  EXPECT_TRUE(j.contains("final_test"));
  EXPECT_EQ(j["config"]["seed"], 99);
}

TEST(Train, RejectsInvalidConfig) {
  const auto ds = noisy_set(0.0, 14);
  auto cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(ds, cfg), Error);
  cfg = small_config();
  cfg.momentum = 1.0;
  EXPECT_THROW(train(ds, cfg), Error);
}

TEST(Checkpoint, RoundTripsAtFloatPrecision) {
  StudentProbe p(3, 2);
  p.weights = Matrix(3, 2, std::vector<double>{0.5, -1.25, 2.0, 0.0, 3.5, -0.75});
  p.bias = {0.25, -0.5, 1.0};
  const std::string bytes = serialize_checkpoint(p, -2.5);
  EXPECT_EQ(bytes.size(), 8u + 8u + 4u * (6 + 3 + 1));
  const auto ck = parse_checkpoint(bytes);
  EXPECT_EQ(ck.probe.weights, p.weights);
  EXPECT_EQ(ck.probe.bias, p.bias);
  EXPECT_EQ(ck.log_temperature, -2.5);
  EXPECT_EQ(serialize_checkpoint(ck.probe, ck.log_temperature), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  StudentProbe p(2, 2);
  std::string bytes = serialize_checkpoint(p, 0.0);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  bytes[0] = 'X';
  try {
    parse_checkpoint(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
}

TEST(TrainConfigParse, ReadsKeysAndRequiresSeed) {
  const auto kv = KeyValueConfig::parse("epochs = 4\n# comment\nbase_loss = la\ntau=0.3\nwts_enabled = false\nseed = 7\n");
  const auto c = TrainConfig::from(kv);
  EXPECT_EQ(c.epochs, 4u);
  EXPECT_EQ(c.base_loss, BaseLoss::LA);
  EXPECT_DOUBLE_EQ(c.tau, 0.3);
  EXPECT_FALSE(c.wts_enabled);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.batch_size, 128u);
  try {
    TrainConfig::from(KeyValueConfig::parse("epochs = 4\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos);
  }
  EXPECT_THROW(TrainConfig::from(KeyValueConfig::parse("seed = 1\nbase_loss = focal\n")), Error);
}

}  // namespace
}  // namespace wts
