// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end scenario: synthesize features, carve a long-tailed subset,
// corrupt its labels, then train and score the four methods
// (CE, CE+WTS, LA, LA+WTS) on a clean balanced test set.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wts/config.hpp"
#include "wts/embedding.hpp"
#include "wts/evaluator.hpp"
#include "wts/noise.hpp"
#include "wts/trainer.hpp"

namespace wts {

struct ScenarioSpec {
  SyntheticSpec synthetic;  ///< seed is overridden per run
  std::size_t test_per_class = 200;
  double imbalance_factor = 10.0;
  std::size_t n_max = 500;
  NoiseKind noise = NoiseKind::Symmetric;
  double gamma = 0.6;

  static ScenarioSpec from(const KeyValueConfig& kv) {
    ScenarioSpec s;
    s.synthetic.classes = kv.integer("classes", s.synthetic.classes);
    s.synthetic.dim = kv.integer("dim", s.synthetic.dim);
    s.synthetic.samples_per_class = kv.integer("samples_per_class", s.synthetic.samples_per_class);
    s.synthetic.cluster_spread = kv.real("cluster_spread", s.synthetic.cluster_spread);
    s.synthetic.teacher_quality = kv.real("teacher_quality", s.synthetic.teacher_quality);
    s.test_per_class = kv.integer("test_per_class", s.test_per_class);
    s.imbalance_factor = kv.real("imbalance_factor", s.imbalance_factor);
    s.n_max = kv.integer("n_max", s.n_max);
    s.noise = parse_noise_kind(kv.str("noise", "symmetric"));
    s.gamma = kv.real("gamma", s.gamma);
    return s;
  }
};

/// SplitMix64 finalizer; turns one user seed into independent stream seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline TransitionMatrix build_matrix(NoiseKind kind, const ClassHistogram& hist, double gamma) {
  switch (kind) {
    case NoiseKind::Joint: return build_joint_matrix(hist, gamma);
    case NoiseKind::Symmetric: return build_symmetric_matrix(hist.classes(), gamma);
    case NoiseKind::Asymmetric: return build_asymmetric_matrix(hist.classes(), gamma, cyclic_mapping(hist.classes()));
  }
  throw Error("unknown noise kind");
}

struct Scenario {
  EmbeddingDataset train;  ///< long-tailed, noisy observed labels, clean true labels
  EmbeddingDataset test;   ///< balanced, clean
  ClassHistogram histogram;
};

inline Scenario prepare_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  SyntheticSpec syn = spec.synthetic;
  syn.seed = derive_seed(seed, 0);
  auto split = generate_synthetic_split(syn, spec.test_per_class);
  const auto lt = subsample_longtail(class_pools(*split.train.true_labels, syn.classes), spec.imbalance_factor,
                                     spec.n_max, derive_seed(seed, 1));
  EmbeddingDataset train = split.train.select(lt.indices);
  const auto matrix = build_matrix(spec.noise, lt.histogram, spec.gamma);
  train.observed_labels = apply_noise(*train.true_labels, matrix, derive_seed(seed, 2)).observed_labels;
  return Scenario{std::move(train), std::move(split.test), lt.histogram};
}

enum class Method { CE, CE_WTS, LA, LA_WTS };

inline constexpr std::array<Method, 4> kAllMethods{Method::CE, Method::CE_WTS, Method::LA, Method::LA_WTS};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::CE: return "CE";
    case Method::CE_WTS: return "CE+WTS";
    case Method::LA: return "LA";
    case Method::LA_WTS: return "LA+WTS";
  }
  return "?";
}

inline TrainConfig configure(TrainConfig base, Method m, double tau, std::uint64_t seed) {
  base.base_loss = (m == Method::LA || m == Method::LA_WTS) ? BaseLoss::LA : BaseLoss::CE;
  base.wts_enabled = m == Method::CE_WTS || m == Method::LA_WTS;
  base.tau = tau;
  base.seed = derive_seed(seed, 3);
  return base;
}

struct RunSummary {
  Method method = Method::CE;
  double tau = 0.0;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  double mean_or = 0.0;
  double fire_rate = 0.0;
};

inline RunSummary run_method(const Scenario& sc, const TrainConfig& base, Method m, double tau, std::uint64_t seed) {
  const TrainConfig cfg = configure(base, m, tau, seed);
  const TrainResult r = train(sc.train, cfg);
  RunSummary s{m, tau, seed, evaluate(r.probe, sc.test, group_split(sc.histogram.counts)), 0.0, 0.0};
  for (const auto& b : r.batches) {
    s.mean_or += b.overlap_ratio;
    s.fire_rate += b.fired ? 1.0 : 0.0;
  }
  s.mean_or /= static_cast<double>(r.batches.size());
  s.fire_rate /= static_cast<double>(r.batches.size());
  return s;
}

}  // namespace wts
