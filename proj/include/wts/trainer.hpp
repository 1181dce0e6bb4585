// SPDX-License-Identifier: Apache-2.0
#pragma once

// Mini-batch SGD over the student probe with the overlap-ratio switch:
// per batch, if the share of samples whose teacher label matches the
// observed label falls below tau, the loss becomes a * L_O + (1 - a) * KL
// with a ~ Beta(alpha, beta); otherwise it is L_O alone.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wts/binary_io.hpp"
#include "wts/config.hpp"
#include "wts/embedding.hpp"
#include "wts/error.hpp"
#include "wts/evaluator.hpp"
#include "wts/losses.hpp"
#include "wts/noise.hpp"
#include "wts/random.hpp"
#include "wts/teacher.hpp"

namespace wts {

/// tau < 0 disables the switch for good; tau > 1 makes it fire every batch.
struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double tau = 0.5;
  double beta_alpha = 2.0;
  double beta_beta = 2.0;
  double initial_temperature = 0.01;  // CLIP-style logit scale of 100 on cosines
  BaseLoss base_loss = BaseLoss::CE;
  bool wts_enabled = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw Error("train config: epochs must be >= 1");
    if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("train config: learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("train config: momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw Error("train config: weight_decay must be non-negative");
    if (!std::isfinite(tau)) throw Error("train config: tau must be finite");
    if (!(beta_alpha > 0.0 && beta_beta > 0.0)) throw Error("train config: beta parameters must be positive");
    if (!(initial_temperature > 0.0) || !std::isfinite(initial_temperature))
      throw Error("train config: initial_temperature must be positive");
  }

  /// Reads the TrainConfig keys out of a flat config. "seed" is mandatory.
  static TrainConfig from(const KeyValueConfig& kv) {
    TrainConfig c;
    c.epochs = kv.integer("epochs", c.epochs);
    c.batch_size = kv.integer("batch_size", c.batch_size);
    c.learning_rate = kv.real("learning_rate", c.learning_rate);
    c.momentum = kv.real("momentum", c.momentum);
    c.weight_decay = kv.real("weight_decay", c.weight_decay);
    c.tau = kv.real("tau", c.tau);
    c.beta_alpha = kv.real("beta_alpha", c.beta_alpha);
    c.beta_beta = kv.real("beta_beta", c.beta_beta);
    c.initial_temperature = kv.real("initial_temperature", c.initial_temperature);
    c.base_loss = parse_base_loss(kv.str("base_loss", "ce"));
    c.wts_enabled = kv.boolean("wts_enabled", c.wts_enabled);
    c.seed = kv.integer("seed");
    c.validate();
    return c;
  }
};

struct SgdSettings {
  double learning_rate;
  double momentum;
  double weight_decay;
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v.
inline void sgd_step(std::span<double> param, std::span<double> velocity, std::span<const double> grad,
                     const SgdSettings& s) {
  if (param.size() != velocity.size() || param.size() != grad.size()) throw Error("sgd_step: shape mismatch");
  if (!all_finite(grad)) throw Error("sgd_step: non-finite gradient");
  for (std::size_t k = 0; k < param.size(); ++k) {
    velocity[k] = s.momentum * velocity[k] + grad[k] + s.weight_decay * param[k];
    param[k] -= s.learning_rate * velocity[k];
  }
  if (!all_finite(param)) throw Error("sgd_step: non-finite parameter after update");
}

struct TrainState {
  StudentProbe probe;
  ProbeGradient velocity;
  TeacherHead teacher;
  double temperature_velocity = 0.0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  Rng rng;

  TrainState(std::size_t classes, std::size_t dim, Matrix prototypes, double initial_temperature, std::uint64_t seed)
      : probe(classes, dim),
        velocity{Matrix(classes, dim), std::vector<double>(classes, 0.0)},
        teacher(std::move(prototypes), std::log(initial_temperature)),
        rng(seed) {}
};

/// Applies one optimizer step to the probe, and to the teacher temperature
/// when the teacher term contributed to this batch.
inline void sgd_step(TrainState& state, const ProbeGradient& grad, std::optional<double> grad_log_temperature,
                     const TrainConfig& config) {
  const SgdSettings s{config.learning_rate, config.momentum, config.weight_decay};
  sgd_step(state.probe.weights.data(), state.velocity.weights.data(), grad.weights.data(), s);
  sgd_step(state.probe.bias, state.velocity.bias, grad.bias, s);
  if (grad_log_temperature) {
    sgd_step(std::span<double>(&state.teacher.log_temperature, 1), std::span<double>(&state.temperature_velocity, 1),
             std::span<const double>(&*grad_log_temperature, 1), s);
  }
  ++state.step;
}

/// One entry per optimizer step.
struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t size = 0;
  double overlap_ratio = 0.0;
  bool fired = false;
  double a = 1.0;
  double loss = 0.0;
  double loss_observed = 0.0;
  double loss_teacher = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double mean_overlap_ratio = 0.0;
  double fire_rate = 0.0;
  double temperature = 1.0;
  std::optional<RunMetrics> test;
};

struct TrainResult {
  StudentProbe probe;
  double log_temperature = 0.0;
  std::vector<EpochMetrics> epochs;
  std::vector<BatchRecord> batches;
  std::vector<ClassGroup> groups;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Class counts used to rank head/medium/tail: the clean histogram when the
/// training set carries true labels, the observed one otherwise.
inline std::vector<std::size_t> training_histogram(const EmbeddingDataset& train) {
  return ClassHistogram::of(train.true_labels ? *train.true_labels : train.observed_labels, train.classes()).counts;
}

inline TrainResult train(const EmbeddingDataset& train_set, const TrainConfig& config,
                         const EmbeddingDataset* test_set = nullptr, const EpochCallback& on_epoch = {}) {
  train_set.validate();
  config.validate();
  if (test_set) {
    test_set->validate();
    if (test_set->dim() != train_set.dim() || test_set->classes() != train_set.classes())
      throw Error("train: test set shape differs from training set");
  }
  const std::size_t N = train_set.size(), C = train_set.classes(), D = train_set.dim();

  TrainState state(C, D, train_set.text_embeddings, config.initial_temperature, config.seed);
  const ClassPrior prior = ClassPrior::from_labels(train_set.observed_labels, C);
  // Prototypes are frozen, so similarities can be computed once up front.
  const Matrix all_sims = similarities(state.teacher, train_set.image_embeddings);
  const Labels all_teacher_labels = text_predicted_labels(all_sims);

  TrainResult result;
  result.groups = group_split(training_histogram(train_set));

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, state.rng);
    double loss_sum = 0.0, or_sum = 0.0;
    std::size_t fired = 0, batches = 0;
    for (std::size_t start = 0; start < N; start += config.batch_size) {
      const std::size_t B = std::min(config.batch_size, N - start);
      const std::span<const std::size_t> idx(order.data() + start, B);

      const Matrix feats = gather_rows(train_set.image_embeddings, idx);
      const Matrix sims = gather_rows(all_sims, idx);
      Labels observed(B), teacher_labels(B);
      for (std::size_t i = 0; i < B; ++i) {
        observed[i] = train_set.observed_labels[idx[i]];
        teacher_labels[i] = all_teacher_labels[idx[i]];
      }
      const double ratio = overlap_ratio(teacher_labels, observed);
      const bool fire = config.wts_enabled && ratio < config.tau;
      const double a = fire ? sample_beta(config.beta_alpha, config.beta_beta, state.rng) : 1.0;

      const Matrix z = logits(state.probe, feats);
      const CombinedResult loss = combined_loss(z, one_hot(observed, C), sims, state.teacher.log_temperature, a,
                                                config.base_loss, prior);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " batch " << batches << " (L_O=" << loss.loss_observed
           << ", L_T=" << loss.loss_teacher << ", a=" << a << ")";
        throw Error(os.str());
      }
      const ProbeGradient grad = probe_gradient(loss.grad_logits, feats);
      sgd_step(state, grad, loss.teacher_active ? std::optional<double>(loss.grad_log_temperature) : std::nullopt,
               config);

      result.batches.push_back(
          {epoch, batches, B, ratio, fire, a, loss.loss, loss.loss_observed, loss.loss_teacher});
      loss_sum += loss.loss * static_cast<double>(B);
      or_sum += ratio;
      fired += fire;
      ++batches;
    }
    state.epoch = epoch + 1;

    EpochMetrics em;
    em.epoch = epoch + 1;
    em.train_loss = loss_sum / static_cast<double>(N);
    em.mean_overlap_ratio = or_sum / static_cast<double>(batches);
    em.fire_rate = static_cast<double>(fired) / static_cast<double>(batches);
    em.temperature = state.teacher.temperature();
    if (test_set) em.test = evaluate(state.probe, *test_set, result.groups);
    if (on_epoch) on_epoch(em);
    result.epochs.push_back(std::move(em));
  }
  result.probe = std::move(state.probe);
  result.log_temperature = state.teacher.log_temperature;
  return result;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},       {"batch_size", c.batch_size},     {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},   {"weight_decay", c.weight_decay}, {"tau", c.tau},
          {"beta_alpha", c.beta_alpha}, {"beta_beta", c.beta_beta},     {"initial_temperature", c.initial_temperature}, {"base_loss", to_string(c.base_loss)},
          {"wts_enabled", c.wts_enabled}, {"seed", c.seed},             {"lr_schedule", "constant"}};
}

/// Metrics report written by `train`.
inline nlohmann::json to_json(const TrainResult& r, const TrainConfig& c) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"mean_or", e.mean_overlap_ratio},
                     {"fire_rate", e.fire_rate},
                     {"temperature", e.temperature}};
    if (e.test) {
      j["test_accuracy"] = e.test->overall;
      j["head"] = e.test->groups.head;
      j["medium"] = e.test->groups.medium;
      j["tail"] = e.test->groups.tail;
    }
    epochs.push_back(std::move(j));
  }
  double or_sum = 0.0, fired = 0.0;
  for (const auto& b : r.batches) {
    or_sum += b.overlap_ratio;
    fired += b.fired ? 1.0 : 0.0;
  }
  const double nb = static_cast<double>(r.batches.size());
  nlohmann::json out{{"config", to_json(c)},
                     {"epochs", std::move(epochs)},
                     {"mean_or", or_sum / nb},
                     {"fire_rate", fired / nb},
                     {"final_temperature", std::exp(r.log_temperature)}};
  if (!r.epochs.empty() && r.epochs.back().test) out["final_test"] = to_json(*r.epochs.back().test);
  return out;
}

// --- probe checkpoint ------------------------------------------------------
//   magic "WTSPRB1\0" | u32 C | u32 D | C*D f32 weights (row-major)
//   | C f32 bias | f32 log_temperature        (little-endian)

inline constexpr std::string_view kProbeMagic{"WTSPRB1\0", 8};

struct Checkpoint {
  StudentProbe probe;
  double log_temperature = 0.0;
};

inline std::string serialize_checkpoint(const StudentProbe& probe, double log_temperature) {
  io::ByteWriter w;
  w.raw(kProbeMagic);
  w.u32(static_cast<std::uint32_t>(probe.classes()));
  w.u32(static_cast<std::uint32_t>(probe.dim()));
  for (double v : probe.weights.data()) w.f32(static_cast<float>(v));
  for (double v : probe.bias) w.f32(static_cast<float>(v));
  w.f32(static_cast<float>(log_temperature));
  return w.bytes();
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kProbeMagic.size() || bytes.substr(0, kProbeMagic.size()) != kProbeMagic)
    throw Error("bad magic: not a WTSPRB1 probe checkpoint");
  io::ByteReader r(bytes);
  r.raw(kProbeMagic.size(), "magic");
  const std::size_t C = r.get<std::uint32_t>("header");
  const std::size_t D = r.get<std::uint32_t>("header");
  if (C < 2 || D < 1) throw Error("corrupt checkpoint header");
  if (r.remaining() != (C * D + C + 1) * 4) throw Error("truncated or oversized checkpoint payload");
  Checkpoint ck{StudentProbe(C, D), 0.0};
  for (double& v : ck.probe.weights.data()) v = r.get<float>("weights");
  for (double& v : ck.probe.bias) v = r.get<float>("bias");
  ck.log_temperature = r.get<float>("log_temperature");
  if (!ck.probe.finite() || !std::isfinite(ck.log_temperature)) throw Error("non-finite value in checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const StudentProbe& probe, double log_temperature) {
  io::write_file(path, serialize_checkpoint(probe, log_temperature));
}

inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(io::read_file(path)); }

}  // namespace wts
