// SPDX-License-Identifier: Apache-2.0
#pragma once

// The weak teacher: frozen class-text prototypes scored against image
// embeddings by cosine similarity, with a learnable softmax temperature.

#include <cmath>
#include <utility>

#include "wts/error.hpp"
#include "wts/matrix.hpp"

namespace wts {

struct TeacherHead {
  Matrix prototypes;           ///< C x D, never modified by training
  double log_temperature = 0;  ///< temperature = exp(log_temperature)

  explicit TeacherHead(Matrix protos, double log_temp = 0.0)
      : prototypes(std::move(protos)), log_temperature(log_temp) {}

  std::size_t classes() const { return prototypes.rows(); }
  double temperature() const { return std::exp(log_temperature); }
};

/// Cosine similarity s(i, c) between image row i and prototype c.
inline Matrix similarities(const TeacherHead& head, const Matrix& images) {
  const auto& protos = head.prototypes;
  if (images.cols() != protos.cols())
    throw Error("similarities: dimension mismatch (images " + std::to_string(images.cols()) + ", prototypes " +
                std::to_string(protos.cols()) + ")");
  std::vector<double> proto_norm(protos.rows());
  for (std::size_t c = 0; c < protos.rows(); ++c) {
    proto_norm[c] = norm2(protos.row(c));
    if (proto_norm[c] == 0.0) throw Error("similarities: zero prototype row " + std::to_string(c));
  }
  Matrix s(images.rows(), protos.rows());
  for (std::size_t i = 0; i < images.rows(); ++i) {
    const double fn = norm2(images.row(i));
    if (fn == 0.0) throw Error("similarities: zero image row " + std::to_string(i));
    for (std::size_t c = 0; c < protos.rows(); ++c)
      s(i, c) = dot(protos.row(c), images.row(i)) / (proto_norm[c] * fn);
  }
  return s;
}

/// softmax(s / T) per row.
inline Matrix teacher_probs(double temperature, const Matrix& sims) {
  if (!(temperature > 0.0)) throw Error("teacher_probs: temperature must be positive");
  Matrix scaled = sims;
  for (double& v : scaled.data()) v /= temperature;
  return softmax_rows(scaled);
}

inline Matrix teacher_probs(const TeacherHead& head, const Matrix& sims) {
  return teacher_probs(head.temperature(), sims);
}

/// Text-predicted label per row. Works on similarities or probabilities
/// alike since softmax(s / T) is monotone in s.
inline Labels text_predicted_labels(const Matrix& scores) {
  if (scores.cols() == 0) throw Error("text_predicted_labels: empty rows");
  return argmax_rows(scores);
}

/// Fraction of the batch where the teacher's label equals the observed one.
inline double overlap_ratio(std::span<const Label> predicted, std::span<const Label> observed) {
  if (predicted.size() != observed.size()) throw Error("overlap_ratio: length mismatch");
  if (predicted.empty()) throw Error("overlap_ratio: empty batch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == observed[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace wts
