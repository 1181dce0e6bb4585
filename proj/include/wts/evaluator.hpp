// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "wts/embedding.hpp"
#include "wts/error.hpp"
#include "wts/losses.hpp"
#include "wts/matrix.hpp"
#include "wts/teacher.hpp"

namespace wts {

enum class ClassGroup { Head, Medium, Tail };

/// Count-rank terciles: classes sorted by training count (descending, ties
/// by index); the first ceil(C/3) are head, the last floor(C/3) tail, the
/// rest medium. Fewer than 3 classes are all head.
inline std::vector<ClassGroup> group_split(const std::vector<std::size_t>& train_counts) {
  const std::size_t C = train_counts.size();
  std::vector<ClassGroup> groups(C, ClassGroup::Head);
  if (C < 3) return groups;
  std::vector<std::size_t> order(C);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return train_counts[a] > train_counts[b]; });
  const std::size_t head = (C + 2) / 3, tail = C / 3;
  for (std::size_t r = 0; r < C; ++r)
    groups[order[r]] = r < head ? ClassGroup::Head : (r >= C - tail ? ClassGroup::Tail : ClassGroup::Medium);
  return groups;
}

struct GroupAccuracy {
  double head = 0.0;
  double medium = 0.0;
  double tail = 0.0;
};

/// Classes (or groups) with no evaluation samples report accuracy 0.
struct RunMetrics {
  double overall = 0.0;
  std::vector<double> per_class;
  GroupAccuracy groups;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
};

inline RunMetrics evaluate_predictions(const Labels& predicted, const Labels& truth,
                                       const std::vector<ClassGroup>& groups) {
  const std::size_t C = groups.size();
  if (predicted.size() != truth.size()) throw Error("evaluate: prediction/label length mismatch");
  if (truth.empty()) throw Error("evaluate: no samples");
  RunMetrics m;
  m.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= C || predicted[i] >= C) throw Error("evaluate: label out of range");
    ++m.confusion[truth[i]][predicted[i]];
  }
  std::size_t correct = 0, total = 0;
  std::size_t g_correct[3] = {0, 0, 0}, g_total[3] = {0, 0, 0};
  m.per_class.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t row = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0});
    const std::size_t hit = m.confusion[c][c];
    correct += hit;
    total += row;
    const auto g = static_cast<std::size_t>(groups[c]);
    g_correct[g] += hit;
    g_total[g] += row;
    if (row > 0) m.per_class[c] = static_cast<double>(hit) / static_cast<double>(row);
  }
  auto frac = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  m.overall = frac(correct, total);
  m.groups = {frac(g_correct[0], g_total[0]), frac(g_correct[1], g_total[1]), frac(g_correct[2], g_total[2])};
  return m;
}

namespace detail {
inline const Labels& require_true_labels(const EmbeddingDataset& ds) {
  if (!ds.true_labels) throw Error("evaluation requires true_labels, which this dataset does not contain");
  return *ds.true_labels;
}
}  // namespace detail

/// Top-1 accuracy of the probe from raw (never prior-adjusted) logits.
inline RunMetrics evaluate(const StudentProbe& probe, const EmbeddingDataset& ds,
                           const std::vector<ClassGroup>& groups) {
  const Labels& truth = detail::require_true_labels(ds);
  return evaluate_predictions(argmax_rows(logits(probe, ds.image_embeddings)), truth, groups);
}

/// Zero-shot accuracy of the frozen teacher.
inline RunMetrics evaluate(const TeacherHead& teacher, const EmbeddingDataset& ds,
                           const std::vector<ClassGroup>& groups) {
  const Labels& truth = detail::require_true_labels(ds);
  return evaluate_predictions(text_predicted_labels(similarities(teacher, ds.image_embeddings)), truth, groups);
}

inline nlohmann::json to_json(const RunMetrics& m) {
  return {{"overall", m.overall},
          {"per_class", m.per_class},
          {"groups", {{"head", m.groups.head}, {"medium", m.groups.medium}, {"tail", m.groups.tail}}},
          {"confusion", m.confusion}};
}

}  // namespace wts
