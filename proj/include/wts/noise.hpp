// SPDX-License-Identifier: Apache-2.0
#pragma once

// Long-tailed subsampling and synthetic label corruption through
// row-stochastic transition matrices T(i, j) = P(observed = j | true = i).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "wts/binary_io.hpp"
#include "wts/error.hpp"
#include "wts/matrix.hpp"
#include "wts/random.hpp"

namespace wts {

struct ClassHistogram {
  std::vector<std::size_t> counts;

  std::size_t classes() const { return counts.size(); }
  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

  void validate() const {
    if (counts.size() < 2) throw Error("histogram needs at least 2 classes");
    if (total() == 0) throw Error("histogram is empty");
  }

  static ClassHistogram of(const Labels& labels, std::size_t classes) {
    ClassHistogram h{std::vector<std::size_t>(classes, 0)};
    for (Label y : labels) {
      if (y >= classes) throw Error("label out of range: " + std::to_string(y));
      ++h.counts[y];
    }
    return h;
  }
};

/// Per-class target sizes n_max * IF^(-c/(C-1)) for c = 0..C-1, rounded
/// half-to-even and clamped to at least one sample.
inline std::vector<std::size_t> longtail_counts(std::size_t classes, double imbalance_factor,
                                                std::size_t n_max) {
  if (classes < 2) throw Error("long-tail subsampling needs at least 2 classes");
  if (!(imbalance_factor >= 1.0)) throw Error("imbalance factor must be >= 1");
  if (n_max == 0) throw Error("n_max must be positive");
  std::vector<std::size_t> counts(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double exponent = -static_cast<double>(c) / static_cast<double>(classes - 1);
    const double target = static_cast<double>(n_max) * std::pow(imbalance_factor, exponent);
    // nearbyint honours the default FE_TONEAREST mode: ties go to even.
    counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::nearbyint(target)));
  }
  return counts;
}

struct LongTailSample {
  std::vector<std::size_t> indices;  ///< grouped by class, ascending within a class
  ClassHistogram histogram;
};

/// Draws the long-tailed subset from per-class pools of sample indices.
/// Each class is sampled uniformly without replacement.
inline LongTailSample subsample_longtail(const std::vector<std::vector<std::size_t>>& pools,
                                         double imbalance_factor, std::size_t n_max,
                                         std::uint64_t seed) {
  const auto counts = longtail_counts(pools.size(), imbalance_factor, n_max);
  for (std::size_t c = 0; c < pools.size(); ++c) {
    if (pools[c].size() < counts[c]) {
      throw Error("insufficient samples in class " + std::to_string(c) + ": need " +
                  std::to_string(counts[c]) + ", have " + std::to_string(pools[c].size()));
    }
  }
  Rng rng(seed);
  LongTailSample out{{}, ClassHistogram{counts}};
  for (std::size_t c = 0; c < pools.size(); ++c) {
    std::vector<std::size_t> pool = pools[c];
    // Partial Fisher-Yates: the first counts[c] slots become the sample.
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(counts[c]);
    std::sort(pool.begin(), pool.end());
    out.indices.insert(out.indices.end(), pool.begin(), pool.end());
  }
  return out;
}

/// Groups sample indices by label.
inline std::vector<std::vector<std::size_t>> class_pools(const Labels& labels, std::size_t classes) {
  std::vector<std::vector<std::size_t>> pools(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw Error("label out of range: " + std::to_string(labels[i]));
    pools[labels[i]].push_back(i);
  }
  return pools;
}

enum class NoiseKind { Joint, Symmetric, Asymmetric };

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "joint") return NoiseKind::Joint;
  if (s == "symmetric") return NoiseKind::Symmetric;
  if (s == "asymmetric") return NoiseKind::Asymmetric;
  throw Error("unknown noise kind: " + s);
}

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Joint: return "joint";
    case NoiseKind::Symmetric: return "symmetric";
    case NoiseKind::Asymmetric: return "asymmetric";
  }
  return "?";
}

struct TransitionMatrix {
  NoiseKind kind = NoiseKind::Symmetric;
  double gamma = 0.0;
  Matrix rows;
  std::vector<std::size_t> mapping;  ///< asymmetric target class per row, empty otherwise

  std::size_t classes() const { return rows.rows(); }

  /// Throws unless every row is a probability distribution (sum within 1e-12).
  void validate() const {
    if (rows.rows() != rows.cols() || rows.rows() < 1) throw Error("transition matrix must be square");
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      double s = 0.0;
      for (double v : rows.row(i)) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("transition matrix entry outside [0,1]");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw Error("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
};

namespace detail {
inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("noise ratio gamma must lie in [0, 1)");
}
}  // namespace detail

/// Frequency-proportional flips: off-diagonal mass of row i is split across
/// the other classes in proportion to their (clean) training counts.
inline TransitionMatrix build_joint_matrix(const ClassHistogram& histogram, double gamma) {
  detail::check_gamma(gamma);
  histogram.validate();
  const std::size_t C = histogram.classes();
  const double N = static_cast<double>(histogram.total());
  TransitionMatrix t{NoiseKind::Joint, gamma, Matrix(C, C), {}};
  for (std::size_t i = 0; i < C; ++i) {
    if (histogram.counts[i] == 0) throw Error("joint noise requires every class count > 0 (class " + std::to_string(i) + ")");
    const double rest = N - static_cast<double>(histogram.counts[i]);
    if (rest <= 0.0) throw Error("joint noise undefined: class " + std::to_string(i) + " holds every sample");
    for (std::size_t j = 0; j < C; ++j) {
      t.rows(i, j) = i == j ? 1.0 - gamma : static_cast<double>(histogram.counts[j]) / rest * gamma;
    }
  }
  return t;
}

inline TransitionMatrix build_symmetric_matrix(std::size_t classes, double gamma) {
  detail::check_gamma(gamma);
  if (classes < 2) throw Error("symmetric noise needs at least 2 classes");
  const double off = gamma / static_cast<double>(classes);
  TransitionMatrix t{NoiseKind::Symmetric, gamma, Matrix(classes, classes, off), {}};
  for (std::size_t i = 0; i < classes; ++i) t.rows(i, i) = off + (1.0 - gamma);
  return t;
}

/// i -> (i + 1) mod C.
inline std::vector<std::size_t> cyclic_mapping(std::size_t classes) {
  std::vector<std::size_t> m(classes);
  for (std::size_t i = 0; i < classes; ++i) m[i] = (i + 1) % classes;
  return m;
}

/// Single-target flips: row i keeps 1-gamma on the diagonal and sends gamma
/// to mapping[i].
inline TransitionMatrix build_asymmetric_matrix(std::size_t classes, double gamma,
                                                const std::vector<std::size_t>& mapping) {
  detail::check_gamma(gamma);
  if (classes < 2) throw Error("asymmetric noise needs at least 2 classes");
  if (mapping.size() != classes) throw Error("asymmetric mapping has wrong length");
  TransitionMatrix t{NoiseKind::Asymmetric, gamma, Matrix(classes, classes), mapping};
  for (std::size_t i = 0; i < classes; ++i) {
    if (mapping[i] >= classes) throw Error("asymmetric mapping target out of range");
    if (mapping[i] == i) throw Error("asymmetric mapping has a fixed point at class " + std::to_string(i));
    t.rows(i, i) = 1.0 - gamma;
    t.rows(i, mapping[i]) = gamma;
  }
  return t;
}

struct LabelAssignment {
  std::size_t classes = 0;
  Labels true_labels;
  Labels observed_labels;
  std::uint64_t seed = 0;
};

/// Draws each observed label independently from the row of its true label.
inline LabelAssignment apply_noise(const Labels& true_labels, const TransitionMatrix& matrix,
                                   std::uint64_t seed) {
  const std::size_t C = matrix.classes();
  Rng rng(seed);
  LabelAssignment out{C, true_labels, Labels(true_labels.size()), seed};
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const Label y = true_labels[i];
    if (y >= C) throw Error("label out of range: " + std::to_string(y));
    const auto row = matrix.rows.row(y);
    const double u = uniform01(rng);
    double cum = 0.0;
    Label pick = C;
    for (std::size_t j = 0; j < C; ++j) {
      cum += row[j];
      if (u < cum) {
        pick = j;
        break;
      }
    }
    if (pick == C) {
      // u landed in the rounding slack above the final partial sum.
      pick = C - 1;
      while (pick > 0 && row[pick] == 0.0) --pick;
    }
    out.observed_labels[i] = pick;
  }
  return out;
}

/// Text form: header "C N seed", then one "true observed" pair per line.
inline std::string format_label_assignment(const LabelAssignment& a) {
  std::ostringstream os;
  os << a.classes << ' ' << a.true_labels.size() << ' ' << a.seed << '\n';
  for (std::size_t i = 0; i < a.true_labels.size(); ++i) os << a.true_labels[i] << ' ' << a.observed_labels[i] << '\n';
  return os.str();
}

inline LabelAssignment parse_label_assignment(const std::string& text) {
  std::istringstream is(text);
  LabelAssignment a;
  std::size_t n = 0;
  if (!(is >> a.classes >> n >> a.seed)) throw Error("label file: malformed header");
  a.true_labels.resize(n);
  a.observed_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> a.true_labels[i] >> a.observed_labels[i])) throw Error("label file: truncated at line " + std::to_string(i + 2));
    if (a.true_labels[i] >= a.classes || a.observed_labels[i] >= a.classes)
      throw Error("label file: label out of range at line " + std::to_string(i + 2));
  }
  return a;
}

inline void save_label_assignment(const std::string& path, const LabelAssignment& a) {
  io::write_file(path, format_label_assignment(a));
}

inline LabelAssignment load_label_assignment(const std::string& path) {
  return parse_label_assignment(io::read_file(path));
}

}  // namespace wts
