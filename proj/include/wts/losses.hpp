// SPDX-License-Identifier: Apache-2.0
#pragma once

// Loss kernels over a linear student probe. Every loss is the arithmetic
// mean over the batch and every gradient is taken with respect to the
// student logits (B x C), so all gradients carry a 1/B factor.

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "wts/error.hpp"
#include "wts/matrix.hpp"
#include "wts/teacher.hpp"

namespace wts {

/// Linear classifier z = W f + b over frozen embeddings.
struct StudentProbe {
  Matrix weights;             ///< C x D
  std::vector<double> bias;   ///< C

  StudentProbe() = default;
  StudentProbe(std::size_t classes, std::size_t dim) : weights(classes, dim), bias(classes, 0.0) {}

  std::size_t classes() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }

  bool finite() const { return all_finite(weights.data()) && all_finite(bias); }
};

inline Matrix logits(const StudentProbe& probe, const Matrix& images) {
  if (images.cols() != probe.dim())
    throw Error("logits: dimension mismatch (images " + std::to_string(images.cols()) + ", probe " +
                std::to_string(probe.dim()) + ")");
  Matrix z(images.rows(), probe.classes());
  for (std::size_t i = 0; i < images.rows(); ++i)
    for (std::size_t c = 0; c < probe.classes(); ++c)
      z(i, c) = dot(probe.weights.row(c), images.row(i)) + probe.bias[c];
  return z;
}

struct ProbeGradient {
  Matrix weights;
  std::vector<double> bias;
};

/// Backpropagates dL/dz through z = W f + b.
inline ProbeGradient probe_gradient(const Matrix& grad_logits, const Matrix& images) {
  const std::size_t C = grad_logits.cols(), D = images.cols();
  ProbeGradient g{Matrix(C, D), std::vector<double>(C, 0.0)};
  for (std::size_t i = 0; i < images.rows(); ++i) {
    const auto gz = grad_logits.row(i);
    const auto f = images.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      auto w = g.weights.row(c);
      for (std::size_t k = 0; k < D; ++k) w[k] += gz[c] * f[k];
      g.bias[c] += gz[c];
    }
  }
  return g;
}

/// Class prior estimated from label counts with +1 smoothing per class.
struct ClassPrior {
  std::vector<double> pi;

  static ClassPrior from_labels(const Labels& labels, std::size_t classes) {
    std::vector<double> counts(classes, 1.0);
    for (Label y : labels) {
      if (y >= classes) throw Error("label out of range: " + std::to_string(y));
      counts[y] += 1.0;
    }
    const double total = static_cast<double>(labels.size() + classes);
    for (double& c : counts) c /= total;
    return ClassPrior{std::move(counts)};
  }

  static ClassPrior uniform(std::size_t classes) {
    return ClassPrior{std::vector<double>(classes, 1.0 / static_cast<double>(classes))};
  }

  void validate() const {
    double s = 0.0;
    for (double p : pi) {
      if (!(p > 0.0)) throw Error("class prior must be strictly positive");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error("class prior does not sum to 1");
  }
};

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  ///< d loss / d logits
};

namespace detail {

inline void check_distribution_rows(const Matrix& p, const char* who) {
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) {
      if (!(v >= 0.0)) throw Error(std::string(who) + ": target row " + std::to_string(i) + " is not a distribution");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw Error(std::string(who) + ": target row " + std::to_string(i) + " is not a distribution");
  }
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(std::string(who) + ": shape mismatch");
  if (a.rows() == 0) throw Error(std::string(who) + ": empty batch");
}

}  // namespace detail

/// Soft-target cross-entropy: mean_i -sum_c p(i,c) log softmax(z_i)_c.
/// Gradient row i is (softmax(z_i) - p_i) / B.
inline LossGrad ce_loss_and_grad(const Matrix& logits, const Matrix& targets) {
  detail::check_same_shape(logits, targets, "ce_loss_and_grad");
  detail::check_distribution_rows(targets, "ce_loss_and_grad");
  const double B = static_cast<double>(logits.rows());
  LossGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const auto p = targets.row(i);
    const double lse = log_sum_exp(z);
    auto g = out.grad.row(i);
    double row_loss = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double log_q = z[c] - lse;
      if (p[c] > 0.0) row_loss -= p[c] * log_q;
      g[c] = (std::exp(log_q) - p[c]) / B;
    }
    out.loss += row_loss;
  }
  out.loss /= B;
  return out;
}

/// z + log(pi), broadcast over rows.
inline Matrix adjust_logits_la(const Matrix& logits, const ClassPrior& prior) {
  if (prior.pi.size() != logits.cols()) throw Error("adjust_logits_la: prior length mismatch");
  for (double p : prior.pi)
    if (!(p > 0.0)) throw Error("adjust_logits_la: zero prior entry");
  Matrix out = logits;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] += std::log(prior.pi[c]);
  }
  return out;
}

/// KL(P^t || softmax(z)) averaged over the batch, with gradient wrt z.
/// Zero teacher entries contribute nothing (0 log 0 = 0).
inline LossGrad kl_loss_and_grad(const Matrix& student_logits, const Matrix& teacher) {
  detail::check_same_shape(student_logits, teacher, "kl_teacher_loss_and_grad");
  detail::check_distribution_rows(teacher, "kl_teacher_loss_and_grad");
  const double B = static_cast<double>(student_logits.rows());
  LossGrad out{0.0, Matrix(student_logits.rows(), student_logits.cols())};
  for (std::size_t i = 0; i < student_logits.rows(); ++i) {
    const auto z = student_logits.row(i);
    const auto p = teacher.row(i);
    const double lse = log_sum_exp(z);
    auto g = out.grad.row(i);
    double row = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double log_q = z[c] - lse;
      if (p[c] > 0.0) row += p[c] * (std::log(p[c]) - log_q);
      g[c] = (std::exp(log_q) - p[c]) / B;
    }
    out.loss += row;
  }
  out.loss /= B;
  return out;
}

struct KlResult {
  double loss = 0.0;
  Matrix grad_logits;
  double grad_log_temperature = 0.0;
};

/// KL(softmax(s/T) || softmax(z)) with T = exp(log_temperature), returning
/// gradients for both the student logits and the teacher's log-temperature.
///
/// With u = s/T, p = softmax(u), q = softmax(z), g_c = log p_c - log q_c:
///   dKL/du_j = p_j (g_j - sum_c p_c g_c),   du_j/d(log T) = -u_j.
inline KlResult kl_teacher_loss_and_grad(const Matrix& student_logits, const Matrix& sims, double log_temperature) {
  detail::check_same_shape(student_logits, sims, "kl_teacher_loss_and_grad");
  const double T = std::exp(log_temperature);
  const double B = static_cast<double>(sims.rows());
  const Matrix p = teacher_probs(T, sims);
  auto base = kl_loss_and_grad(student_logits, p);
  KlResult out{base.loss, std::move(base.grad), 0.0};
  std::vector<double> gap(sims.cols());
  for (std::size_t i = 0; i < sims.rows(); ++i) {
    const auto z = student_logits.row(i);
    const auto s = sims.row(i);
    const auto pi = p.row(i);
    const double lse_z = log_sum_exp(z);
    std::vector<double> u(s.begin(), s.end());
    for (double& v : u) v /= T;
    const double lse_u = log_sum_exp(u);
    double mean_gap = 0.0;
    for (std::size_t c = 0; c < gap.size(); ++c) {
      gap[c] = (u[c] - lse_u) - (z[c] - lse_z);
      mean_gap += pi[c] * gap[c];
    }
    double d = 0.0;
    for (std::size_t j = 0; j < gap.size(); ++j) d -= pi[j] * (gap[j] - mean_gap) * u[j];
    out.grad_log_temperature += d;
  }
  out.grad_log_temperature /= B;
  return out;
}

/// Mean Shannon entropy of the rows of a probability matrix.
inline double mean_entropy(const Matrix& probs) {
  double h = 0.0;
  for (double v : probs.data())
    if (v > 0.0) h -= v * std::log(v);
  return h / static_cast<double>(probs.rows());
}

/// p^m = a p^o + (1 - a) p^t.
inline Matrix mixed_target(const Matrix& observed, const Matrix& teacher, double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error("mixing coefficient must lie in [0, 1]");
  detail::check_same_shape(observed, teacher, "mixed_target");
  Matrix out(observed.rows(), observed.cols());
  for (std::size_t k = 0; k < out.data().size(); ++k)
    out.data()[k] = a * observed.data()[k] + (1.0 - a) * teacher.data()[k];
  return out;
}

enum class BaseLoss { CE, LA };

inline BaseLoss parse_base_loss(const std::string& s) {
  if (s == "ce" || s == "CE") return BaseLoss::CE;
  if (s == "la" || s == "LA") return BaseLoss::LA;
  throw Error("unknown base loss: " + s);
}

inline const char* to_string(BaseLoss b) { return b == BaseLoss::CE ? "ce" : "la"; }

struct CombinedResult {
  double loss = 0.0;           ///< a * L_O + (1 - a) * L_T
  double loss_observed = 0.0;  ///< L_O
  double loss_teacher = 0.0;   ///< L_T, 0 when the teacher term is off
  bool teacher_active = false;
  Matrix grad_logits;
  double grad_log_temperature = 0.0;
};

/// a * L_O(observed) + (1 - a) * KL(P^t || P^I). L_O is cross-entropy on
/// raw logits (CE) or on prior-adjusted logits (LA); the KL term always
/// compares the teacher with the unadjusted student distribution. At a = 1
/// the teacher term is skipped entirely.
inline CombinedResult combined_loss(const Matrix& student_logits, const Matrix& observed_onehot, const Matrix& sims,
                                    double log_temperature, double a, BaseLoss base, const ClassPrior& prior) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error("combined_loss: mixing coefficient must lie in [0, 1]");
  const LossGrad lo = base == BaseLoss::LA ? ce_loss_and_grad(adjust_logits_la(student_logits, prior), observed_onehot)
                                           : ce_loss_and_grad(student_logits, observed_onehot);
  CombinedResult out;
  out.loss_observed = lo.loss;
  if (a == 1.0) {
    out.loss = lo.loss;
    out.grad_logits = lo.grad;
    return out;
  }
  const KlResult lt = kl_teacher_loss_and_grad(student_logits, sims, log_temperature);
  out.teacher_active = true;
  out.loss_teacher = lt.loss;
  out.loss = a * lo.loss + (1.0 - a) * lt.loss;
  out.grad_logits = Matrix(student_logits.rows(), student_logits.cols());
  for (std::size_t k = 0; k < out.grad_logits.data().size(); ++k)
    out.grad_logits.data()[k] = a * lo.grad.data()[k] + (1.0 - a) * lt.grad_logits.data()[k];
  out.grad_log_temperature = (1.0 - a) * lt.grad_log_temperature;
  return out;
}

/// softmax(z - m)_y - softmax(z)_y for every class y: how far margin-based
/// adjustment moves the target-class gradient relative to plain CE.
/// Diagnostic only.
inline std::vector<double> la_gradient_difference(std::span<const double> logits, std::span<const double> margins) {
  if (logits.size() != margins.size()) throw Error("la_gradient_difference: length mismatch");
  if (!all_finite(margins)) throw Error("la_gradient_difference: non-finite margin");
  std::vector<double> shifted(logits.size()), q_la(logits.size()), q_ce(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) shifted[c] = logits[c] - margins[c];
  softmax(shifted, q_la);
  softmax(logits, q_ce);
  std::vector<double> d(logits.size());
  for (std::size_t c = 0; c < d.size(); ++c) d[c] = q_la[c] - q_ce[c];
  return d;
}

/// Margins m_c = -log(pi_c), the convention under which z - m equals the
/// prior-adjusted logits.
inline std::vector<double> margins_from_prior(const ClassPrior& prior) {
  std::vector<double> m(prior.pi.size());
  for (std::size_t c = 0; c < m.size(); ++c) m[c] = -std::log(prior.pi[c]);
  return m;
}

}  // namespace wts
