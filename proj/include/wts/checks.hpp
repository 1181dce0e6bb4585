// SPDX-License-Identifier: Apache-2.0
#pragma once

// Executable versions of the loss identities the method rests on. Each
// check draws its cases from a fixed seed, so repeated runs are identical.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "wts/losses.hpp"
#include "wts/matrix.hpp"
#include "wts/random.hpp"
#include "wts/teacher.hpp"

namespace wts::checks {

struct CheckOptions {
  std::uint64_t seed = 20240601;
  /// Test hook: perturbs every analytic gradient before comparison so the
  /// suite can be shown to fail.
  bool corrupt_gradient = false;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string failing_case;  ///< inputs of the worst case, when failed
};

namespace detail {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g(rng);
  return m;
}

inline Matrix random_distributions(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m = random_matrix(rows, cols, 2.0, rng);
  return softmax_rows(m);
}

inline std::string describe(const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << (r ? "; " : "");
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
  }
  os << ']';
  return os.str();
}

inline void corrupt(Matrix& g) {
  for (double& v : g.data()) v += 1e-3;
}

inline void track(CheckResult& r, double err, const std::string& inputs) {
  if (err > r.max_error) {
    r.max_error = err;
    if (err >= r.tolerance) r.failing_case = inputs;
  }
  if (err >= r.tolerance) r.passed = false;
}

}  // namespace detail

/// Soft-target CE gradient equals softmax(z) - p (scaled by 1/B), checked
/// against central differences, h = 1e-5.
inline CheckResult ce_gradient(const CheckOptions& opt = {}) {
  CheckResult r{"ce-gradient (softmax minus target)", true, 0.0, 1e-6, {}};
  Rng rng(opt.seed);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t C = 2 + uniform_index(rng, 9);
    const std::size_t B = 1 + uniform_index(rng, 4);
    Matrix z = detail::random_matrix(B, C, 2.0, rng);
    const Matrix p = detail::random_distributions(B, C, rng);
    LossGrad analytic = ce_loss_and_grad(z, p);
    if (opt.corrupt_gradient) detail::corrupt(analytic.grad);
    double err = 0.0;
    for (std::size_t k = 0; k < z.data().size(); ++k) {
      const double saved = z.data()[k];
      z.data()[k] = saved + h;
      const double up = ce_loss_and_grad(z, p).loss;
      z.data()[k] = saved - h;
      const double down = ce_loss_and_grad(z, p).loss;
      z.data()[k] = saved;
      err = std::max(err, std::abs((up - down) / (2 * h) - analytic.grad.data()[k]));
    }
    detail::track(r, err, "z=" + detail::describe(z) + " p=" + detail::describe(p));
  }
  return r;
}

/// The student-logit gradient of a*CE + (1-a)*KL(P^t||P^I) equals the CE
/// gradient against p^m = a p^o + (1-a) p^t; the losses differ by
/// (1-a) * mean H(P^t).
inline CheckResult mixed_target_equivalence(const CheckOptions& opt = {}) {
  CheckResult r{"mixed-target equivalence (gradient 1e-12, loss 1e-10)", true, 0.0, 1e-12, {}};
  Rng rng(opt.seed + 1);
  const double as[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t C = 2 + uniform_index(rng, 9);
    const std::size_t B = 1 + uniform_index(rng, 8);
    const Matrix z = detail::random_matrix(B, C, 2.0, rng);
    const Matrix sims = detail::random_matrix(B, C, 0.5, rng);
    Labels observed(B);
    for (auto& y : observed) y = uniform_index(rng, C);
    const Matrix po = one_hot(observed, C);
    const double log_t = std::log(0.05) + 3.0 * uniform01(rng);
    const Matrix pt = teacher_probs(std::exp(log_t), sims);
    const double h_t = mean_entropy(pt);
    for (double a : as) {
      CombinedResult combined = combined_loss(z, po, sims, log_t, a, BaseLoss::CE, ClassPrior::uniform(C));
      if (opt.corrupt_gradient) detail::corrupt(combined.grad_logits);
      const LossGrad direct = ce_loss_and_grad(z, mixed_target(po, pt, a));
      double gerr = 0.0;
      for (std::size_t k = 0; k < direct.grad.data().size(); ++k)
        gerr = std::max(gerr, std::abs(direct.grad.data()[k] - combined.grad_logits.data()[k]));
      const double lerr = std::abs((direct.loss - combined.loss) - (1.0 - a) * h_t);
      // Loss tolerance is 1e-10; rescale so one threshold covers both.
      const double err = std::max(gerr, lerr * 1e-2);
      std::ostringstream in;
      in << "a=" << a << " z=" << detail::describe(z) << " observed=" << detail::describe(po)
         << " sims=" << detail::describe(sims) << " log_t=" << log_t << " (grad err " << gerr << ", loss err " << lerr
         << ")";
      detail::track(r, err, in.str());
    }
  }
  return r;
}

/// Margin adjustment with m strictly ordered by class rarity: the
/// target-class gradient difference softmax(z-m)_y - softmax(z)_y is
/// negative for the rarest class and positive for the most frequent one.
inline CheckResult margin_sign(const CheckOptions& opt = {}) {
  CheckResult r{"logit-adjustment gradient sign (head > 0, tail < 0)", true, 0.0, 0.5, {}};
  Rng rng(opt.seed + 2);
  const std::size_t C = 10;
  const double imbalance = 100.0;
  ClassPrior prior{std::vector<double>(C)};
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) total += prior.pi[c] = std::pow(imbalance, -static_cast<double>(c) / (C - 1));
  for (double& p : prior.pi) p /= total;
  const auto m = margins_from_prior(prior);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix z = detail::random_matrix(1, C, 3.0, rng);
    const auto d = la_gradient_difference(z.row(0), m);
    if (!(d[C - 1] < 0.0) || !(d[0] > 0.0)) {
      ++violations;
      detail::track(r, 1.0, "z=" + detail::describe(z));
    }
  }
  r.max_error = static_cast<double>(violations);
  return r;
}

/// KL >= 0, zero on identical distributions; student and log-temperature
/// gradients match central differences.
inline CheckResult kl_gradients(const CheckOptions& opt = {}) {
  CheckResult r{"kl teacher term (non-negativity, student and temperature gradients)", true, 0.0, 1e-6, {}};
  Rng rng(opt.seed + 3);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t C = 2 + uniform_index(rng, 9);
    const std::size_t B = 1 + uniform_index(rng, 4);
    Matrix z = detail::random_matrix(B, C, 2.0, rng);
    const Matrix sims = detail::random_matrix(B, C, 0.5, rng);
    double log_t = -1.0 + 2.0 * uniform01(rng);
    KlResult k = kl_teacher_loss_and_grad(z, sims, log_t);
    if (opt.corrupt_gradient) detail::corrupt(k.grad_logits);
    double err = k.loss < -1e-15 ? 1.0 : 0.0;
    // Same distributions on both sides: student logits = tempered sims.
    Matrix same = sims;
    for (double& v : same.data()) v /= std::exp(log_t);
    err = std::max(err, std::abs(kl_teacher_loss_and_grad(same, sims, log_t).loss));
    for (std::size_t q = 0; q < z.data().size(); ++q) {
      const double saved = z.data()[q];
      z.data()[q] = saved + h;
      const double up = kl_teacher_loss_and_grad(z, sims, log_t).loss;
      z.data()[q] = saved - h;
      const double down = kl_teacher_loss_and_grad(z, sims, log_t).loss;
      z.data()[q] = saved;
      err = std::max(err, std::abs((up - down) / (2 * h) - k.grad_logits.data()[q]));
    }
    const double up = kl_teacher_loss_and_grad(z, sims, log_t + h).loss;
    const double down = kl_teacher_loss_and_grad(z, sims, log_t - h).loss;
    err = std::max(err, std::abs((up - down) / (2 * h) - k.grad_log_temperature));
    std::ostringstream in;
    in << "z=" << detail::describe(z) << " sims=" << detail::describe(sims) << " log_t=" << log_t;
    detail::track(r, err, in.str());
  }
  return r;
}

/// Text-predicted labels do not depend on the temperature, and the overlap
/// ratio equals a plain count.
inline CheckResult argmax_invariance(const CheckOptions& opt = {}) {
  CheckResult r{"teacher argmax temperature invariance and overlap ratio", true, 0.0, 1e-15, {}};
  Rng rng(opt.seed + 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t C = 2 + uniform_index(rng, 9);
    const std::size_t B = 1 + uniform_index(rng, 16);
    const Matrix sims = detail::random_matrix(B, C, 0.5, rng);
    const double T = std::pow(10.0, -2.0 + 4.0 * uniform01(rng));
    const Labels from_sims = text_predicted_labels(sims);
    const Labels from_probs = text_predicted_labels(teacher_probs(T, sims));
    Labels observed(B);
    for (auto& y : observed) y = uniform_index(rng, C);
    std::size_t same = 0;
    for (std::size_t i = 0; i < B; ++i) same += from_sims[i] == observed[i] ? 1 : 0;
    double err = from_sims == from_probs ? 0.0 : 1.0;
    err = std::max(err, std::abs(overlap_ratio(from_probs, observed) - static_cast<double>(same) / B));
    std::ostringstream in;
    in << "T=" << T << " sims=" << detail::describe(sims);
    detail::track(r, err, in.str());
  }
  return r;
}

inline std::vector<CheckResult> run_all(const CheckOptions& opt = {}) {
  return {ce_gradient(opt), mixed_target_equivalence(opt), margin_sign(opt), kl_gradients(opt),
          argmax_invariance(opt)};
}

}  // namespace wts::checks
