#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xggm/tape.hpp"

namespace xggm {

enum class Branch { kRelation, kNode, kBaseline };

inline const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kRelation: return "R";
    case Branch::kNode: return "N";
    case Branch::kBaseline: return "BMU";
  }
  return "?";
}

struct LossBreakdown {
  double l_grad = 0.0;
  double l_dist = 0.0;
  double l_bce = 0.0;
  double total = 0.0;
  Branch branch = Branch::kBaseline;
};

/// Eq. 7 of the noise prior comes in two readings: the printed form squares the
/// residual; the Gaussian log-density gradient does not. Both are available.
enum class ScoreMode { kCorrected, kPaper };

inline ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "corrected") return ScoreMode::kCorrected;
  if (s == "paper") return ScoreMode::kPaper;
  throw ConfigError("unknown score mode '" + s + "'");
}

/// Score of the noise prior at the noised values:
///   corrected: -(r_hat - r) / sigma^2
///   paper:     -(r_hat - r)^2 / sigma^2
inline Var score_noisy(Tape& tape, Var r_hat, Var r, double sigma, ScoreMode mode) {
  if (sigma <= 0.0) throw ParameterError("score_noisy: sigma must be positive");
  if (!r_hat.value().same_shape(r.value()))
    throw ContractError("score_noisy: shape mismatch");
  Var diff = tape.sub(r_hat, r);
  if (mode == ScoreMode::kPaper) diff = tape.mul(diff, diff);
  return tape.scale(diff, -1.0 / (sigma * sigma));
}

/// Score of a single Gaussian fitted by moments to the given values, evaluated
/// at each value: -(e - mu) / max(var, var_floor). Population variance; both
/// moments stay on the tape so gradients flow through the fit.
inline Var score_generated(Tape& tape, Var values, double var_floor) {
  const std::size_t n = values.value().size();
  if (n < 2) throw ContractError("score_generated: needs at least 2 values");
  const std::size_t rows = values.value().rows(), cols = values.value().cols();
  Var mu = tape.mean_all(values);
  Var centered = tape.sub(values, tape.broadcast_scalar(mu, rows, cols));
  Var var = tape.max_const(tape.mean_all(tape.mul(centered, centered)), var_floor);
  return tape.scale(tape.scale_by_scalar(centered, tape.reciprocal(var)), -1.0);
}

/// Gradient distribution consistency: mean squared difference between the
/// generated-fit score of the relation entries and the noise-prior score,
/// paired elementwise at the strictly-upper-triangular positions.
inline Var loss_grad_consistency(Tape& tape, Var relation_g, Var r_hat, Var r, double sigma,
                                 ScoreMode mode, double var_floor) {
  Var generated = score_generated(tape, tape.pack_upper(relation_g), var_floor);
  Var noisy = score_noisy(tape, r_hat, r, sigma, mode);
  Var diff = tape.sub(generated, noisy);
  return tape.mean_all(tape.mul(diff, diff));
}

namespace detail {

/// Soft assignment over `bins` equal-width bins on [0,1]: triangular kernel of
/// half-width binwidth/2 + temperature around each bin center, normalized per
/// sample. Output histogram is 1 x bins and sums to 1.
inline Var soft_histogram(Tape& tape, Var samples, std::size_t bins, double temperature) {
  const std::size_t n = samples.value().size();
  if (n == 0) throw ContractError("soft_histogram: empty sample");
  const double width = 1.0 / static_cast<double>(bins);
  const double half = width / 2.0 + temperature;

  Var col = tape.reshape(samples, n, 1);
  Var spread = tape.matmul(col, tape.constant(Matrix(1, bins, 1.0)));
  Matrix centers(n, bins);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < bins; ++b)
      centers(i, b) = (static_cast<double>(b) + 0.5) * width;

  Var dist = tape.abs(tape.sub(spread, tape.constant(std::move(centers))));
  Var kernel = tape.relu(tape.add_const(tape.scale(dist, -1.0 / half), 1.0));
  Var norms = tape.max_const(tape.row_sums(kernel), 1e-12);
  Var assigned = tape.scale_rows(kernel, tape.reciprocal(norms));
  return tape.mean_rows(assigned);
}

inline Var smooth_histogram(Tape& tape, Var hist, std::size_t bins, double eps) {
  return tape.scale(tape.add_const(hist, eps),
                    1.0 / (1.0 + eps * static_cast<double>(bins)));
}

inline Var kl_discrete(Tape& tape, Var p, Var q) {
  return tape.sum_all(tape.mul(p, tape.sub(tape.log(p), tape.log(q))));
}

}  // namespace detail

/// Symmetric KL between eps-smoothed soft histograms of two samples on [0,1].
/// Differentiable in both sample vectors; zero iff the histograms coincide.
inline Var loss_kl_symmetric(Tape& tape, Var p_sample, Var q_sample, std::size_t bins,
                             double eps, double temperature) {
  if (bins < 2) throw ContractError("loss_kl_symmetric: bins must be >= 2");
  if (eps <= 0.0) throw ParameterError("loss_kl_symmetric: eps must be positive");
  if (p_sample.value().size() == 0 || q_sample.value().size() == 0)
    throw ContractError("loss_kl_symmetric: empty sample");
  Var hp = detail::smooth_histogram(tape, detail::soft_histogram(tape, p_sample, bins, temperature),
                                    bins, eps);
  Var hq = detail::smooth_histogram(tape, detail::soft_histogram(tape, q_sample, bins, temperature),
                                    bins, eps);
  return tape.add(detail::kl_discrete(tape, hp, hq), detail::kl_discrete(tape, hq, hp));
}

/// Evaluation-mode counterpart with hard binning (no gradients).
inline double loss_kl_symmetric_eval(const std::vector<double>& p_sample,
                                     const std::vector<double>& q_sample, std::size_t bins,
                                     double eps) {
  if (bins < 2) throw ContractError("loss_kl_symmetric_eval: bins must be >= 2");
  if (eps <= 0.0) throw ParameterError("loss_kl_symmetric_eval: eps must be positive");
  if (p_sample.empty() || q_sample.empty())
    throw ContractError("loss_kl_symmetric_eval: empty sample");

  auto histogram = [&](const std::vector<double>& sample) {
    std::vector<double> h(bins, 0.0);
    for (double v : sample) {
      auto b = static_cast<long long>(std::floor(v * static_cast<double>(bins)));
      b = std::max(0ll, std::min(b, static_cast<long long>(bins) - 1));
      h[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& x : h) x = (x / static_cast<double>(sample.size()) + eps) / (1.0 + eps * bins);
    return h;
  };
  const std::vector<double> hp = histogram(p_sample), hq = histogram(q_sample);
  double kl_pq = 0.0, kl_qp = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    kl_pq += hp[b] * (std::log(hp[b]) - std::log(hq[b]));
    kl_qp += hq[b] * (std::log(hq[b]) - std::log(hp[b]));
  }
  return kl_pq + kl_qp;
}

/// Symmetric closed-form KL between Gaussian moment fits of two value sets.
/// KL(N1 || N2) = ln(s2/s1) + (v1 + (m1-m2)^2) / (2 v2) - 1/2, both directions.
inline Var gaussian_kl_symmetric(Tape& tape, Var a_values, Var b_values, double var_floor) {
  if (a_values.value().size() < 2 || b_values.value().size() < 2)
    throw ContractError("gaussian_kl_symmetric: needs at least 2 values per side");

  auto moments = [&](Var v) {
    Var mu = tape.mean_all(v);
    Var centered =
        tape.sub(v, tape.broadcast_scalar(mu, v.value().rows(), v.value().cols()));
    Var var = tape.max_const(tape.mean_all(tape.mul(centered, centered)), var_floor);
    return std::make_pair(mu, var);
  };
  auto [m1, v1] = moments(a_values);
  auto [m2, v2] = moments(b_values);

  auto one_direction = [&](Var mu1, Var var1, Var mu2, Var var2) {
    Var log_ratio = tape.scale(tape.sub(tape.log(var2), tape.log(var1)), 0.5);
    Var dm = tape.sub(mu1, mu2);
    Var numer = tape.add(var1, tape.mul(dm, dm));
    Var frac = tape.scale(tape.mul(numer, tape.reciprocal(var2)), 0.5);
    return tape.add_const(tape.add(log_ratio, frac), -0.5);
  };
  return tape.add(one_direction(m1, v1, m2, v2), one_direction(m2, v2, m1, v1));
}

struct TotalLoss {
  Var value;
  LossBreakdown breakdown;
};

/// total = alpha * l_grad + beta * l_dist + l_bce
inline TotalLoss total_loss(Tape& tape, Var l_grad, Var l_dist, Var l_bce, double alpha,
                            double beta, Branch branch) {
  Var weighted = tape.add(tape.add(tape.scale(l_grad, alpha), tape.scale(l_dist, beta)), l_bce);
  LossBreakdown bd;
  bd.l_grad = l_grad.value().scalar();
  bd.l_dist = l_dist.value().scalar();
  bd.l_bce = l_bce.value().scalar();
  bd.total = weighted.value().scalar();
  bd.branch = branch;
  return TotalLoss{weighted, bd};
}

}  // namespace xggm
