#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "psenet/core.hpp"

namespace psenet {

/// Smoothing added to numerator and denominator of the dice coefficient so
/// that empty masks give dice = 1.
inline constexpr double kDiceSmooth = 1e-6;

struct LossConfig {
  double lambda = 0.7;
  double ohem_ratio = 3.0;
  double w_threshold = 0.5;
};

inline void validate(const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
    throw Error(ErrorKind::invalid_argument, "lambda must lie in [0, 1]");
  if (!(cfg.ohem_ratio >= 0.0)) throw Error(ErrorKind::invalid_argument, "ohem ratio must be >= 0");
  if (!(cfg.w_threshold >= 0.0 && cfg.w_threshold <= 1.0))
    throw Error(ErrorKind::invalid_argument, "w threshold must lie in [0, 1]");
}

struct LossBreakdown {
  double total = 0.0;
  double complete = 0.0;
  double shrunk = 0.0;
  std::vector<double> per_scale_dice;
};

namespace detail {

struct DiceSums {
  double sg = 0.0;
  double ss = 0.0;
  double gg = 0.0;
};

inline DiceSums dice_sums(const ScoreMap& s, const Mask& g, const Mask& m) {
  require_same_shape(s, g, "dice");
  require_same_shape(s, m, "dice");
  DiceSums sums;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!m[i]) continue;
    const double sv = s[i];
    const double gv = g[i] ? 1.0 : 0.0;
    sums.sg += sv * gv;
    sums.ss += sv * sv;
    sums.gg += gv;
  }
  return sums;
}

}  // namespace detail

/// Smoothed dice coefficient 2*sum(S*G) / (sum(S^2) + sum(G^2)) over the
/// pixels set in `m`.
inline double dice(const ScoreMap& s, const Mask& g, const Mask& m) {
  const auto sums = detail::dice_sums(s, g, m);
  return (2.0 * sums.sg + kDiceSmooth) / (sums.ss + sums.gg + kDiceSmooth);
}

/// Analytic derivative of `dice` with respect to every S pixel; zero outside `m`.
inline ScoreMap dice_gradient(const ScoreMap& s, const Mask& g, const Mask& m) {
  const auto sums = detail::dice_sums(s, g, m);
  const double num = 2.0 * sums.sg + kDiceSmooth;
  const double den = sums.ss + sums.gg + kDiceSmooth;
  ScoreMap grad(s.width(), s.height());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!m[i]) continue;
    const double gv = g[i] ? 1.0 : 0.0;
    grad[i] = (2.0 * gv * den - 2.0 * s[i] * num) / (den * den);
  }
  return grad;
}

/// Positives of G_n plus the highest-scoring ratio*|positives| negatives, all
/// outside `ignore`. Score ties go to the earlier pixel in row-major order.
inline Mask ohem_mask(const ScoreMap& s_n, const Mask& g_n, const Mask& ignore, double ratio) {
  require_same_shape(s_n, g_n, "ohem_mask");
  require_same_shape(s_n, ignore, "ohem_mask");
  if (!(ratio >= 0.0)) throw Error(ErrorKind::invalid_argument, "ohem ratio must be >= 0");

  Mask out(s_n.width(), s_n.height());
  std::size_t positives = 0;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < s_n.size(); ++i) {
    if (ignore[i]) continue;
    if (g_n[i]) {
      out[i] = 1;
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  if (positives == 0) {
    for (std::size_t i : negatives) out[i] = 1;
    return out;
  }
  const auto budget = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(positives)));
  const std::size_t k = std::min(budget, negatives.size());
  auto harder = [&](std::size_t a, std::size_t b) { return s_n[a] != s_n[b] ? s_n[a] > s_n[b] : a < b; };
  std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(k), negatives.end(),
                    harder);
  for (std::size_t j = 0; j < k; ++j) out[negatives[j]] = 1;
  return out;
}

inline double loss_complete(const ScoreMap& s_n, const Mask& g_n, const Mask& m) {
  return 1.0 - dice(s_n, g_n, m);
}

/// W = (S_n >= threshold) minus ignored pixels; treated as a constant.
inline Mask shrunk_weight_mask(const ScoreMap& s_n, const Mask& ignore, double w_threshold) {
  require_same_shape(s_n, ignore, "shrunk_weight_mask");
  Mask w(s_n.width(), s_n.height());
  for (std::size_t i = 0; i < s_n.size(); ++i) w[i] = (s_n[i] >= w_threshold && !ignore[i]) ? 1 : 0;
  return w;
}

/// Mean dice complement over the shrunk scales 1..n-1, restricted to W.
/// `scores` and `gts` hold S_1..S_n and G_1..G_n; G_n is not used.
inline double loss_shrunk(std::span<const ScoreMap> scores, std::span<const Mask> gts, const Mask& ignore,
                          double w_threshold, std::vector<double>* per_scale = nullptr) {
  if (scores.size() < 2) throw Error(ErrorKind::invalid_argument, "loss_shrunk needs n >= 2 scales");
  if (gts.size() != scores.size())
    throw Error(ErrorKind::dimension_mismatch, "loss_shrunk: score and ground-truth stacks differ in depth");
  const Mask w = shrunk_weight_mask(scores.back(), ignore, w_threshold);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    const double d = dice(scores[i], gts[i], w);
    if (per_scale) per_scale->push_back(d);
    acc += d;
  }
  return 1.0 - acc / static_cast<double>(scores.size() - 1);
}

inline double loss_shrunk(std::span<const ScoreMap> scores, std::span<const Mask> gts, double w_threshold) {
  return loss_shrunk(scores, gts, Mask(scores.back().width(), scores.back().height()), w_threshold);
}

/// lambda * L_c + (1 - lambda) * L_s. With a single scale L_s is undefined:
/// the breakdown reports shrunk = 0 and total = L_c.
inline LossBreakdown total_loss(std::span<const ScoreMap> scores, std::span<const Mask> gts, const Mask& ignore,
                                const LossConfig& cfg = {}) {
  validate(cfg);
  if (scores.empty()) throw Error(ErrorKind::invalid_argument, "total_loss: empty stack");
  if (gts.size() != scores.size())
    throw Error(ErrorKind::dimension_mismatch, "total_loss: score and ground-truth stacks differ in depth");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require_same_shape(scores.front(), scores[i], "total_loss");
    require_same_shape(scores.front(), gts[i], "total_loss");
  }

  LossBreakdown out;
  const Mask m = ohem_mask(scores.back(), gts.back(), ignore, cfg.ohem_ratio);
  out.complete = loss_complete(scores.back(), gts.back(), m);
  if (scores.size() < 2) {
    out.total = out.complete;
    return out;
  }
  out.shrunk = loss_shrunk(scores, gts, ignore, cfg.w_threshold, &out.per_scale_dice);
  out.total = cfg.lambda * out.complete + (1.0 - cfg.lambda) * out.shrunk;
  return out;
}

}  // namespace psenet
