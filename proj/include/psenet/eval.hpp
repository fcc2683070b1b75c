#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "psenet/core.hpp"
#include "psenet/geometry.hpp"

namespace psenet {

inline double mask_iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Rasterized intersection-over-union on a width x height grid.
inline double iou(const Polygon& a, const Polygon& b, int width, int height) {
  return mask_iou(rasterize_polygon(a, width, height), rasterize_polygon(b, width, height));
}

struct ScoredPolygon {
  Polygon polygon;
  double score = 1.0;
};

struct MatchPair {
  std::size_t detection;
  std::size_t gt;
  double iou;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_gts;
  std::vector<std::size_t> ignored_detections;
  std::size_t num_detections = 0;
  std::size_t num_gts = 0;
};

inline constexpr double kIgnoreOverlap = 0.5;

/// Greedy one-to-one matching in descending detection confidence (ties by
/// index). Each detection takes the unmatched gt of highest IoU at or above
/// `iou_threshold`. Unmatched detections lying at least half inside the
/// ignore regions are set aside as ignored.
inline MatchResult match(std::span<const ScoredPolygon> dets, std::span<const Polygon> gts,
                         std::span<const Polygon> ignores, int width, int height, double iou_threshold = 0.5) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::invalid_argument, "match: grid must be non-empty");
  MatchResult out;
  out.num_detections = dets.size();
  out.num_gts = gts.size();

  std::vector<Mask> det_masks, gt_masks;
  for (const auto& d : dets) det_masks.push_back(rasterize_polygon(d.polygon, width, height));
  for (const auto& g : gts) gt_masks.push_back(rasterize_polygon(g, width, height));
  Mask ignore_mask(width, height);
  for (const auto& r : ignores) rasterize_into(ignore_mask, r);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<char> gt_taken(gts.size(), 0);
  for (std::size_t d : order) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g]) continue;
      const double v = mask_iou(det_masks[d], gt_masks[g]);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      gt_taken[best_gt] = 1;
      out.pairs.push_back({d, best_gt, best});
      continue;
    }
    const std::size_t area = count_set(det_masks[d]);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < ignore_mask.size(); ++i) covered += det_masks[d][i] && ignore_mask[i];
    if (area > 0 && static_cast<double>(covered) >= kIgnoreOverlap * static_cast<double>(area))
      out.ignored_detections.push_back(d);
    else
      out.unmatched_detections.push_back(d);
  }
  std::sort(out.unmatched_detections.begin(), out.unmatched_detections.end());
  std::sort(out.ignored_detections.begin(), out.ignored_detections.end());
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_taken[g]) out.unmatched_gts.push_back(g);
  return out;
}

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

inline Prf prf(std::size_t matches, std::size_t detections, std::size_t gts) {
  Prf out;
  if (detections) out.precision = static_cast<double>(matches) / static_cast<double>(detections);
  if (gts) out.recall = static_cast<double>(matches) / static_cast<double>(gts);
  if (out.precision + out.recall > 0.0)
    out.f_measure = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

/// Precision counts only non-ignored detections.
inline Prf prf(const MatchResult& m) {
  return prf(m.pairs.size(), m.num_detections - m.ignored_detections.size(), m.num_gts);
}

/// Accumulates counts across images before computing P/R/F.
struct EvalTally {
  std::size_t matches = 0;
  std::size_t detections = 0;
  std::size_t gts = 0;

  void add(const MatchResult& m) {
    matches += m.pairs.size();
    detections += m.num_detections - m.ignored_detections.size();
    gts += m.num_gts;
  }
  Prf result() const { return prf(matches, detections, gts); }
};

}  // namespace psenet
