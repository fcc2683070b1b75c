#pragma once

#include <vector>

#include "psenet/core.hpp"
#include "psenet/geometry.hpp"

namespace psenet {

struct ShrinkConfig {
  int n = 6;
  double m = 0.5;
};

inline void validate(const ShrinkConfig& cfg) {
  if (cfg.n < 1) throw Error(ErrorKind::invalid_argument, "shrink config: n must be >= 1");
  if (!(cfg.m > 0.0 && cfg.m <= 1.0))
    throw Error(ErrorKind::invalid_argument, "shrink config: m must lie in (0, 1]");
}

struct SceneAnnotation {
  int width = 0;
  int height = 0;
  std::vector<Polygon> instances;
  std::vector<Polygon> ignore_regions;
};

/// G_1..G_n, smallest kernel first, plus the full-scale "do not care" mask.
struct GroundTruthStack {
  std::vector<Mask> masks;
  Mask ignore_mask;
};

/// Ratios rising linearly from m (scale 1) to exactly 1 (scale n).
inline std::vector<double> compute_scale_ratios(const ShrinkConfig& cfg) {
  validate(cfg);
  if (cfg.n == 1) return {1.0};
  std::vector<double> ratios(static_cast<std::size_t>(cfg.n));
  for (int i = 1; i <= cfg.n; ++i)
    ratios[static_cast<std::size_t>(i - 1)] =
        1.0 - (1.0 - cfg.m) * static_cast<double>(cfg.n - i) / static_cast<double>(cfg.n - 1);
  return ratios;
}

/// Shrink margin Area * (1 - r^2) / Perimeter.
inline double compute_margin(const Polygon& p, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::invalid_argument, "scale ratio must lie in (0, 1]");
  const double perimeter = polygon_perimeter(p);
  if (!(perimeter > 0.0)) throw Error(ErrorKind::invalid_argument, "degenerate polygon");
  return polygon_area(p) * (1.0 - ratio * ratio) / perimeter;
}

inline void validate(const SceneAnnotation& ann) {
  if (ann.width <= 0 || ann.height <= 0)
    throw Error(ErrorKind::invalid_argument, "annotation dimensions must be positive");
}

/// Rasterizes each instance shrunk by its per-scale margin. Instances whose
/// shrink vanishes at a scale contribute nothing to that scale.
inline GroundTruthStack generate_kernel_stack(const SceneAnnotation& ann, const ShrinkConfig& cfg) {
  validate(ann);
  const auto ratios = compute_scale_ratios(cfg);
  GroundTruthStack out;
  out.masks.assign(ratios.size(), Mask(ann.width, ann.height));
  out.ignore_mask = Mask(ann.width, ann.height);

  for (const Polygon& inst : ann.instances) {
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      const double d = compute_margin(inst, ratios[i]);
      for (const Polygon& part : shrink_polygon(inst, d)) rasterize_into(out.masks[i], part);
    }
  }
  for (const Polygon& region : ann.ignore_regions) rasterize_into(out.ignore_mask, region);

  // Enforce G_i within G_{i+1}; a miter-joined offset can poke past a
  // rasterization boundary by a rounding hair on concave instances.
  for (std::size_t i = out.masks.size() - 1; i-- > 0;)
    for (std::size_t k = 0; k < out.masks[i].size(); ++k) out.masks[i][k] &= out.masks[i + 1][k];
  return out;
}

}  // namespace psenet
