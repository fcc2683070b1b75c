#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "psenet/core.hpp"
#include "psenet/geometry.hpp"
#include "psenet/labels.hpp"
#include "psenet/rng.hpp"

namespace psenet {

/// Scene generator settings. Sizes are in pixels; `min_gap`/`max_gap` is the
/// distance between the nearest pixel centers of an adjacent pair's masks
/// (gap 1 means the two masks share an edge somewhere).
struct SynthConfig {
  int width = 640;
  int height = 640;
  int min_instances = 2;
  int max_instances = 8;
  double frac_axis_rect = 0.4;
  double frac_rotated_quad = 0.4;
  double frac_curved_band = 0.2;
  double min_thickness = 14.0;
  double max_thickness = 32.0;
  double min_aspect = 2.5;
  double max_aspect = 7.0;
  double max_rotation_deg = 40.0;
  /// Chance that a placement spawns an adjacent partner.
  double pair_probability = 0.5;
  int min_gap = 1;
  int max_gap = 3;
  /// Minimum pixel distance between instances that are not adjacent pairs.
  double min_spacing = 8.0;
  int max_attempts = 400;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& cfg) {
  auto fail = [](const char* what) { throw Error(ErrorKind::invalid_argument, std::string("synth config: ") + what); };
  if (cfg.width <= 0 || cfg.height <= 0) fail("image size must be positive");
  if (cfg.min_instances < 0 || cfg.max_instances < cfg.min_instances) fail("bad instance count range");
  const double fsum = cfg.frac_axis_rect + cfg.frac_rotated_quad + cfg.frac_curved_band;
  if (cfg.frac_axis_rect < 0 || cfg.frac_rotated_quad < 0 || cfg.frac_curved_band < 0 || std::abs(fsum - 1.0) > 1e-9)
    fail("shape fractions must be non-negative and sum to 1");
  if (!(cfg.min_thickness >= 2.0) || cfg.max_thickness < cfg.min_thickness) fail("bad thickness range");
  if (!(cfg.min_aspect >= 1.0) || cfg.max_aspect < cfg.min_aspect) fail("bad aspect range");
  if (cfg.min_gap < 1 || cfg.max_gap < cfg.min_gap) fail("gaps must satisfy 1 <= min_gap <= max_gap");
  if (!(cfg.pair_probability >= 0.0 && cfg.pair_probability <= 1.0)) fail("pair probability must lie in [0, 1]");
  if (!(cfg.min_spacing >= 0.0)) fail("spacing must be >= 0");
  if (cfg.max_attempts < 1) fail("max_attempts must be >= 1");
}

struct NoiseConfig {
  double flip_prob = 0.0;
  int blur_radius = 0;
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const NoiseConfig& cfg) {
  if (!(cfg.flip_prob >= 0.0 && cfg.flip_prob < 0.5))
    throw Error(ErrorKind::invalid_argument, "noise: flip probability must lie in [0, 0.5)");
  if (cfg.blur_radius < 0) throw Error(ErrorKind::invalid_argument, "noise: blur radius must be >= 0");
  if (!(cfg.jitter >= 0.0 && cfg.jitter < 0.5))
    throw Error(ErrorKind::invalid_argument, "noise: jitter must lie in [0, 0.5)");
}

/// Minimum Euclidean distance between set pixel centers of two masks, or
/// +inf if either is empty. Only boundary pixels are compared.
inline double mask_distance(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "mask_distance");
  auto boundary = [](const Mask& m) {
    std::vector<std::array<int, 2>> out;
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        if (!m(x, y)) continue;
        const bool edge = !m.contains(x - 1, y) || !m(x - 1, y) || !m.contains(x + 1, y) || !m(x + 1, y) ||
                          !m.contains(x, y - 1) || !m(x, y - 1) || !m.contains(x, y + 1) || !m(x, y + 1);
        if (edge) out.push_back({x, y});
      }
    return out;
  };
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) return 0.0;
  const auto pa = boundary(a);
  const auto pb = boundary(b);
  double best2 = std::numeric_limits<double>::infinity();
  for (const auto& p : pa)
    for (const auto& q : pb) {
      const double dx = p[0] - q[0], dy = p[1] - q[1];
      best2 = std::min(best2, dx * dx + dy * dy);
    }
  return std::sqrt(best2);
}

namespace detail {

enum class ShapeKind { axis_rect, rotated_quad, curved_band };

inline Polygon rect_polygon(Point center, double length, double thickness, double angle) {
  const OrientedRect r{center, length, thickness, angle};
  return Polygon(r.corners());
}

/// 14-vertex band along a circular arc: 7 points on the outer arc, 7 on the inner.
inline Polygon band_polygon(Point center, double radius, double thickness, double start, double span) {
  std::vector<Point> pts;
  const double outer = radius + 0.5 * thickness;
  const double inner = radius - 0.5 * thickness;
  for (int k = 0; k < 7; ++k) {
    const double a = start + span * k / 6.0;
    pts.push_back({center.x + outer * std::cos(a), center.y + outer * std::sin(a)});
  }
  for (int k = 6; k >= 0; --k) {
    const double a = start + span * k / 6.0;
    pts.push_back({center.x + inner * std::cos(a), center.y + inner * std::sin(a)});
  }
  return Polygon(std::move(pts));
}

inline bool inside_image(const Polygon& p, int width, int height) {
  for (const Point& q : p.vertices())
    if (q.x < 1.0 || q.y < 1.0 || q.x > width - 1.0 || q.y > height - 1.0) return false;
  return true;
}

/// Shape template that can emit a copy of itself pushed outward by `offset`
/// along its thickness direction (for building adjacent pairs).
struct ShapeDraw {
  ShapeKind kind;
  Point center;
  double length;
  double thickness;
  double angle;   // rect direction
  double radius;  // band mid radius
  double start;   // band start angle
  double span;    // band angular span

  Polygon make(double offset) const {
    switch (kind) {
      case ShapeKind::axis_rect: {
        const double x0 = std::round(center.x - 0.5 * length);
        const double y0 = std::round(center.y - 0.5 * thickness) + offset;
        const double l = std::round(length), t = std::round(thickness);
        return Polygon({{x0, y0}, {x0 + l, y0}, {x0 + l, y0 + t}, {x0, y0 + t}});
      }
      case ShapeKind::rotated_quad: {
        const Point normal{-std::sin(angle), std::cos(angle)};
        return rect_polygon(center + offset * normal, length, thickness, angle);
      }
      case ShapeKind::curved_band:
        return band_polygon(center, radius + offset, thickness, start, span);
    }
    throw Error(ErrorKind::invariant, "unknown shape kind");
  }
};

inline ShapeDraw draw_shape(const SynthConfig& cfg, Xorshift64Star& rng) {
  ShapeDraw s{};
  const double pick = rng.uniform();
  if (pick < cfg.frac_axis_rect)
    s.kind = ShapeKind::axis_rect;
  else if (pick < cfg.frac_axis_rect + cfg.frac_rotated_quad)
    s.kind = ShapeKind::rotated_quad;
  else
    s.kind = ShapeKind::curved_band;
  s.thickness = rng.uniform(cfg.min_thickness, cfg.max_thickness);
  s.length = s.thickness * rng.uniform(cfg.min_aspect, cfg.max_aspect);
  s.length = std::min(s.length, 0.8 * std::min(cfg.width, cfg.height));
  s.center = {rng.uniform(0.0, cfg.width), rng.uniform(0.0, cfg.height)};
  s.angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * std::numbers::pi / 180.0;
  s.span = rng.uniform(0.6, 1.6);
  s.radius = std::max(s.length / s.span, s.thickness);
  s.start = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return s;
}

// Pixels within `radius` of any set pixel of `m`, as a new mask.
inline Mask dilate(const Mask& m, double radius) {
  Mask out(m.width(), m.height());
  const int r = static_cast<int>(std::ceil(radius));
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy < radius * radius && out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
    }
  return out;
}

inline bool overlaps(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) return true;
  return false;
}

}  // namespace detail

/// Random scene of non-intersecting text-like polygons, including adjacent
/// pairs at controlled pixel gaps. Deterministic per seed.
inline SceneAnnotation gen_scene(const SynthConfig& cfg) {
  validate(cfg);
  Xorshift64Star rng(cfg.seed);
  SceneAnnotation ann{cfg.width, cfg.height, {}, {}};
  const auto target = static_cast<int>(rng.uniform_int(cfg.min_instances, cfg.max_instances));
  if (target == 0) return ann;

  // Pixels closer than min_spacing to an already placed instance.
  Mask forbidden(cfg.width, cfg.height);
  auto accept = [&](const Mask& m) {
    const Mask halo = detail::dilate(m, cfg.min_spacing);
    for (std::size_t i = 0; i < halo.size(); ++i) forbidden[i] |= halo[i];
  };

  int attempts = 0;
  while (static_cast<int>(ann.instances.size()) < target) {
    if (++attempts > cfg.max_attempts)
      throw Error(ErrorKind::invalid_argument, "gen_scene: could not place instances after bounded retries");
    const auto shape = detail::draw_shape(cfg, rng);
    const bool want_pair =
        static_cast<int>(ann.instances.size()) + 2 <= target && rng.bernoulli(cfg.pair_probability);
    const int gap = static_cast<int>(rng.uniform_int(cfg.min_gap, cfg.max_gap));

    const Polygon first = shape.make(0.0);
    if (!detail::inside_image(first, cfg.width, cfg.height)) continue;
    const Mask first_mask = rasterize_polygon(first, cfg.width, cfg.height);
    if (count_set(first_mask) == 0 || detail::overlaps(first_mask, forbidden)) continue;

    if (!want_pair) {
      ann.instances.push_back(first);
      accept(first_mask);
      continue;
    }

    // Push the partner outward until the mask gap lands in [gap, gap + 1).
    std::optional<Polygon> partner;
    Mask partner_mask;
    if (shape.kind == detail::ShapeKind::axis_rect) {
      // Rows y0..y0+t-1, partner starts at row y0+t-1+gap.
      auto cand = shape.make(std::round(shape.thickness) + gap - 1.0);
      partner_mask = rasterize_polygon(cand, cfg.width, cfg.height);
      partner = std::move(cand);
    } else {
      for (double offset = shape.thickness + gap - 1.5; offset < shape.thickness + gap + 2.0; offset += 0.05) {
        auto cand = shape.make(offset);
        auto cand_mask = rasterize_polygon(cand, cfg.width, cfg.height);
        const double d = mask_distance(first_mask, cand_mask);
        if (d >= gap) {
          if (d < gap + 1.0) {
            partner = std::move(cand);
            partner_mask = std::move(cand_mask);
          }
          break;
        }
      }
    }
    if (!partner || !detail::inside_image(*partner, cfg.width, cfg.height)) continue;
    if (count_set(partner_mask) == 0 || detail::overlaps(partner_mask, forbidden)) continue;
    const double d = mask_distance(first_mask, partner_mask);
    if (d < gap || d >= gap + 1.0) continue;

    ann.instances.push_back(first);
    ann.instances.push_back(std::move(*partner));
    accept(first_mask);
    accept(partner_mask);
  }
  return ann;
}

/// Ground truth to score maps: box blur, uniform jitter, then random flips
/// s -> 1 - s, clamped to [0, 1]. Zero noise returns the masks as 0/1 scores.
inline std::vector<ScoreMap> simulate_prediction(const GroundTruthStack& gt, const NoiseConfig& noise) {
  validate(noise);
  Xorshift64Star rng(noise.seed);
  std::vector<ScoreMap> out;
  out.reserve(gt.masks.size());
  for (const Mask& mask : gt.masks) {
    ScoreMap s = to_scores(mask);
    if (noise.blur_radius > 0) {
      const int r = noise.blur_radius;
      ScoreMap blurred(s.width(), s.height());
      for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x) {
          double acc = 0.0;
          int count = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              if (s.contains(x + dx, y + dy)) {
                acc += s(x + dx, y + dy);
                ++count;
              }
          blurred(x, y) = acc / count;
        }
      s = std::move(blurred);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      double v = s[i];
      if (noise.jitter > 0.0) v += rng.uniform(-noise.jitter, noise.jitter);
      if (noise.flip_prob > 0.0 && rng.bernoulli(noise.flip_prob)) v = 1.0 - v;
      s[i] = std::clamp(v, 0.0, 1.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Random nested binary stack (S_n Bernoulli(density), each smaller scale a
/// random subset of the next), for benchmarking.
inline std::vector<Mask> random_nested_stack(int width, int height, int n, double density, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "random stack needs n >= 1");
  Xorshift64Star rng(seed);
  std::vector<Mask> stack(static_cast<std::size_t>(n), Mask(width, height));
  for (std::size_t i = 0; i < stack.back().size(); ++i) stack.back()[i] = rng.bernoulli(density);
  for (int k = n - 2; k >= 0; --k) {
    auto& cur = stack[static_cast<std::size_t>(k)];
    const auto& next = stack[static_cast<std::size_t>(k) + 1];
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = next[i] && rng.bernoulli(0.85);
  }
  return stack;
}

// ---------------------------------------------------------------------------
// Augmentation

inline constexpr std::array<double, 4> kAugmentScales{0.5, 1.0, 2.0, 3.0};
inline constexpr double kAugmentMaxRotationDeg = 10.0;
inline constexpr int kAugmentCrop = 640;

struct AugmentParams {
  double scale = 1.0;
  bool flip = false;
  /// Counter-clockwise on screen, about the scaled image center.
  double rotation_deg = 0.0;
  int crop_x = 0;
  int crop_y = 0;
};

inline AugmentParams draw_augment_params(const SceneAnnotation& ann, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  AugmentParams p;
  p.scale = kAugmentScales[static_cast<std::size_t>(rng.uniform_int(0, 3))];
  p.flip = rng.bernoulli(0.5);
  p.rotation_deg = rng.uniform(-kAugmentMaxRotationDeg, kAugmentMaxRotationDeg);
  const auto w = static_cast<int>(std::lround(ann.width * p.scale));
  const auto h = static_cast<int>(std::lround(ann.height * p.scale));
  p.crop_x = w > kAugmentCrop ? static_cast<int>(rng.uniform_int(0, w - kAugmentCrop)) : 0;
  p.crop_y = h > kAugmentCrop ? static_cast<int>(rng.uniform_int(0, h - kAugmentCrop)) : 0;
  return p;
}

namespace detail {

/// Parts of `p` inside the axis-aligned window [0, size]^2.
inline std::vector<Polygon> clip_to_window(std::vector<Point> pts, double size) {
  namespace bg = boost::geometry;
  auto ring = drop_repeated(std::move(pts), 0.0);
  if (ring.size() < 3 || signed_area(ring) == 0.0) return {};
  if (signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
  bool contained = true;
  for (const Point& q : ring) contained = contained && q.x >= 0 && q.y >= 0 && q.x <= size && q.y <= size;
  if (contained) {
    if (auto poly = Polygon::make(ring)) return {*poly};
    return {};
  }

  BgPolygon subject;
  for (const Point& q : ring) subject.outer().emplace_back(q.x, q.y);
  subject.outer().emplace_back(ring[0].x, ring[0].y);
  BgPolygon window;
  for (const Point& q : std::array<Point, 5>{{{0, 0}, {size, 0}, {size, size}, {0, size}, {0, 0}}})
    window.outer().emplace_back(q.x, q.y);
  BgMultiPolygon parts;
  bg::intersection(subject, window, parts);

  std::vector<Polygon> out;
  for (const auto& part : parts) {
    auto pts2 = drop_repeated(ring_points(part), 1e-12);
    if (pts2.size() < 3 || std::abs(signed_area(pts2)) < 1e-9) continue;
    if (auto poly = Polygon::make(std::move(pts2))) out.push_back(std::move(*poly));
  }
  return out;
}

}  // namespace detail

/// Scale, optional horizontal flip (x -> W' - x on the scaled canvas),
/// rotation about the canvas center, then a 640 x 640 crop. Polygons are
/// clipped to the crop window; fragments with fewer than 3 vertices vanish.
inline SceneAnnotation augment(const SceneAnnotation& ann, const AugmentParams& p) {
  validate(ann);
  const double w = std::lround(ann.width * p.scale);
  const double h = std::lround(ann.height * p.scale);
  const double theta = -p.rotation_deg * std::numbers::pi / 180.0;  // y points down
  const double c = std::cos(theta), s = std::sin(theta);
  const Point pivot{0.5 * w, 0.5 * h};

  auto transform = [&](const Polygon& poly) {
    std::vector<Point> pts;
    for (Point q : poly.vertices()) {
      q = p.scale * q;
      if (p.flip) q.x = w - q.x;
      if (p.rotation_deg != 0.0) {
        const Point d = q - pivot;
        q = pivot + Point{c * d.x - s * d.y, s * d.x + c * d.y};
      }
      q = q - Point{static_cast<double>(p.crop_x), static_cast<double>(p.crop_y)};
      pts.push_back(q);
    }
    return detail::clip_to_window(std::move(pts), kAugmentCrop);
  };

  SceneAnnotation out{kAugmentCrop, kAugmentCrop, {}, {}};
  for (const auto& poly : ann.instances)
    for (auto& part : transform(poly)) out.instances.push_back(std::move(part));
  for (const auto& poly : ann.ignore_regions)
    for (auto& part : transform(poly)) out.ignore_regions.push_back(std::move(part));
  return out;
}

inline SceneAnnotation augment(const SceneAnnotation& ann, std::uint64_t seed) {
  return augment(ann, draw_augment_params(ann, seed));
}

}  // namespace psenet
