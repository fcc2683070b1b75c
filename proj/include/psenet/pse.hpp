#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

#include "psenet/core.hpp"
#include "psenet/geometry.hpp"

namespace psenet {

/// Instance label raster: 0 is background, instances are 1..count.
struct LabelMap {
  Grid<std::uint32_t> labels;
  std::uint32_t count = 0;

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

enum class ShapeMode { oriented_rect, polygon };

struct DetectConfig {
  double binarize_threshold = 0.5;
  std::size_t min_kernel_area = 5;
  std::size_t min_instance_area = 10;
  ShapeMode shape_mode = ShapeMode::oriented_rect;
  double rdp_epsilon = 0.5;
  /// Outward margin added to each side of the rectangle fitted to pixel
  /// centers, so that it covers whole pixels rather than their centers.
  double rect_margin = 0.0;
};

inline void validate(const DetectConfig& cfg) {
  if (!(cfg.binarize_threshold >= 0.0 && cfg.binarize_threshold <= 1.0))
    throw Error(ErrorKind::invalid_argument, "binarize threshold must lie in [0, 1]");
  if (!(cfg.rdp_epsilon >= 0.0)) throw Error(ErrorKind::invalid_argument, "rdp epsilon must be >= 0");
  if (!(cfg.rect_margin >= 0.0)) throw Error(ErrorKind::invalid_argument, "rect margin must be >= 0");
}

namespace detail {

// Neighbour order: up, down, left, right.
inline constexpr std::array<int, 4> kDx{0, 0, -1, 1};
inline constexpr std::array<int, 4> kDy{-1, 1, 0, 0};

}  // namespace detail

/// 4-connected labeling; ids follow first encounter in a row-major scan.
inline LabelMap connected_components(const Mask& mask) {
  LabelMap out{Grid<std::uint32_t>(mask.width(), mask.height()), 0};
  std::vector<std::size_t> queue;
  queue.reserve(mask.size());
  const int w = mask.width(), h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t start = mask.index(x, y);
      if (!mask[start] || out.labels[start]) continue;
      const std::uint32_t id = ++out.count;
      out.labels[start] = id;
      queue.clear();
      queue.push_back(start);
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const int px = static_cast<int>(queue[head] % static_cast<std::size_t>(w));
        const int py = static_cast<int>(queue[head] / static_cast<std::size_t>(w));
        for (int k = 0; k < 4; ++k) {
          const int qx = px + detail::kDx[k], qy = py + detail::kDy[k];
          if (!mask.contains(qx, qy)) continue;
          const std::size_t q = mask.index(qx, qy);
          if (!mask[q] || out.labels[q]) continue;
          out.labels[q] = id;
          queue.push_back(q);
        }
      }
    }
  }
  return out;
}

/// Pixel count per id; index 0 holds the background count.
inline std::vector<std::size_t> label_areas(const LabelMap& lm) {
  std::vector<std::size_t> areas(static_cast<std::size_t>(lm.count) + 1, 0);
  for (auto id : lm.labels.values()) ++areas[id];
  return areas;
}

/// Drops ids whose area is below `min_area` and renumbers the rest 1..k in
/// their original order.
inline LabelMap filter_small(const LabelMap& lm, std::size_t min_area) {
  const auto areas = label_areas(lm);
  std::vector<std::uint32_t> remap(areas.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t id = 1; id < areas.size(); ++id)
    if (areas[id] >= min_area) remap[id] = ++next;
  LabelMap out{lm.labels, next};
  for (auto& id : out.labels.values()) id = remap[id];
  return out;
}

/// One scale-expansion step: multi-source FIFO BFS from every labeled pixel
/// into unlabeled pixels of `mask`. Conflicts go to whichever label reaches a
/// pixel first. Kernel pixels are never relabeled, even if `mask` lacks them.
inline LabelMap expand(const LabelMap& kernels, const Mask& mask) {
  require_same_shape(kernels.labels, mask, "expand");
  const int w = mask.width();
  LabelMap out = kernels;
  auto& labels = out.labels;

  // Seed order: ascending id, row-major within each id.
  std::vector<std::size_t> offsets(static_cast<std::size_t>(kernels.count) + 2, 0);
  for (auto id : labels.values())
    if (id) ++offsets[id + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::size_t> queue(offsets.back());
  {
    auto cursor = offsets;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (const auto id = labels[i]) queue[cursor[id]++] = i;
  }
  queue.reserve(mask.size());

  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t p = queue[head];
    const std::uint32_t id = labels[p];
    const int px = static_cast<int>(p % static_cast<std::size_t>(w));
    const int py = static_cast<int>(p / static_cast<std::size_t>(w));
    for (int k = 0; k < 4; ++k) {
      const int qx = px + detail::kDx[k], qy = py + detail::kDy[k];
      if (!mask.contains(qx, qy)) continue;
      const std::size_t q = mask.index(qx, qy);
      if (labels[q] || !mask[q]) continue;
      labels[q] = id;
      queue.push_back(q);
    }
  }
  return out;
}

/// Labels the components of S_1 (minus those below `min_kernel_area`) and
/// grows them through S_2..S_n in turn.
inline LabelMap progressive_expand(std::span<const Mask> stack, std::size_t min_kernel_area) {
  if (stack.empty()) throw Error(ErrorKind::invalid_argument, "progressive_expand: empty stack");
  for (const Mask& m : stack) require_same_shape(stack.front(), m, "progressive_expand");
  LabelMap labels = filter_small(connected_components(stack.front()), min_kernel_area);
  for (std::size_t i = 1; i < stack.size(); ++i) labels = expand(labels, stack[i]);
  return labels;
}

// ---------------------------------------------------------------------------
// Contours

/// Outer boundary of the pixel set of `id`, traced along pixel edges (vertices
/// on pixel corners) with the region kept to the right of the walk. Where two
/// region pixels meet only at a corner, that corner is cut by a quarter pixel
/// on each pass so the ring never touches itself. Holes are ignored.
inline Polygon extract_contour(const LabelMap& lm, std::uint32_t id) {
  const auto& labels = lm.labels;
  std::size_t first = labels.size();
  if (id != 0)
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == id) {
        first = i;
        break;
      }
  if (first == labels.size())
    throw Error(ErrorKind::invalid_argument, "extract_contour: id " + std::to_string(id) + " not present");

  const int w = labels.width();
  auto inside = [&](int x, int y) { return labels.contains(x, y) && labels(x, y) == id; };

  // Headings: 0 east, 1 south, 2 west, 3 north (image coordinates, y down).
  constexpr std::array<int, 4> hx{1, 0, -1, 0};
  constexpr std::array<int, 4> hy{0, 1, 0, -1};
  // Pixels ahead of vertex (vx, vy) per heading, as {left-ahead, right-ahead}
  // offsets from the vertex: east NE/SE, south SE/SW, west SW/NW, north NW/NE.
  constexpr std::array<std::array<int, 4>, 4> probe{{
      {0, -1, 0, 0},
      {0, 0, -1, 0},
      {-1, 0, -1, -1},
      {-1, -1, 0, -1},
  }};

  const int sx = static_cast<int>(first % static_cast<std::size_t>(w));
  const int sy = static_cast<int>(first / static_cast<std::size_t>(w));
  int vx = sx + 1, vy = sy, dir = 0;  // walked the top edge of the first pixel
  std::vector<Point> ring{{static_cast<double>(sx), static_cast<double>(sy)}};

  const std::size_t limit = 4 * labels.size() + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    const auto& o = probe[static_cast<std::size_t>(dir)];
    const bool left = inside(vx + o[0], vy + o[1]);
    const bool right = inside(vx + o[2], vy + o[3]);
    int next = dir;
    bool saddle = false;
    if (!right) {
      next = (dir + 1) % 4;
      saddle = left;
    } else if (left) {
      next = (dir + 3) % 4;
    }
    const Point v{static_cast<double>(vx), static_cast<double>(vy)};
    if (saddle) {
      ring.push_back(v - 0.25 * Point{static_cast<double>(hx[dir]), static_cast<double>(hy[dir])});
      ring.push_back(v + 0.25 * Point{static_cast<double>(hx[next]), static_cast<double>(hy[next])});
    } else if (next != dir) {
      ring.push_back(v);
    }
    dir = next;
    vx += hx[dir];
    vy += hy[dir];
    // Back at the start corner, which is already ring[0].
    if (vx == sx && vy == sy) return Polygon(std::move(ring));
  }
  throw Error(ErrorKind::invariant, "extract_contour: boundary walk did not close");
}

// ---------------------------------------------------------------------------
// Detection

struct Detection {
  std::variant<OrientedRect, Polygon> shape;
  double score = 0.0;
};

/// Polygon outline of a detection (rectangle corners or the polygon itself).
inline Polygon outline(const Detection& det) {
  if (const auto* rect = std::get_if<OrientedRect>(&det.shape)) return Polygon(rect->corners());
  return std::get<Polygon>(det.shape);
}

namespace detail {

inline Polygon simplified_contour(const Polygon& contour, double epsilon) {
  for (double eps = epsilon; eps > 1e-3; eps *= 0.5) {
    auto pts = rdp_simplify_ring(contour.vertices(), eps);
    if (auto p = Polygon::make(std::move(pts))) return *p;
  }
  return contour;
}

}  // namespace detail

/// Binarizes the score stack, runs progressive expansion, drops small
/// instances, and fits one shape per instance. Confidence is the mean S_n
/// score over the instance's pixels.
inline std::vector<Detection> detect(std::span<const ScoreMap> stack, const DetectConfig& cfg) {
  validate(cfg);
  if (stack.empty()) throw Error(ErrorKind::invalid_argument, "detect: empty stack");
  std::vector<Mask> masks;
  masks.reserve(stack.size());
  for (const ScoreMap& s : stack) {
    require_same_shape(stack.front(), s, "detect");
    masks.push_back(binarize(s, cfg.binarize_threshold));
  }
  const LabelMap labels = progressive_expand(masks, cfg.min_kernel_area);
  const ScoreMap& full = stack.back();

  std::vector<std::vector<Point>> centers(static_cast<std::size_t>(labels.count) + 1);
  std::vector<double> score_sum(centers.size(), 0.0);
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (const auto id = labels.labels(x, y)) {
        centers[id].push_back({x + 0.5, y + 0.5});
        score_sum[id] += full(x, y);
      }

  std::vector<Detection> out;
  for (std::uint32_t id = 1; id <= labels.count; ++id) {
    const auto& pts = centers[id];
    if (pts.size() < cfg.min_instance_area || pts.empty()) continue;
    Detection det;
    det.score = score_sum[id] / static_cast<double>(pts.size());
    if (cfg.shape_mode == ShapeMode::oriented_rect) {
      OrientedRect rect = min_area_rect(pts);
      rect.width += 2.0 * cfg.rect_margin;
      rect.height += 2.0 * cfg.rect_margin;
      if (!(rect.width > 0.0 && rect.height > 0.0)) continue;
      det.shape = canonical(rect);
    } else {
      det.shape = detail::simplified_contour(extract_contour(labels, id), cfg.rdp_epsilon);
    }
    out.push_back(std::move(det));
  }
  return out;
}

}  // namespace psenet
