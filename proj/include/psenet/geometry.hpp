#pragma once

#ifndef BOOST_ALLOW_DEPRECATED_HEADERS
#define BOOST_ALLOW_DEPRECATED_HEADERS
#endif
#ifndef BOOST_GEOMETRY_NO_ROBUSTNESS
#define BOOST_GEOMETRY_NO_ROBUSTNESS
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

#include "psenet/core.hpp"

namespace psenet {

inline double signed_area(std::span<const Point> pts) {
  double acc = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

inline double distance_to_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point q = a + t * ab;
  return std::hypot(p.x - q.x, p.y - q.y);
}

namespace detail {

inline int orientation_sign(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Closed-segment intersection, touching included.
inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation_sign(p1, p2, q1);
  const int o2 = orientation_sign(p1, p2, q2);
  const int o3 = orientation_sign(q1, q2, p1);
  const int o4 = orientation_sign(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

inline bool is_simple_ring(std::span<const Point> pts) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = pts[i];
    const Point b = pts[(i + 1) % n];
    const Point c = pts[(i + 2) % n];
    // Consecutive edges folding back onto each other.
    if (cross(b - a, c - b) == 0.0 && dot(b - a, c - b) < 0.0) return false;
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(a, b, pts[j], pts[(j + 1) % n])) return false;
    }
  }
  return true;
}

inline std::vector<Point> drop_repeated(std::vector<Point> pts, double tol) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    if (!out.empty() && std::abs(out.back().x - p.x) <= tol && std::abs(out.back().y - p.y) <= tol)
      continue;
    out.push_back(p);
  }
  while (out.size() > 1 && std::abs(out.front().x - out.back().x) <= tol &&
         std::abs(out.front().y - out.back().y) <= tol)
    out.pop_back();
  return out;
}

inline std::string validate_ring(std::span<const Point> pts) {
  if (pts.size() < 3) return "polygon needs at least 3 distinct vertices";
  for (const Point& p : pts)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return "polygon has non-finite coordinates";
  if (signed_area(pts) == 0.0) return "polygon has zero area";
  if (!is_simple_ring(pts)) return "polygon is self-intersecting";
  return {};
}

}  // namespace detail

/// Simple polygon in pixel coordinates, implicitly closed.
/// Construction drops repeated consecutive vertices (including an explicit
/// closing vertex), rejects degenerate or self-intersecting rings, and
/// reorders vertices so that the shoelace signed area is positive.
class Polygon {
 public:
  explicit Polygon(std::vector<Point> vertices) : vertices_(detail::drop_repeated(std::move(vertices), 0.0)) {
    if (auto why = detail::validate_ring(vertices_); !why.empty())
      throw Error(ErrorKind::invalid_argument, "invalid polygon: " + why);
    if (signed_area(vertices_) < 0.0) std::reverse(vertices_.begin(), vertices_.end());
  }

  /// Non-throwing construction.
  static std::optional<Polygon> make(std::vector<Point> vertices) {
    auto pts = detail::drop_repeated(std::move(vertices), 0.0);
    if (!detail::validate_ring(pts).empty()) return std::nullopt;
    return Polygon(std::move(pts));
  }

  std::span<const Point> vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  const Point& operator[](std::size_t i) const noexcept { return vertices_[i]; }

  friend bool operator==(const Polygon&, const Polygon&) = default;

 private:
  std::vector<Point> vertices_;
};

inline double polygon_area(const Polygon& p) { return signed_area(p.vertices()); }

inline double polygon_perimeter(const Polygon& p) {
  double acc = 0.0;
  const auto v = p.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point d = v[(i + 1) % v.size()] - v[i];
    acc += std::hypot(d.x, d.y);
  }
  return acc;
}

/// Throwing overloads for raw vertex lists.
inline double polygon_area(std::vector<Point> pts) { return polygon_area(Polygon(std::move(pts))); }
inline double polygon_perimeter(std::vector<Point> pts) {
  return polygon_perimeter(Polygon(std::move(pts)));
}

inline constexpr double kBoundaryTolerance = 1e-9;

inline double distance_to_boundary(const Polygon& p, Point q) {
  double best = std::numeric_limits<double>::infinity();
  const auto v = p.vertices();
  for (std::size_t i = 0; i < v.size(); ++i)
    best = std::min(best, distance_to_segment(q, v[i], v[(i + 1) % v.size()]));
  return best;
}

/// Even-odd rule; points on the boundary count as inside.
inline bool point_in_polygon(const Polygon& p, Point q) {
  if (distance_to_boundary(p, q) <= kBoundaryTolerance) return true;
  bool inside = false;
  const auto v = p.vertices();
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const Point& a = v[i];
    const Point& b = v[j];
    if ((a.y > q.y) != (b.y > q.y)) {
      const double x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (q.x < x) inside = !inside;
    }
  }
  return inside;
}

inline Polygon translate(const Polygon& p, Point offset) {
  std::vector<Point> pts(p.vertices().begin(), p.vertices().end());
  for (auto& q : pts) q = q + offset;
  return Polygon(std::move(pts));
}

inline Polygon scale(const Polygon& p, double factor) {
  std::vector<Point> pts(p.vertices().begin(), p.vertices().end());
  for (auto& q : pts) q = factor * q;
  return Polygon(std::move(pts));
}

// ---------------------------------------------------------------------------
// Inward offsetting

inline constexpr double kMiterLimit = 2.0;
inline constexpr double kOffsetTolerance = 0.05;

namespace detail {
namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, false>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;

inline BgPolygon to_boost(const Polygon& p) {
  BgPolygon out;
  for (const Point& q : p.vertices()) out.outer().emplace_back(q.x, q.y);
  out.outer().emplace_back(p[0].x, p[0].y);
  return out;
}

inline std::vector<Point> ring_points(const BgPolygon& poly) {
  std::vector<Point> pts;
  pts.reserve(poly.outer().size());
  for (const auto& q : poly.outer()) pts.push_back({q.x(), q.y()});
  return pts;
}
}  // namespace detail

/// Inward offset by `d` pixels with miter joins (miter limit 2.0). Returns
/// every resulting part; empty when `d` reaches the inscribed radius.
inline std::vector<Polygon> shrink_polygon(const Polygon& p, double d) {
  if (!(d >= 0.0) || !std::isfinite(d))
    throw Error(ErrorKind::invalid_argument, "shrink distance must be a finite value >= 0");
  if (d == 0.0) return {p};

  namespace bg = boost::geometry;
  const detail::BgPolygon input = detail::to_boost(p);
  detail::BgMultiPolygon result;
  bg::strategy::buffer::distance_symmetric<double> distance(-d);
  bg::strategy::buffer::side_straight side;
  bg::strategy::buffer::join_miter join(kMiterLimit);
  bg::strategy::buffer::end_flat end;
  bg::strategy::buffer::point_square point;
  bg::buffer(input, result, distance, side, join, end, point);

  std::vector<Polygon> parts;
  for (const auto& poly : result) {
    // Holes cannot arise from an inward offset of a hole-free ring.
    auto pts = detail::drop_repeated(detail::ring_points(poly), 1e-12);
    if (pts.size() < 3 || std::abs(signed_area(pts)) < 1e-9) continue;
    if (auto part = Polygon::make(std::move(pts))) parts.push_back(std::move(*part));
  }
  std::sort(parts.begin(), parts.end(), [](const Polygon& a, const Polygon& b) {
    const Point pa = a[0], pb = b[0];
    return pa.y != pb.y ? pa.y < pb.y : pa.x < pb.x;
  });
  return parts;
}

// ---------------------------------------------------------------------------
// Rasterization

/// Sets `value` on every pixel whose center (x + 0.5, y + 0.5) lies inside or
/// on the polygon. Pixels outside the grid are clipped.
inline void rasterize_into(Mask& mask, const Polygon& p, std::uint8_t value = 1) {
  const auto v = p.vertices();
  const int width = mask.width();
  const int height = mask.height();
  if (width == 0 || height == 0) return;

  double ymin = v[0].y, ymax = v[0].y;
  for (const Point& q : v) {
    ymin = std::min(ymin, q.y);
    ymax = std::max(ymax, q.y);
  }
  const int row_lo = std::max(0, static_cast<int>(std::ceil(ymin - 0.5 - kBoundaryTolerance)));
  const int row_hi = std::min(height - 1, static_cast<int>(std::floor(ymax - 0.5 + kBoundaryTolerance)));

  auto fill_span = [&](int row, double x0, double x1) {
    const int lo = std::max(0, static_cast<int>(std::ceil(x0 - 0.5 - kBoundaryTolerance)));
    const int hi = std::min(width - 1, static_cast<int>(std::floor(x1 - 0.5 + kBoundaryTolerance)));
    for (int x = lo; x <= hi; ++x) mask(x, row) = value;
  };

  std::vector<double> xs;
  for (int row = row_lo; row <= row_hi; ++row) {
    const double yc = row + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point& a = v[i];
      const Point& b = v[(i + 1) % v.size()];
      if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y))
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      if (std::abs(a.y - yc) <= kBoundaryTolerance && std::abs(b.y - yc) <= kBoundaryTolerance)
        fill_span(row, std::min(a.x, b.x), std::max(a.x, b.x));
      else if (std::abs(a.y - yc) <= kBoundaryTolerance)
        fill_span(row, a.x, a.x);
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) fill_span(row, xs[k], xs[k + 1]);
  }
}

inline Mask rasterize_polygon(const Polygon& p, int width, int height) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorKind::invalid_argument, "raster dimensions must be positive");
  Mask mask(width, height);
  rasterize_into(mask, p);
  return mask;
}

// ---------------------------------------------------------------------------
// Minimum-area rectangle

struct OrientedRect {
  Point center;
  double width = 0.0;
  double height = 0.0;
  /// Direction of the width side, radians in [-pi/2, pi/2).
  double angle = 0.0;

  double area() const noexcept { return width * height; }

  /// Corners in counter-clockwise order (positive signed area).
  std::vector<Point> corners() const {
    const Point u{std::cos(angle), std::sin(angle)};
    const Point w{-u.y, u.x};
    const Point hu = (0.5 * width) * u;
    const Point hw = (0.5 * height) * w;
    return {center - hu - hw, center + hu - hw, center + hu + hw, center - hu + hw};
  }
};

/// Brings the rectangle to canonical form: width >= height, angle in [-pi/2, pi/2).
inline OrientedRect canonical(OrientedRect r) {
  if (r.width < r.height) {
    std::swap(r.width, r.height);
    r.angle += std::numbers::pi / 2;
  }
  const double period = std::numbers::pi;
  r.angle = std::fmod(r.angle + period / 2, period);
  if (r.angle < 0) r.angle += period;
  r.angle -= period / 2;
  if (r.angle >= period / 2) r.angle -= period;
  return r;
}

/// Andrew's monotone chain; counter-clockwise, collinear points removed.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
inline OrientedRect min_area_rect(std::span<const Point> points) {
  if (points.empty()) throw Error(ErrorKind::invalid_argument, "min_area_rect needs at least one point");
  const auto hull = convex_hull(std::vector<Point>(points.begin(), points.end()));

  if (hull.size() == 1) return OrientedRect{hull[0], 0.0, 0.0, 0.0};
  if (hull.size() == 2) {
    const Point d = hull[1] - hull[0];
    return canonical(OrientedRect{0.5 * (hull[0] + hull[1]), std::hypot(d.x, d.y), 0.0, std::atan2(d.y, d.x)});
  }

  const std::size_t n = hull.size();
  auto next = [n](std::size_t i) { return (i + 1) % n; };

  // Caliper indices: far side, max projection, min projection.
  std::size_t far = 0, hi = 0, lo = 0;
  double best_area = std::numeric_limits<double>::infinity();
  OrientedRect best;

  for (std::size_t i = 0; i < n; ++i) {
    const Point origin = hull[i];
    Point u = hull[next(i)] - origin;
    const double len = std::hypot(u.x, u.y);
    u = (1.0 / len) * u;
    const Point w{-u.y, u.x};
    auto along = [&](std::size_t k) { return dot(hull[k] - origin, u); };
    auto across = [&](std::size_t k) { return dot(hull[k] - origin, w); };

    if (i == 0) {
      for (std::size_t k = 0; k < n; ++k) {
        if (across(k) > across(far)) far = k;
        if (along(k) > along(hi)) hi = k;
        if (along(k) < along(lo)) lo = k;
      }
    } else {
      for (std::size_t s = 0; s < n && across(next(far)) >= across(far); ++s) far = next(far);
      for (std::size_t s = 0; s < n && along(next(hi)) >= along(hi); ++s) hi = next(hi);
      for (std::size_t s = 0; s < n && along(next(lo)) <= along(lo); ++s) lo = next(lo);
    }

    const double a_hi = along(hi), a_lo = along(lo), h = across(far);
    const double area = (a_hi - a_lo) * h;
    if (area < best_area) {
      best_area = area;
      best.center = origin + (0.5 * (a_hi + a_lo)) * u + (0.5 * h) * w;
      best.width = a_hi - a_lo;
      best.height = h;
      best.angle = std::atan2(u.y, u.x);
    }
  }
  return canonical(best);
}

// ---------------------------------------------------------------------------
// Ramer-Douglas-Peucker

/// Open-polyline simplification. Endpoints are kept; an interior point is
/// kept only when it deviates more than `epsilon` from the segment between the
/// retained neighbours.
inline std::vector<Point> rdp_simplify(std::span<const Point> polyline, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::invalid_argument, "rdp epsilon must be >= 0");
  if (polyline.size() < 2) throw Error(ErrorKind::invalid_argument, "rdp needs at least 2 points");

  std::vector<char> keep(polyline.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, polyline.size() - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    double worst = -1.0;
    std::size_t index = first;
    for (std::size_t k = first + 1; k < last; ++k) {
      const double dist = distance_to_segment(polyline[k], polyline[first], polyline[last]);
      if (dist > worst) {
        worst = dist;
        index = k;
      }
    }
    if (index != first && worst > epsilon) {
      keep[index] = 1;
      stack.emplace_back(index, last);
      stack.emplace_back(first, index);
    }
  }
  std::vector<Point> out;
  for (std::size_t k = 0; k < polyline.size(); ++k)
    if (keep[k]) out.push_back(polyline[k]);
  return out;
}

/// Closed-ring simplification: the ring is split at vertex 0 and the vertex
/// farthest from it, and both chains are simplified independently.
inline std::vector<Point> rdp_simplify_ring(std::span<const Point> ring, double epsilon) {
  if (ring.size() <= 3) return {ring.begin(), ring.end()};
  std::size_t split = 0;
  double far = -1.0;
  for (std::size_t k = 1; k < ring.size(); ++k) {
    const Point d = ring[k] - ring[0];
    if (const double dist = std::hypot(d.x, d.y); dist > far) {
      far = dist;
      split = k;
    }
  }
  std::vector<Point> first(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(split) + 1);
  std::vector<Point> second(ring.begin() + static_cast<std::ptrdiff_t>(split), ring.end());
  second.push_back(ring[0]);
  auto a = rdp_simplify(first, epsilon);
  auto b = rdp_simplify(second, epsilon);
  a.pop_back();
  b.pop_back();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace psenet
