#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psenet/core.hpp"
#include "psenet/geometry.hpp"
#include "psenet/labels.hpp"

namespace psenet {

using Rgb = std::array<std::uint8_t, 3>;

class RgbImage {
 public:
  RgbImage(int width, int height, Rgb fill = {0, 0, 0}) : pixels_(width, height, fill) {}

  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  const Rgb& at(int x, int y) const noexcept { return pixels_(x, y); }

  void set(int x, int y, Rgb c) {
    if (pixels_.contains(x, y)) pixels_(x, y) = c;
  }

  void blend(int x, int y, Rgb c, double alpha) {
    if (!pixels_.contains(x, y)) return;
    auto& px = pixels_(x, y);
    for (int k = 0; k < 3; ++k)
      px[k] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px[k] + alpha * c[k]));
  }

  /// Binary PPM (P6).
  std::vector<std::uint8_t> encode_ppm() const {
    const std::string header =
        "P6\n" + std::to_string(width()) + " " + std::to_string(height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + 3 * pixels_.size());
    for (const Rgb& c : pixels_.values()) out.insert(out.end(), c.begin(), c.end());
    return out;
  }

 private:
  Grid<Rgb> pixels_;
};

inline void draw_segment(RgbImage& img, Point a, Point b, Rgb color) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * len)));
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    img.set(static_cast<int>(std::floor(a.x + t * (b.x - a.x))), static_cast<int>(std::floor(a.y + t * (b.y - a.y))),
            color);
  }
}

inline void draw_outline(RgbImage& img, const Polygon& p, Rgb color) {
  const auto v = p.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) draw_segment(img, v[i], v[(i + 1) % v.size()], color);
}

inline void fill_polygon(RgbImage& img, const Polygon& p, Rgb color, double alpha) {
  const Mask m = rasterize_polygon(p, img.width(), img.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) img.blend(x, y, color, alpha);
}

/// Fully saturated color for index k, hues spaced by the golden angle.
inline Rgb distinct_hue(std::size_t k) {
  const double hue = std::fmod(30.0 + 137.508 * static_cast<double>(k), 360.0);
  const double h = hue / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  return {q(r), q(g), q(b)};
}

/// Ground truth filled and outlined in green, ignore regions in gray,
/// detections outlined in distinct hues.
inline RgbImage render_overlay(const SceneAnnotation& ann, std::span<const Polygon> detections) {
  RgbImage img(ann.width, ann.height);
  constexpr Rgb green{0, 200, 0};
  constexpr Rgb gray{128, 128, 128};
  for (const auto& p : ann.ignore_regions) {
    fill_polygon(img, p, gray, 0.3);
    draw_outline(img, p, gray);
  }
  for (const auto& p : ann.instances) {
    fill_polygon(img, p, green, 0.35);
    draw_outline(img, p, green);
  }
  for (std::size_t k = 0; k < detections.size(); ++k) draw_outline(img, detections[k], distinct_hue(k));
  return img;
}

}  // namespace psenet
