#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "psenet/core.hpp"
#include "psenet/eval.hpp"
#include "psenet/geometry.hpp"
#include "psenet/labels.hpp"
#include "psenet/loss.hpp"
#include "psenet/pse.hpp"

namespace psenet {

// ---------------------------------------------------------------------------
// Tensor files
//
// Layout (all integers little-endian):
//   "PSET" | version u16 = 1 | dtype u8 (0 u8, 1 u32, 2 f32) |
//   channels u32 | height u32 | width u32 | payload
// Payload is channel-major then row-major; f32 is IEEE-754 binary32.

enum class DType : std::uint8_t { u8 = 0, u32 = 1, f32 = 2 };

inline constexpr std::array<char, 4> kTensorMagic{'P', 'S', 'E', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderSize = 19;

struct Tensor {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::variant<std::vector<std::uint8_t>, std::vector<std::uint32_t>, std::vector<float>> data;

  DType dtype() const noexcept { return static_cast<DType>(data.index()); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xFF));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  const std::size_t count = static_cast<std::size_t>(t.channels) * t.plane();
  std::visit(
      [&](const auto& v) {
        if (v.size() != count) throw Error(ErrorKind::invariant, "tensor payload does not match its dimensions");
      },
      t.data);
  std::vector<std::uint8_t> out(kTensorMagic.begin(), kTensorMagic.end());
  detail::put_u16(out, kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  detail::put_u32(out, t.channels);
  detail::put_u32(out, t.height);
  detail::put_u32(out, t.width);
  if (const auto* v8 = std::get_if<std::vector<std::uint8_t>>(&t.data)) {
    out.insert(out.end(), v8->begin(), v8->end());
  } else if (const auto* v32 = std::get_if<std::vector<std::uint32_t>>(&t.data)) {
    for (auto v : *v32) detail::put_u32(out, v);
  } else {
    for (float f : std::get<std::vector<float>>(t.data)) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      detail::put_u32(out, bits);
    }
  }
  return out;
}

inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderSize) throw Error(ErrorKind::format, "tensor file truncated header");
  if (!std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin()))
    throw Error(ErrorKind::format, "tensor file has bad magic");
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kTensorVersion)
    throw Error(ErrorKind::format, "unsupported tensor version " + std::to_string(version));
  const std::uint8_t dtype = bytes[6];
  Tensor t;
  t.channels = detail::get_u32(&bytes[7]);
  t.height = detail::get_u32(&bytes[11]);
  t.width = detail::get_u32(&bytes[15]);
  if (dtype > 2) throw Error(ErrorKind::format, "unknown tensor dtype " + std::to_string(dtype));
  const std::size_t elem = dtype == 0 ? 1 : 4;
  const auto expected = static_cast<unsigned __int128>(t.channels) * t.height * t.width * elem;
  if (expected != bytes.size() - kTensorHeaderSize)
    throw Error(ErrorKind::format, "tensor payload length does not match header dimensions");

  const std::size_t count = static_cast<std::size_t>(t.channels) * t.plane();
  const std::uint8_t* p = bytes.data() + kTensorHeaderSize;
  if (dtype == 0) {
    t.data = std::vector<std::uint8_t>(p, p + count);
  } else if (dtype == 1) {
    std::vector<std::uint32_t> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = detail::get_u32(p + 4 * i);
    t.data = std::move(v);
  } else {
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t bits = detail::get_u32(p + 4 * i);
      std::memcpy(&v[i], &bits, sizeof bits);
    }
    t.data = std::move(v);
  }
  return t;
}

inline void write_tensor(const std::string& path, const Tensor& t) { detail::write_file(path, encode_tensor(t)); }
inline Tensor read_tensor(const std::string& path) { return decode_tensor(detail::read_file(path)); }

inline Tensor masks_to_tensor(std::span<const Mask> masks) {
  if (masks.empty()) throw Error(ErrorKind::invalid_argument, "cannot store an empty mask stack");
  Tensor t{static_cast<std::uint32_t>(masks.size()), static_cast<std::uint32_t>(masks[0].height()),
           static_cast<std::uint32_t>(masks[0].width()), {}};
  std::vector<std::uint8_t> v;
  v.reserve(masks.size() * masks[0].size());
  for (const Mask& m : masks) {
    require_same_shape(masks[0], m, "masks_to_tensor");
    for (auto x : m.values()) v.push_back(x ? 1 : 0);
  }
  t.data = std::move(v);
  return t;
}

inline Tensor scores_to_tensor(std::span<const ScoreMap> maps) {
  if (maps.empty()) throw Error(ErrorKind::invalid_argument, "cannot store an empty score stack");
  Tensor t{static_cast<std::uint32_t>(maps.size()), static_cast<std::uint32_t>(maps[0].height()),
           static_cast<std::uint32_t>(maps[0].width()), {}};
  std::vector<float> v;
  v.reserve(maps.size() * maps[0].size());
  for (const ScoreMap& m : maps) {
    require_same_shape(maps[0], m, "scores_to_tensor");
    for (double x : m.values()) v.push_back(static_cast<float>(x));
  }
  t.data = std::move(v);
  return t;
}

inline Tensor labels_to_tensor(const LabelMap& lm) {
  return Tensor{1, static_cast<std::uint32_t>(lm.height()), static_cast<std::uint32_t>(lm.width()),
                lm.labels.data()};
}

inline std::vector<Mask> tensor_to_masks(const Tensor& t) {
  const auto* v = std::get_if<std::vector<std::uint8_t>>(&t.data);
  if (!v) throw Error(ErrorKind::format, "expected a u8 mask tensor");
  std::vector<Mask> out;
  const std::size_t plane = t.plane();
  for (std::uint32_t c = 0; c < t.channels; ++c) {
    std::vector<std::uint8_t> px(v->begin() + static_cast<std::ptrdiff_t>(c * plane),
                                 v->begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    for (auto& x : px) x = x ? 1 : 0;
    out.emplace_back(static_cast<int>(t.width), static_cast<int>(t.height), std::move(px));
  }
  return out;
}

/// f32 scores (each in [0, 1]) or u8 masks read as 0/1 scores.
inline std::vector<ScoreMap> tensor_to_scores(const Tensor& t) {
  std::vector<ScoreMap> out;
  const std::size_t plane = t.plane();
  if (const auto* f = std::get_if<std::vector<float>>(&t.data)) {
    for (std::uint32_t c = 0; c < t.channels; ++c) {
      ScoreMap m(static_cast<int>(t.width), static_cast<int>(t.height));
      for (std::size_t i = 0; i < plane; ++i) {
        const float x = (*f)[c * plane + i];
        if (!(x >= 0.0f && x <= 1.0f)) throw Error(ErrorKind::format, "score tensor value outside [0, 1]");
        m[i] = x;
      }
      out.push_back(std::move(m));
    }
    return out;
  }
  if (std::holds_alternative<std::vector<std::uint8_t>>(t.data)) {
    for (const Mask& m : tensor_to_masks(t)) out.push_back(to_scores(m));
    return out;
  }
  throw Error(ErrorKind::format, "expected an f32 score tensor or u8 mask tensor");
}

/// Single-channel u32 tensor to a label map; count is the largest id.
inline LabelMap tensor_to_labels(const Tensor& t) {
  const auto* v = std::get_if<std::vector<std::uint32_t>>(&t.data);
  if (!v || t.channels != 1) throw Error(ErrorKind::format, "expected a single-channel u32 label tensor");
  LabelMap lm{Grid<std::uint32_t>(static_cast<int>(t.width), static_cast<int>(t.height), *v), 0};
  for (auto id : *v) lm.count = std::max(lm.count, id);
  return lm;
}

// ---------------------------------------------------------------------------
// JSON documents

using Json = nlohmann::json;

inline Json to_json(const Polygon& p) {
  Json pts = Json::array();
  for (const Point& q : p.vertices()) pts.push_back({q.x, q.y});
  return pts;
}

inline Polygon polygon_from_json(const Json& pts) {
  if (!pts.is_array()) throw Error(ErrorKind::format, "points must be an array of [x, y]");
  std::vector<Point> v;
  for (const auto& q : pts) {
    if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number())
      throw Error(ErrorKind::format, "each point must be a [x, y] number pair");
    const Point p{q[0].get<double>(), q[1].get<double>()};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorKind::format, "non-finite coordinate");
    v.push_back(p);
  }
  auto poly = Polygon::make(std::move(v));
  if (!poly) throw Error(ErrorKind::format, "invalid polygon (degenerate or self-intersecting)");
  return *poly;
}

inline Json annotation_to_json(const SceneAnnotation& ann) {
  Json inst = Json::array();
  for (const auto& p : ann.instances) inst.push_back({{"points", to_json(p)}, {"ignore", false}});
  for (const auto& p : ann.ignore_regions) inst.push_back({{"points", to_json(p)}, {"ignore", true}});
  return {{"width", ann.width}, {"height", ann.height}, {"instances", inst}};
}

inline SceneAnnotation annotation_from_json(const Json& j) {
  try {
    SceneAnnotation ann;
    if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("instances"))
      throw Error(ErrorKind::format, "annotation needs width, height, instances");
    if (!j.at("width").is_number_integer() || !j.at("height").is_number_integer())
      throw Error(ErrorKind::format, "annotation width/height must be integers");
    ann.width = j.at("width").get<int>();
    ann.height = j.at("height").get<int>();
    if (ann.width <= 0 || ann.height <= 0) throw Error(ErrorKind::format, "annotation dimensions must be positive");
    for (const auto& inst : j.at("instances")) {
      Polygon p = polygon_from_json(inst.at("points"));
      const bool ignore = inst.contains("ignore") && inst.at("ignore").get<bool>();
      (ignore ? ann.ignore_regions : ann.instances).push_back(std::move(p));
    }
    return ann;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::format, std::string("annotation JSON: ") + e.what());
  }
}

inline Json parse_json_file(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::format, "'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Json detections_to_json(std::span<const Detection> dets) {
  Json arr = Json::array();
  for (const auto& d : dets) {
    Json item;
    if (const auto* r = std::get_if<OrientedRect>(&d.shape))
      item["rect"] = {{"cx", r->center.x}, {"cy", r->center.y}, {"width", r->width}, {"height", r->height},
                      {"angle", r->angle}};
    else
      item["points"] = to_json(std::get<Polygon>(d.shape));
    item["score"] = d.score;
    arr.push_back(std::move(item));
  }
  return {{"detections", arr}};
}

inline std::vector<Detection> detections_from_json(const Json& j) {
  try {
    std::vector<Detection> out;
    for (const auto& item : j.at("detections")) {
      Detection d;
      d.score = item.at("score").get<double>();
      if (item.contains("rect")) {
        const auto& r = item.at("rect");
        d.shape = OrientedRect{{r.at("cx").get<double>(), r.at("cy").get<double>()},
                               r.at("width").get<double>(), r.at("height").get<double>(), r.at("angle").get<double>()};
      } else {
        d.shape = polygon_from_json(item.at("points"));
      }
      out.push_back(std::move(d));
    }
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::format, std::string("detection JSON: ") + e.what());
  }
}

inline Json metrics_to_json(const MatchResult& m, double iou_threshold) {
  const Prf r = prf(m);
  Json pairs = Json::array();
  for (const auto& p : m.pairs) pairs.push_back({{"detection", p.detection}, {"gt", p.gt}, {"iou", p.iou}});
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"f_measure", r.f_measure},
          {"iou_threshold", iou_threshold},
          {"matches", m.pairs.size()},
          {"detections", m.num_detections},
          {"ignored_detections", m.ignored_detections.size()},
          {"gts", m.num_gts},
          {"pairs", pairs}};
}

inline Json loss_to_json(const LossBreakdown& b) {
  return {{"total", b.total}, {"complete", b.complete}, {"shrunk", b.shrunk}, {"per_scale_dice", b.per_scale_dice}};
}

}  // namespace psenet
