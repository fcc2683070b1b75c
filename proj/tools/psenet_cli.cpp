// Command-line front end: label generation, detection, expansion, losses,
// synthetic data, evaluation, overlays and the expansion benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 internal
// invariant violation. Failures print {"error": {"kind", "message"}} on stderr.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psenet/psenet.hpp"

namespace {

using psenet::Error;
using psenet::ErrorKind;
using psenet::Json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

int report(int code, const std::string& kind, const std::string& message) {
  Json err{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

void print_json(const Json& j) { std::cout << j.dump(2) << std::endl; }

// --- gen-labels -------------------------------------------------------------

struct GenLabelsArgs {
  std::string ann, out, ignore_out;
  int n = 6;
  double m = 0.5;
};

void run_gen_labels(const GenLabelsArgs& a) {
  const auto ann = psenet::annotation_from_json(psenet::parse_json_file(a.ann));
  const auto gt = psenet::generate_kernel_stack(ann, {a.n, a.m});
  psenet::write_tensor(a.out, psenet::masks_to_tensor(gt.masks));
  if (!a.ignore_out.empty()) psenet::write_tensor(a.ignore_out, psenet::masks_to_tensor(std::span(&gt.ignore_mask, 1)));
}

// --- detect -----------------------------------------------------------------

struct DetectArgs {
  std::string scores, out, mode = "rect";
  psenet::DetectConfig cfg;
};

void run_detect(DetectArgs a) {
  a.cfg.shape_mode = a.mode == "poly" ? psenet::ShapeMode::polygon : psenet::ShapeMode::oriented_rect;
  const auto stack = psenet::tensor_to_scores(psenet::read_tensor(a.scores));
  const auto dets = psenet::detect(stack, a.cfg);
  psenet::write_json_file(a.out, psenet::detections_to_json(dets));
}

// --- expand -----------------------------------------------------------------

struct ExpandArgs {
  std::string kernels, mask, out;
};

void run_expand(const ExpandArgs& a) {
  const auto kt = psenet::read_tensor(a.kernels);
  psenet::LabelMap kernels;
  if (kt.dtype() == psenet::DType::u8) {
    const auto masks = psenet::tensor_to_masks(kt);
    if (masks.size() != 1) throw Error(ErrorKind::format, "kernel mask tensor must have one channel");
    kernels = psenet::connected_components(masks[0]);
  } else {
    kernels = psenet::tensor_to_labels(kt);
  }
  const auto masks = psenet::tensor_to_masks(psenet::read_tensor(a.mask));
  if (masks.size() != 1) throw Error(ErrorKind::format, "mask tensor must have one channel");
  if (!kernels.labels.same_shape(masks[0])) throw Error(ErrorKind::format, "kernel and mask dimensions differ");
  psenet::write_tensor(a.out, psenet::labels_to_tensor(psenet::expand(kernels, masks[0])));
}

// --- loss -------------------------------------------------------------------

struct LossArgs {
  std::string scores, gt, ignore;
  psenet::LossConfig cfg;
};

void run_loss(const LossArgs& a) {
  const auto scores = psenet::tensor_to_scores(psenet::read_tensor(a.scores));
  const auto gts = psenet::tensor_to_masks(psenet::read_tensor(a.gt));
  if (scores.size() != gts.size() || scores.empty() || !scores[0].same_shape(gts[0]))
    throw Error(ErrorKind::format, "score and ground-truth tensors must have identical shapes");
  psenet::Mask ignore(scores[0].width(), scores[0].height());
  if (!a.ignore.empty()) {
    const auto masks = psenet::tensor_to_masks(psenet::read_tensor(a.ignore));
    if (masks.size() != 1 || !masks[0].same_shape(ignore))
      throw Error(ErrorKind::format, "ignore tensor must be one channel of the score dimensions");
    ignore = masks[0];
  }
  print_json(psenet::loss_to_json(psenet::total_loss(scores, gts, ignore, a.cfg)));
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string config, out_dir;
  std::uint64_t seed = 42;
};

template <typename T>
void take(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void run_synth(const SynthArgs& a) {
  psenet::SynthConfig scene;
  psenet::NoiseConfig noise;
  psenet::ShrinkConfig shrink;
  noise.seed = a.seed + 1;
  if (!a.config.empty()) {
    const Json cfg = psenet::parse_json_file(a.config);
    try {
      take(cfg, "n", shrink.n);
      take(cfg, "m", shrink.m);
      if (cfg.contains("scene")) {
        const auto& s = cfg.at("scene");
        take(s, "width", scene.width);
        take(s, "height", scene.height);
        take(s, "min_instances", scene.min_instances);
        take(s, "max_instances", scene.max_instances);
        take(s, "frac_axis_rect", scene.frac_axis_rect);
        take(s, "frac_rotated_quad", scene.frac_rotated_quad);
        take(s, "frac_curved_band", scene.frac_curved_band);
        take(s, "min_thickness", scene.min_thickness);
        take(s, "max_thickness", scene.max_thickness);
        take(s, "min_aspect", scene.min_aspect);
        take(s, "max_aspect", scene.max_aspect);
        take(s, "max_rotation_deg", scene.max_rotation_deg);
        take(s, "pair_probability", scene.pair_probability);
        take(s, "min_gap", scene.min_gap);
        take(s, "max_gap", scene.max_gap);
        take(s, "min_spacing", scene.min_spacing);
        take(s, "max_attempts", scene.max_attempts);
      }
      if (cfg.contains("noise")) {
        const auto& s = cfg.at("noise");
        take(s, "flip_prob", noise.flip_prob);
        take(s, "blur_radius", noise.blur_radius);
        take(s, "jitter", noise.jitter);
        take(s, "seed", noise.seed);
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::format, std::string("synth config: ") + e.what());
    }
  }
  scene.seed = a.seed;

  const auto ann = psenet::gen_scene(scene);
  const auto gt = psenet::generate_kernel_stack(ann, shrink);
  const auto scores = psenet::simulate_prediction(gt, noise);

  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + a.out_dir + "': " + ec.message());
  psenet::write_json_file((dir / "annotation.json").string(), psenet::annotation_to_json(ann));
  psenet::write_tensor((dir / "gt.pset").string(), psenet::masks_to_tensor(gt.masks));
  psenet::write_tensor((dir / "ignore.pset").string(), psenet::masks_to_tensor(std::span(&gt.ignore_mask, 1)));
  psenet::write_tensor((dir / "scores.pset").string(), psenet::scores_to_tensor(scores));
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string det, ann;
  double iou = 0.5;
};

void run_eval(const EvalArgs& a) {
  const auto ann = psenet::annotation_from_json(psenet::parse_json_file(a.ann));
  const auto dets = psenet::detections_from_json(psenet::parse_json_file(a.det));
  std::vector<psenet::ScoredPolygon> scored;
  for (const auto& d : dets) scored.push_back({psenet::outline(d), d.score});
  const auto m = psenet::match(scored, ann.instances, ann.ignore_regions, ann.width, ann.height, a.iou);
  print_json(psenet::metrics_to_json(m, a.iou));
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
  std::string ann, det, out;
};

void run_render(const RenderArgs& a) {
  const auto ann = psenet::annotation_from_json(psenet::parse_json_file(a.ann));
  std::vector<psenet::Polygon> outlines;
  if (!a.det.empty())
    for (const auto& d : psenet::detections_from_json(psenet::parse_json_file(a.det)))
      outlines.push_back(psenet::outline(d));
  const auto bytes = psenet::render_overlay(ann, outlines).encode_ppm();
  psenet::detail::write_file(a.out, bytes);
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string size = "1280x768", fill = "random";
  int n = 6;
  int repeat = 20;
  std::uint64_t seed = 1;
};

void run_bench(const BenchArgs& a) {
  int width = 0, height = 0;
  char sep = 0;
  std::istringstream in(a.size);
  if (!(in >> width >> sep >> height) || sep != 'x' || width <= 0 || height <= 0 || !in.eof())
    throw CLI::ValidationError("--size", "expected WIDTHxHEIGHT");
  if (a.n < 1 || a.repeat < 1) throw CLI::ValidationError("--n/--repeat", "must be >= 1");

  std::vector<psenet::Mask> stack;
  if (a.fill == "zero") {
    stack.assign(static_cast<std::size_t>(a.n), psenet::Mask(width, height));
  } else if (a.fill == "synthetic") {
    psenet::SynthConfig scene;
    scene.width = width;
    scene.height = height;
    scene.min_instances = scene.max_instances = 40;
    scene.max_attempts = 4000;
    scene.seed = a.seed;
    stack = psenet::generate_kernel_stack(psenet::gen_scene(scene), {a.n, 0.5}).masks;
  } else {
    stack = psenet::random_nested_stack(width, height, a.n, 0.6, a.seed);
  }

  std::vector<double> ms;
  std::uint32_t instances = 0;
  for (int r = 0; r < a.repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto labels = psenet::progressive_expand(stack, 5);
    const auto t1 = std::chrono::steady_clock::now();
    instances = labels.count;
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  const double median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(k);
  print_json({{"width", width},
              {"height", height},
              {"n", a.n},
              {"repeat", a.repeat},
              {"fill", a.fill},
              {"instances", instances},
              {"median_ms", median},
              {"mean_ms", mean},
              {"min_ms", sorted.front()},
              {"max_ms", sorted.back()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psenet: progressive scale expansion toolkit"};
  app.require_subcommand(1);

  GenLabelsArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-labels", "Kernel ground-truth stack from an annotation");
  gen_cmd->add_option("--ann", gen.ann, "Annotation JSON")->required();
  gen_cmd->add_option("--n", gen.n, "Number of scales")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--m", gen.m, "Minimal scale ratio in (0, 1]")->check(CLI::Range(1e-12, 1.0));
  gen_cmd->add_option("--out", gen.out, "Output u8 tensor (channel 0 = smallest kernel)")->required();
  gen_cmd->add_option("--ignore-out", gen.ignore_out, "Optional output for the ignore mask");

  DetectArgs det;
  auto* det_cmd = app.add_subcommand("detect", "Detections from a score stack");
  det_cmd->add_option("--scores", det.scores, "Score tensor (f32) or mask tensor (u8)")->required();
  det_cmd->add_option("--threshold", det.cfg.binarize_threshold, "Binarization threshold")->check(CLI::Range(0.0, 1.0));
  det_cmd->add_option("--mode", det.mode, "rect or poly")->check(CLI::IsMember({"rect", "poly"}));
  det_cmd->add_option("--min-kernel-area", det.cfg.min_kernel_area, "Smallest kept kernel, pixels");
  det_cmd->add_option("--min-area", det.cfg.min_instance_area, "Smallest kept instance, pixels");
  det_cmd->add_option("--rdp-epsilon", det.cfg.rdp_epsilon, "Polygon simplification tolerance")
      ->check(CLI::NonNegativeNumber);
  det_cmd->add_option("--out", det.out, "Detection JSON")->required();

  ExpandArgs exp;
  auto* exp_cmd = app.add_subcommand("expand", "One scale-expansion step");
  exp_cmd->add_option("--kernels", exp.kernels, "u32 label tensor or u8 kernel mask")->required();
  exp_cmd->add_option("--mask", exp.mask, "u8 mask tensor")->required();
  exp_cmd->add_option("--out", exp.out, "Output u32 label tensor")->required();

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "Training loss breakdown as JSON");
  loss_cmd->add_option("--scores", loss.scores, "Score tensor S_1..S_n")->required();
  loss_cmd->add_option("--gt", loss.gt, "Ground-truth tensor G_1..G_n")->required();
  loss_cmd->add_option("--ignore", loss.ignore, "Ignore mask tensor");
  loss_cmd->add_option("--lambda", loss.cfg.lambda, "Complete/shrunk balance")->check(CLI::Range(0.0, 1.0));
  loss_cmd->add_option("--ohem", loss.cfg.ohem_ratio, "OHEM negatives per positive")->check(CLI::NonNegativeNumber);
  loss_cmd->add_option("--w-threshold", loss.cfg.w_threshold, "Threshold for the shrunk-loss mask")
      ->check(CLI::Range(0.0, 1.0));

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Synthetic annotation, ground truth and noisy scores");
  syn_cmd->add_option("--config", syn.config, "Synthesis config JSON");
  syn_cmd->add_option("--seed", syn.seed, "Scene seed");
  syn_cmd->add_option("--out-dir", syn.out_dir, "Output directory")->required();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Precision/recall/F-measure as JSON");
  ev_cmd->add_option("--det", ev.det, "Detection JSON")->required();
  ev_cmd->add_option("--ann", ev.ann, "Annotation JSON")->required();
  ev_cmd->add_option("--iou", ev.iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));

  RenderArgs ren;
  auto* ren_cmd = app.add_subcommand("render", "PPM overlay of ground truth and detections");
  ren_cmd->add_option("--ann", ren.ann, "Annotation JSON")->required();
  ren_cmd->add_option("--det", ren.det, "Detection JSON");
  ren_cmd->add_option("--out", ren.out, "Output PPM")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time progressive expansion");
  bench_cmd->add_option("--size", bench.size, "WIDTHxHEIGHT");
  bench_cmd->add_option("--n", bench.n, "Number of scales");
  bench_cmd->add_option("--repeat", bench.repeat, "Timed repetitions");
  bench_cmd->add_option("--fill", bench.fill, "random, synthetic or zero")
      ->check(CLI::IsMember({"random", "synthetic", "zero"}));
  bench_cmd->add_option("--seed", bench.seed, "Seed for generated stacks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kExitUsage, "usage", e.what());
  }

  try {
    if (gen_cmd->parsed()) run_gen_labels(gen);
    else if (det_cmd->parsed()) run_detect(det);
    else if (exp_cmd->parsed()) run_expand(exp);
    else if (loss_cmd->parsed()) run_loss(loss);
    else if (syn_cmd->parsed()) run_synth(syn);
    else if (ev_cmd->parsed()) run_eval(ev);
    else if (ren_cmd->parsed()) run_render(ren);
    else if (bench_cmd->parsed()) run_bench(bench);
  } catch (const CLI::ParseError& e) {
    return report(kExitUsage, "usage", e.what());
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::invariant: return report(kExitInvariant, to_string(e.kind()), e.what());
      case ErrorKind::invalid_argument:
      case ErrorKind::dimension_mismatch:
      case ErrorKind::io:
      case ErrorKind::format: return report(kExitData, to_string(e.kind()), e.what());
    }
  } catch (const std::exception& e) {
    return report(kExitInvariant, "internal", e.what());
  }
  return kExitOk;
}
