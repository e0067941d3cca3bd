#include "squasplat/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "squasplat/fit.hpp"
#include "squasplat/generate.hpp"
#include "squasplat/io.hpp"
#include "squasplat/metrics.hpp"
#include "squasplat/parallel.hpp"
#include "squasplat/splat.hpp"
#include "squasplat/temporal.hpp"

namespace squasplat {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) {
    throw UsageError(std::string(what) + " needs three comma-separated values");
  }
  return Vec3(v[0], v[1], v[2]);
}

void write_json(const fs::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json counts_json(const Counts& c) {
  Json j{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  if (auto v = c.iou()) j["iou"] = *v;
  else j["iou"] = nullptr;
  return j;
}

GridSpec preset_grid(const std::string& name) {
  if (name == "occ3d") return GridSpec::occ3d();
  if (name == "surround") return GridSpec::surround_occ();
  if (name == "fit") return fit_grid();
  throw UsageError("unknown grid preset '" + name + "'");
}

// Grid overrides shared by gen and splat.
struct GridFlags {
  std::string preset;
  std::vector<double> lower, upper;
  std::vector<int> resolution;

  void add(CLI::App* app) {
    app->add_option("--grid", preset, "Grid preset: occ3d, surround or fit");
    app->add_option("--lower", lower, "Grid lower bound x,y,z")->delimiter(',');
    app->add_option("--upper", upper, "Grid upper bound x,y,z")->delimiter(',');
    app->add_option("--resolution", resolution, "Voxels per axis nx,ny,nz")
        ->delimiter(',');
  }

  std::optional<GridSpec> resolve(std::optional<GridSpec> base) const {
    const bool custom = !lower.empty() || !upper.empty() || !resolution.empty();
    if (preset.empty() && !custom) return base;
    GridSpec g = preset.empty() ? base.value_or(GridSpec::occ3d())
                                : preset_grid(preset);
    if (!lower.empty()) g.lower = to_vec3(lower, "--lower");
    if (!upper.empty()) g.upper = to_vec3(upper, "--upper");
    if (!resolution.empty()) {
      if (resolution.size() != 3) throw UsageError("--resolution needs 3 values");
      g.resolution = {resolution[0], resolution[1], resolution[2]};
    }
    g.validate();
    return g;
  }
};

// ---- gen ----

struct GenFlags {
  std::string kind;
  std::uint64_t seed = 0;
  int classes = 17;
  std::vector<double> center, extent, extent_b;
  int label = 0, label_b = 1;
  int count = 2400, members = 2;
  double scale_min = 0.25, scale_max = 1.0, radius = 20.0;
  GridFlags grid;
  std::string scene_out, grid_out, stream_out;
  int frames = 5;
  std::vector<double> velocity;
};

void add_gen(CLI::App& app, GenFlags& f) {
  auto* sub = app.add_subcommand("gen", "Generate a synthetic scene");
  sub->add_option("kind", f.kind, "box, l-shape, random or ring")->required();
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--classes", f.classes, "Number of semantic classes");
  sub->add_option("--center", f.center, "Shape center x,y,z")->delimiter(',');
  sub->add_option("--extent", f.extent, "Box extent (first l-shape arm)")
      ->delimiter(',');
  sub->add_option("--extent-b", f.extent_b, "Second l-shape arm extent")
      ->delimiter(',');
  sub->add_option("--label", f.label, "Class of the box (first arm)");
  sub->add_option("--label-b", f.label_b, "Class of the second arm");
  sub->add_option("--n", f.count, "Primitive or cluster count (random, ring)");
  sub->add_option("--members", f.members, "Members per ring cluster");
  sub->add_option("--scale-min", f.scale_min, "Smallest random scale (m)");
  sub->add_option("--scale-max", f.scale_max, "Largest random scale (m)");
  sub->add_option("--radius", f.radius, "Ring radius (m)");
  f.grid.add(sub);
  sub->add_option("--scene-out", f.scene_out, "Scene file to write")->required();
  sub->add_option("--grid-out", f.grid_out,
                  "Rasterized target grid (box and l-shape)");
  sub->add_option("--stream-out", f.stream_out,
                  "Also write a stream file repeating the scene every frame");
  sub->add_option("--frames", f.frames, "Frames in the stream file");
  sub->add_option("--velocity", f.velocity,
                  "Ego displacement per frame x,y,z (m)")
      ->delimiter(',');
}

Json run_gen(const GenFlags& f) {
  GenOptions o;
  o.kind = f.kind;
  o.seed = f.seed;
  o.num_classes = f.classes;
  if (!f.center.empty()) o.center = to_vec3(f.center, "--center");
  if (!f.extent.empty()) o.extent = to_vec3(f.extent, "--extent");
  if (!f.extent_b.empty()) o.extent_b = to_vec3(f.extent_b, "--extent-b");
  o.label = f.label;
  o.label_b = f.label_b;
  o.count = f.count;
  o.members = f.members;
  o.scale_min = f.scale_min;
  o.scale_max = f.scale_max;
  o.ring_radius = f.radius;
  o.grid = f.grid.resolve(std::nullopt);
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Generated g = generate_scene(o);
  write_scene(f.scene_out, g.scene);

  Json report{{"command", "gen"},
              {"kind", f.kind},
              {"superquadrics", g.scene.superquadrics.size()},
              {"clusters", g.scene.clusters.size()}};
  if (!f.grid_out.empty()) {
    if (!g.target) throw UsageError("--grid-out needs kind box or l-shape");
    write_grid(f.grid_out, *g.target, false);
    report["occupied_voxels"] = g.target->label_grid().occupied_count();
  }
  if (!f.stream_out.empty()) {
    if (f.frames < 1) throw UsageError("--frames must be >= 1");
    const Vec3 v = f.velocity.empty() ? Vec3::Zero()
                                      : to_vec3(f.velocity, "--velocity");
    const fs::path stream(f.stream_out);
    const fs::path scene = fs::absolute(f.scene_out);
    const fs::path base = fs::absolute(stream).parent_path();
    const std::string rel = scene.lexically_relative(base).generic_string();
    Json frames = Json::array();
    for (int i = 0; i < f.frames; ++i) {
      // The ego moves by v, so static world points shift by -v.
      frames.push_back(Json{{"pose",
                             {{"timestamp", static_cast<double>(i)},
                              {"rotation", {1.0, 0.0, 0.0, 0.0}},
                              {"translation", vec_json(-v)}}},
                            {"scene", rel}});
    }
    write_json(stream, Json{{"frames", frames}});
  }
  return report;
}

// ---- splat ----

struct SplatFlags {
  std::string scene, grid_out;
  int tile_size = 4;
  bool naive = false;
  bool probabilities = false;
  std::optional<double> cutoff, lambda;
  GridFlags grid;
};

void add_splat(CLI::App& app, SplatFlags& f) {
  auto* sub = app.add_subcommand("splat", "Splat a scene into a voxel grid");
  sub->add_option("--scene", f.scene, "Scene file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--grid-out", f.grid_out, "Grid file to write")->required();
  sub->add_option("--tile-size", f.tile_size, "Tile edge in voxels")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--naive", f.naive, "Use the per-voxel reference splatter");
  sub->add_flag("--probabilities", f.probabilities,
                "Store full class probabilities in the grid file");
  sub->add_option("--cutoff", f.cutoff, "Contribution cutoff t in (0, 1)");
  sub->add_option("--lambda", f.lambda, "Field temperature");
  f.grid.add(sub);
}

FieldConfig field_from(const SceneDocument& doc, std::optional<double> cutoff,
                       std::optional<double> lambda) {
  FieldConfig cfg = doc.field;
  if (cutoff) cfg.cutoff = *cutoff;
  if (lambda) cfg.lambda = *lambda;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

Json run_splat(const SplatFlags& f, int workers) {
  const SceneDocument doc = read_scene(f.scene);
  const FieldConfig cfg = field_from(doc, f.cutoff, f.lambda);
  const GridSpec spec = *f.grid.resolve(doc.grid);
  const auto prims = doc.primitives();
  SplatOptions opt;
  opt.tile_size = f.tile_size;
  opt.workers = workers;
  opt.keep_semantics = f.probabilities;
  const VoxelGrid grid =
      f.naive ? splat_naive(prims, doc.num_classes, spec, cfg, opt)
              : splat_tiled(prims, doc.num_classes, spec, cfg, opt);
  write_grid(f.grid_out, grid, f.probabilities);
  return Json{{"command", "splat"},
              {"path", f.naive ? "naive" : "tiled"},
              {"primitives", prims.size()},
              {"voxels", spec.voxel_count()},
              {"occupied_voxels", grid.label_grid().occupied_count()}};
}

// ---- fit ----

struct FitFlags {
  std::string target, scene_out, trace_out, grid_out;
  int clusters = 1;
  std::vector<int> schedule = {2, 2, 4, 4, 8, 8};
  int iters = 100;
  std::uint64_t seed = 0;
  double lr = FitConfig{}.learning_rate;
  double momentum = FitConfig{}.momentum;
  double max_step = FitConfig{}.max_step;
};

void add_fit(CLI::App& app, FitFlags& f) {
  auto* sub = app.add_subcommand("fit", "Fit superquadric clusters to a grid");
  sub->add_option("--target", f.target, "Target grid file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--clusters", f.clusters, "Number of clusters")
      ->check(CLI::PositiveNumber);
  sub->add_option("--schedule", f.schedule, "Members per stage, e.g. 2,4,8")
      ->delimiter(',');
  sub->add_option("--iters-per-stage", f.iters, "Iterations per stage")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--lr", f.lr, "Learning rate");
  sub->add_option("--momentum", f.momentum, "Momentum coefficient");
  sub->add_option("--max-step", f.max_step, "Per-coordinate update clip");
  sub->add_option("--scene-out", f.scene_out, "Fitted scene file")->required();
  sub->add_option("--trace-out", f.trace_out, "Per-iteration trace file");
  sub->add_option("--grid-out", f.grid_out, "Splat of the fitted scene");
}

Json trace_json(const FitResult& r) {
  Json rows = Json::array();
  for (const TraceRow& t : r.trace) {
    rows.push_back(Json{{"stage", t.stage},
                        {"iter", t.iter},
                        {"members", t.members},
                        {"loss", t.loss},
                        {"iou", t.iou}});
  }
  return Json{{"final_loss", r.final_loss},
              {"final_iou", r.final_iou},
              {"rows", rows}};
}

FitConfig fit_config(const FitFlags& f, int workers) {
  FitConfig cfg;
  cfg.schedule = f.schedule;
  cfg.iters_per_stage = f.iters;
  cfg.seed = f.seed;
  cfg.learning_rate = f.lr;
  cfg.momentum = f.momentum;
  cfg.max_step = f.max_step;
  cfg.workers = workers;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

Json run_fit(const FitFlags& f, int workers) {
  const VoxelGrid target = read_grid(f.target);
  const FitConfig cfg = fit_config(f, workers);
  const FitResult r = fit_scene(target, f.clusters, cfg);

  SceneDocument doc;
  doc.grid = target.spec;
  doc.field = cfg.field;
  doc.num_classes = target.num_classes;
  const auto& names = default_class_names();
  if (target.num_classes == static_cast<int>(names.size())) doc.class_names = names;
  doc.clusters = r.clusters;
  write_scene(f.scene_out, doc);
  if (!f.trace_out.empty()) write_json(f.trace_out, trace_json(r));
  if (!f.grid_out.empty()) {
    SplatOptions opt;
    opt.workers = workers;
    opt.keep_semantics = false;
    const auto prims = doc.primitives();
    write_grid(f.grid_out,
               splat_tiled(prims, doc.num_classes, doc.grid, doc.field, opt),
               false);
  }
  return Json{{"command", "fit"},
              {"clusters", f.clusters},
              {"iterations", r.trace.size()},
              {"final_loss", r.final_loss},
              {"final_iou", r.final_iou}};
}

// ---- propagate ----

struct PropagateFlags {
  std::string stream, out;
  int n_p = 500, n_q = 600;
  double tau = 1.0;
  std::uint64_t seed = 0;
};

void add_propagate(CLI::App& app, PropagateFlags& f) {
  auto* sub = app.add_subcommand("propagate", "Propagate queries over a stream");
  sub->add_option("--stream", f.stream, "Stream file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--np", f.n_p, "Propagated queries per frame")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--nq", f.n_q, "Total queries per frame")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--tau", f.tau, "Deduplication distance (m)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--out", f.out, "Output file")->required();
}

Json run_propagate(const PropagateFlags& f) {
  if (f.n_p > f.n_q) throw UsageError("--np must not exceed --nq");
  const auto frames = read_stream(f.stream);
  PropagateParams params;
  params.n_p = f.n_p;
  params.n_q = f.n_q;
  params.tau = f.tau;
  params.seed = f.seed;
  const StreamResult r = run_stream(frames, params);

  Json out_frames = Json::array();
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const FrameReport& rep = r.report[i];
    Json queries = Json::array();
    for (const QueryState& q : r.frames[i]) {
      queries.push_back(
          Json{{"id", q.id},
               {"provenance", q.provenance == Provenance::kPropagated
                                  ? "propagated"
                                  : "initialized"},
               {"ref_point", vec_json(q.ref_point)},
               {"score", foreground_score(q.cluster)}});
    }
    out_frames.push_back(Json{{"frame", rep.frame},
                              {"propagated", rep.propagated},
                              {"initialized", rep.initialized},
                              {"mean_score", rep.mean_score},
                              {"shortfall", rep.shortfall},
                              {"queries", queries}});
  }
  write_json(f.out, Json{{"frames", out_frames}});
  Json summary = Json::array();
  for (const auto& rep : r.report) {
    summary.push_back(Json{{"frame", rep.frame},
                           {"propagated", rep.propagated},
                           {"initialized", rep.initialized},
                           {"shortfall", rep.shortfall}});
  }
  return Json{{"command", "propagate"}, {"frames", summary}};
}

// ---- sample ----

struct SampleFlags {
  std::string rig, spec, out, rig_out;
};

void add_sample(CLI::App& app, SampleFlags& f) {
  auto* sub = app.add_subcommand(
      "sample", "Sample multi-frame, multi-view features around a point");
  sub->add_option("--rig", f.rig, "Camera rig file (default: built-in rig)")
      ->check(CLI::ExistingFile);
  sub->add_option("--spec", f.spec, "Sampling spec file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--out", f.out, "Output file")->required();
  sub->add_option("--rig-out", f.rig_out, "Write the rig that was used");
}

FeaturePlane pattern_plane(const Json& pattern, int height, int width,
                           std::size_t frame, std::size_t view) {
  const std::string kind = pattern.value("kind", std::string("ramp"));
  const int channels = pattern.value("channels", 1);
  FeaturePlane plane(channels, height, width);
  for (int c = 0; c < channels; ++c) {
    for (int r = 0; r < height; ++r) {
      for (int col = 0; col < width; ++col) {
        double v = 0.0;
        if (kind == "constant") {
          v = pattern.value("value", 1.0);
        } else if (kind == "ramp") {
          // Ramp in normalized image coordinates, so every level agrees.
          v = c + (col + 0.5) / width + 2.0 * (r + 0.5) / height +
              10.0 * static_cast<double>(frame) + 100.0 * static_cast<double>(view);
        } else if (kind == "checker") {
          v = ((r / 8 + col / 8 + c) % 2 == 0) ? 1.0 : -1.0;
        } else {
          throw UsageError("unknown plane pattern '" + kind + "'");
        }
        plane.at(c, r, col) = static_cast<float>(v);
      }
    }
  }
  return plane;
}

Json run_sample(const SampleFlags& f) {
  const std::vector<CameraModel> cams =
      f.rig.empty() ? default_rig() : read_rig(f.rig);
  if (!f.rig_out.empty()) write_rig(f.rig_out, cams);

  const fs::path spec_path(f.spec);
  const Json j = Json::parse(read_text(spec_path));
  SampleSpec spec;
  auto vec3 = [](const Json& a) {
    if (!a.is_array() || a.size() != 3) {
      throw std::runtime_error("sample spec: expected a 3-vector");
    }
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  spec.ref_point = vec3(j.at("ref_point"));
  for (const Json& o : j.at("offsets")) spec.offsets.push_back(vec3(o));
  spec.weights = j.at("weights").get<std::vector<std::vector<double>>>();

  std::vector<FramePose> poses;
  FeatureBank bank;
  const Json& frames = j.at("frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Json& fr = frames[t];
    const Json& p = fr.at("pose");
    const auto q = p.at("rotation").get<std::vector<double>>();
    const auto tr = p.at("translation").get<std::vector<double>>();
    if (q.size() != 4 || tr.size() != 3) {
      throw std::runtime_error("sample spec: bad pose");
    }
    poses.push_back(FramePose::from_quaternion(Vec4(q[0], q[1], q[2], q[3]),
                                               Vec3(tr[0], tr[1], tr[2])));
    poses.back().validate();

    std::vector<std::vector<FeaturePlane>> views;
    if (fr.contains("planes")) {
      for (const Json& view : fr.at("planes")) {
        std::vector<FeaturePlane> levels;
        for (const Json& path : view) {
          fs::path pp = path.get<std::string>();
          if (pp.is_relative()) pp = spec_path.parent_path() / pp;
          levels.push_back(read_plane(pp));
        }
        views.push_back(std::move(levels));
      }
    } else {
      const Json& pattern = j.at("pattern");
      const auto sizes = pattern.at("levels").get<std::vector<std::vector<int>>>();
      for (std::size_t v = 0; v < cams.size(); ++v) {
        std::vector<FeaturePlane> levels;
        for (const auto& hw : sizes) {
          if (hw.size() != 2) throw std::runtime_error("pattern: levels need [H, W]");
          levels.push_back(pattern_plane(pattern, hw[0], hw[1], t, v));
        }
        views.push_back(std::move(levels));
      }
    }
    bank.push_back(std::move(views));
  }

  const SampleResult r = sample_multiframe(spec, bank, cams, poses);
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < r.features.rows(); ++i) {
    rows.push_back(vec_json(r.features.row(i).transpose()));
  }
  std::size_t missed = 0;
  for (bool m : r.missed) missed += m ? 1 : 0;
  write_json(f.out, Json{{"rows", r.features.rows()},
                         {"channels", r.features.cols()},
                         {"features", rows},
                         {"missed", r.missed}});
  return Json{{"command", "sample"},
              {"rows", r.features.rows()},
              {"missed", missed}};
}

// ---- metrics ----

struct MetricsFlags {
  std::string pred, gt, rayset, report;
  std::vector<double> thresholds = {1.0, 2.0, 4.0};
};

void add_metrics(CLI::App& app, MetricsFlags& f) {
  auto* sub = app.add_subcommand("metrics", "Compare two grids");
  sub->add_option("--pred", f.pred, "Predicted grid")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--gt", f.gt, "Ground-truth grid")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--rayset", f.rayset, "Ray set file (default: built-in)")
      ->check(CLI::ExistingFile);
  sub->add_option("--thresholds", f.thresholds, "RayIoU depth thresholds (m)")
      ->delimiter(',');
  sub->add_option("--report", f.report, "Report file")->required();
}

Json run_metrics(const MetricsFlags& f) {
  const LabelGrid pred = read_grid(f.pred).label_grid();
  const LabelGrid gt = read_grid(f.gt).label_grid();
  const Confusion conf = confusion(pred, gt);
  const RaySet rays = f.rayset.empty() ? make_rayset() : read_rayset(f.rayset);
  RayIouOptions opt;
  opt.thresholds = f.thresholds;
  const RayIouResult ray = ray_iou(pred, gt, rays.rays, opt);

  Json per_class = Json::array();
  for (std::size_t c = 0; c < conf.per_class.size(); ++c) {
    Json e = counts_json(conf.per_class[c]);
    e["class"] = c;
    per_class.push_back(e);
  }
  Json ray_scores = Json::array();
  for (std::size_t i = 0; i < ray.thresholds.size(); ++i) {
    ray_scores.push_back(Json{{"threshold", ray.thresholds[i]},
                              {"score", ray.scores[i]},
                              {"tp", ray.counts[i].tp},
                              {"fp", ray.counts[i].fp},
                              {"fn", ray.counts[i].fn}});
  }
  const Json report{{"iou", conf.iou()},
                    {"miou", conf.miou()},
                    {"occupied", counts_json(conf.occupied)},
                    {"per_class", per_class},
                    {"rays", rays.rays.size()},
                    {"ray_iou", ray_scores},
                    {"ray_iou_mean", ray.mean}};
  write_json(f.report, report);
  return Json{{"command", "metrics"},
              {"iou", conf.iou()},
              {"miou", conf.miou()},
              {"ray_iou_mean", ray.mean}};
}

// ---- bench ----

struct BenchFlags {
  std::string scene, report, fit_target;
  int repeats = 5;
  int tile_size = 4;
  int fit_clusters = 1;
  std::vector<int> fit_schedule = {2, 4, 8};
  int fit_iters = 100;
  std::uint64_t seed = 0;
};

void add_bench(CLI::App& app, BenchFlags& f) {
  auto* sub = app.add_subcommand("bench", "Time naive vs tiled splatting");
  sub->add_option("--scene", f.scene, "Scene file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--repeats", f.repeats, "Timed runs per path (>= 3)")
      ->check(CLI::Range(3, 1000));
  sub->add_option("--tile-size", f.tile_size, "Tile edge in voxels")
      ->check(CLI::PositiveNumber);
  sub->add_option("--report", f.report, "JSON report file")->required();
  sub->add_option("--fit-target", f.fit_target,
                  "Also compare fixed-K and scheduled-K fits on this grid")
      ->check(CLI::ExistingFile);
  sub->add_option("--fit-clusters", f.fit_clusters, "Clusters for the fit comparison");
  sub->add_option("--fit-schedule", f.fit_schedule, "Schedule for the comparison")
      ->delimiter(',');
  sub->add_option("--fit-iters", f.fit_iters, "Iterations per stage");
  sub->add_option("--seed", f.seed, "Fit seed");
}

Json run_bench(const BenchFlags& f, int workers, std::ostream& text) {
  const SceneDocument doc = read_scene(f.scene);
  const auto prims = doc.primitives();
  SplatOptions opt;
  opt.tile_size = f.tile_size;
  opt.workers = workers;
  opt.keep_semantics = false;
  const BenchReport b =
      bench_splat(prims, doc.num_classes, doc.grid, doc.field, f.repeats, opt);

  auto path_json = [](const char* name, const BenchPath& p, std::size_t pairs) {
    return Json{{"path", name},
                {"median_ms", p.median_ms},
                {"samples_ms", p.samples_ms},
                {"pair_count", pairs}};
  };
  Json report{{"primitives", b.primitives},
              {"voxels", doc.grid.voxel_count()},
              {"tile_size", b.tile_size},
              {"repeats", b.repeats},
              {"workers", resolve_workers(workers)},
              {"paths", Json::array({path_json("naive", b.naive, b.voxel_pairs),
                                     path_json("tiled", b.tiled, b.tile_pairs)})},
              {"speedup", b.speedup},
              {"pair_ratio", b.tile_pairs == 0
                                 ? 0.0
                                 : static_cast<double>(b.voxel_pairs) / b.tile_pairs},
              {"outputs_identical", b.outputs_identical}};

  text << "primitives " << b.primitives << ", grid " << doc.grid.resolution[0]
       << "x" << doc.grid.resolution[1] << "x" << doc.grid.resolution[2]
       << ", tile size " << b.tile_size << ", repeats " << b.repeats << "\n";
  text << "path   median_ms   pair_count\n";
  text << "naive  " << b.naive.median_ms << "   " << b.voxel_pairs << "\n";
  text << "tiled  " << b.tiled.median_ms << "   " << b.tile_pairs << "\n";
  text << "speedup " << b.speedup << ", outputs identical "
       << (b.outputs_identical ? "yes" : "no") << "\n";

  if (!f.fit_target.empty()) {
    const VoxelGrid target = read_grid(f.fit_target);
    FitFlags ff;
    ff.schedule = f.fit_schedule;
    ff.iters = f.fit_iters;
    ff.seed = f.seed;
    const FitConfig scheduled = fit_config(ff, workers);
    FitConfig fixed = scheduled;
    std::fill(fixed.schedule.begin(), fixed.schedule.end(),
              scheduled.schedule.back());
    Json fits = Json::array();
    for (const FitConfig* cfg : std::array<const FitConfig*, 2>{&fixed, &scheduled}) {
      const FitResult r = fit_scene(target, f.fit_clusters, *cfg);
      const char* name = cfg == &fixed ? "fixed" : "scheduled";
      fits.push_back(Json{{"mode", name},
                          {"schedule", cfg->schedule},
                          {"final_loss", r.final_loss},
                          {"final_iou", r.final_iou}});
      text << "fit " << name << ": loss " << r.final_loss << ", iou "
           << r.final_iou << "\n";
    }
    report["fit_comparison"] = fits;
  }
  write_json(f.report, report);
  return report;
}

}  // namespace

std::vector<CameraModel> default_rig() {
  std::vector<CameraModel> cams;
  const Vec3 position(0.0, 0.0, 1.5);
  for (int i = 0; i < 6; ++i) {
    const double yaw = i * std::numbers::pi / 3.0;
    const Vec3 forward(std::cos(yaw), std::sin(yaw), 0.0);
    const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
    const Vec3 down(0.0, 0.0, -1.0);
    CameraModel cam;
    cam.width = 160;
    cam.height = 90;
    cam.fx = cam.fy = 100.0;
    cam.cx = 80.0;
    cam.cy = 45.0;
    cam.ego_to_camera.rotation.row(0) = right.transpose();
    cam.ego_to_camera.rotation.row(1) = down.transpose();
    cam.ego_to_camera.rotation.row(2) = forward.transpose();
    cam.ego_to_camera.translation = -(cam.ego_to_camera.rotation * position);
    cams.push_back(cam);
  }
  return cams;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Semantic superquadric scenes: splatting, fitting, metrics",
               "squasplat"};
  app.require_subcommand(1);
  int workers = 0;
  bool quiet = false;
  app.add_option("--workers", workers,
                 "Worker threads (default: SQUASPLAT_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "Do not print the summary line");

  GenFlags gen;
  SplatFlags splat;
  FitFlags fit;
  PropagateFlags prop;
  SampleFlags sample;
  MetricsFlags metrics;
  BenchFlags bench;
  add_gen(app, gen);
  add_splat(app, splat);
  add_fit(app, fit);
  add_propagate(app, prop);
  add_sample(app, sample);
  add_metrics(app, metrics);
  add_bench(app, bench);
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto* sub = app.get_subcommands().empty() ? nullptr
                                                    : app.get_subcommands().front();
    out << (sub ? sub->help() : app.help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    Json summary;
    std::ostringstream text;
    if (name == "gen") summary = run_gen(gen);
    else if (name == "splat") summary = run_splat(splat, workers);
    else if (name == "fit") summary = run_fit(fit, workers);
    else if (name == "propagate") summary = run_propagate(prop);
    else if (name == "sample") summary = run_sample(sample);
    else if (name == "metrics") summary = run_metrics(metrics);
    else summary = run_bench(bench, workers, text);
    if (!quiet) {
      if (name == "bench") out << text.str();
      else out << summary.dump() << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace squasplat
