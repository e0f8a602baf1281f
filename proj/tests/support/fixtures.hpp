#pragma once

#include <stdlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "envlabel/focal_trainer.hpp"
#include "envlabel/label_model.hpp"
#include "envlabel/metrics.hpp"
#include "envlabel/pointcloud.hpp"
#include "envlabel/random.hpp"
#include "envlabel/record.hpp"

namespace envlabel::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "envlabel-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// nx x ny grid in the plane x = range, centred on the x axis.
inline PointCloud planar_grid(std::size_t nx, std::size_t ny, double pitch, double range) {
  PointCloud c;
  c.frame_id = "grid";
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      c.points.push_back({range, (static_cast<double>(i) - static_cast<double>(nx - 1) / 2.0) * pitch,
                          (static_cast<double>(j) - static_cast<double>(ny - 1) / 2.0) * pitch, 0.5f});
    }
  }
  return c;
}

// Points spread over a sphere about the origin (Fibonacci lattice).
inline std::vector<Point3> sphere_points(std::size_t n, double radius) {
  std::vector<Point3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double t = golden * static_cast<double>(i);
    out.push_back({radius * r * std::cos(t), radius * r * std::sin(t), radius * z, 0.0f});
  }
  return out;
}

// A dense 3 cm grid at 5 m plus `isolated` points on a 20 m sphere.
inline PointCloud grid_with_isolated(std::size_t nx, std::size_t ny, std::size_t isolated, std::string frame_id) {
  PointCloud c = planar_grid(nx, ny, 0.03, 5.0);
  for (const auto& p : sphere_points(isolated, 20.0)) c.points.push_back(p);
  c.frame_id = std::move(frame_id);
  return c;
}

// Three frames with images and clouds:
//   seq01_000  100 grid + 2 isolated   -> Light (1.96 %)
//   seq01_001  100 grid + 15 isolated  -> Heavy (13.0 %)
//   seq02_000  200 grid + 16 isolated  -> Light (7.41 %)
// With `drop_cloud` the second frame's cloud file is not written.
inline std::filesystem::path write_three_frame_dataset(const std::filesystem::path& dir, bool drop_cloud = false) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "lidar");
  const std::vector<PointCloud> clouds = {grid_with_isolated(10, 10, 2, "seq01_000"),
                                          grid_with_isolated(10, 10, 15, "seq01_001"),
                                          grid_with_isolated(20, 10, 16, "seq02_000")};
  std::string manifest = "# frame_id\timage\tcloud\n";
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const std::string id = clouds[i].frame_id;
    write_text(dir / "images" / (id + ".png"), "\x89PNG fake " + id);
    if (!(drop_cloud && i == 1)) save_point_cloud_file(clouds[i], dir / "lidar" / (id + ".bin"));
    manifest += id + "\timages/" + id + ".png\tlidar/" + id + ".bin\n";
  }
  write_text(dir / "manifest.tsv", manifest);
  return dir / "manifest.tsv";
}

// O(n^2) reference: every point against every other point.
inline std::vector<std::uint8_t> naive_clutter_flags(const PointCloud& cloud, const LidarSpec& spec) {
  const auto& p = cloud.points;
  std::vector<std::uint8_t> flags(p.size(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double range = std::sqrt(p[i].x * p[i].x + p[i].y * p[i].y + p[i].z * p[i].z);
    const double r = std::max(spec.min_radius, spec.alpha_deg * spec.beta * std::numbers::pi * range / 180.0);
    const double r2 = r * r;
    std::size_t n = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j == i) continue;
      const double dx = p[j].x - p[i].x;
      const double dy = p[j].y - p[i].y;
      const double dz = p[j].z - p[i].z;
      if ((dx * dx + dy * dy) + dz * dz <= r2) ++n;
    }
    flags[i] = n < spec.min_neighbors ? 1 : 0;
  }
  return flags;
}

// Mixture of uniform noise, tight blobs, jittered planar patches and exact
// duplicates inside a cube of side `box` centred on the sensor.
inline PointCloud random_structured_cloud(Rng& rng, std::size_t n, double box = 50.0) {
  PointCloud cloud;
  cloud.frame_id = "random";
  const double h = box / 2.0;
  auto& pts = cloud.points;
  while (pts.size() < n) {
    const std::size_t left = n - pts.size();
    const std::size_t kind = rng.below(4);
    const double cx = rng.uniform(-h, h);
    const double cy = rng.uniform(-h, h);
    const double cz = rng.uniform(-h, h);
    if (kind == 0) {
      pts.push_back({cx, cy, cz, 0.0f});
    } else if (kind == 1) {
      const double sigma = rng.uniform(0.01, 0.3);
      const std::size_t m = std::min<std::size_t>(left, 1 + rng.below(60));
      for (std::size_t k = 0; k < m; ++k) {
        pts.push_back({cx + sigma * rng.normal(), cy + sigma * rng.normal(), cz + sigma * rng.normal(), 1.0f});
      }
    } else if (kind == 2) {
      const double pitch = rng.uniform(0.01, 0.12);
      const double jitter = pitch * rng.uniform(0.0, 0.3);
      const std::size_t side = 2 + rng.below(10);
      for (std::size_t a = 0; a < side && pts.size() < n; ++a) {
        for (std::size_t b = 0; b < side && pts.size() < n; ++b) {
          pts.push_back({cx + pitch * static_cast<double>(a) + jitter * rng.normal(),
                         cy + pitch * static_cast<double>(b) + jitter * rng.normal(), cz, 2.0f});
        }
      }
    } else if (!pts.empty()) {
      pts.push_back(pts[rng.below(pts.size())]);
    }
  }
  return cloud;
}

inline LidarSpec random_spec(Rng& rng) {
  LidarSpec s;
  s.alpha_deg = rng.uniform(0.05, 0.4);
  s.beta = rng.uniform(1.0, 5.0);
  s.min_neighbors = 1 + rng.below(6);
  s.min_radius = rng.uniform(0.01, 0.1);
  return s;
}

// ---------------------------------------------------------------------------
// Ray-cast street scene: a 64-beam scanner with the default horizontal
// resolution between two building facades, with parked cars on both sides.

struct Box {
  std::array<double, 3> lo;
  std::array<double, 3> hi;
};

struct StreetScene {
  double sensor_height = 1.73;
  double street_half_width = 10.0;
  double facade_half_length = 35.0;
  double facade_height = 12.0;
  double max_range = 40.0;
  double min_range = 1.5;
  double range_noise = 0.002;
  std::size_t beams = 64;
  double top_elevation_deg = 2.0;
  double beam_step_deg = 0.425;
  double azimuth_step_deg = 0.1728;
  std::vector<Box> cars;

  static StreetScene standard() {
    StreetScene s;
    const double ground = -s.sensor_height;
    for (double x : {-24.0, -14.0, 6.0, 17.0}) {
      s.cars.push_back({{x, 5.5, ground}, {x + 4.5, 7.3, ground + 1.5}});
    }
    for (double x : {-20.0, -3.0, 11.0, 26.0}) {
      s.cars.push_back({{x, -7.3, ground}, {x + 4.5, -5.5, ground + 1.5}});
    }
    return s;
  }

  bool inside_car(double x, double y, double z, double margin) const {
    for (const auto& b : cars) {
      if (x >= b.lo[0] - margin && x <= b.hi[0] + margin && y >= b.lo[1] - margin && y <= b.hi[1] + margin &&
          z >= b.lo[2] - margin && z <= b.hi[2] + margin) {
        return true;
      }
    }
    return false;
  }

  std::optional<double> hit(const std::array<double, 3>& d) const {
    double best = max_range;
    bool found = false;
    auto consider = [&](double t) {
      if (t >= min_range && t < best) {
        best = t;
        found = true;
      }
    };
    const double ground = -sensor_height;
    if (d[2] < 0.0) consider(ground / d[2]);
    for (double wy : {street_half_width, -street_half_width}) {
      if (d[1] * wy <= 0.0) continue;
      const double t = wy / d[1];
      const double x = t * d[0];
      const double z = t * d[2];
      if (std::abs(x) <= facade_half_length && z >= ground && z <= ground + facade_height) consider(t);
    }
    for (const auto& b : cars) {
      double t0 = 0.0;
      double t1 = max_range;
      bool miss = false;
      for (int k = 0; k < 3 && !miss; ++k) {
        if (d[k] == 0.0) {
          miss = 0.0 < b.lo[k] || 0.0 > b.hi[k];
          continue;
        }
        double a = b.lo[k] / d[k];
        double c = b.hi[k] / d[k];
        if (a > c) std::swap(a, c);
        t0 = std::max(t0, a);
        t1 = std::min(t1, c);
        miss = t0 > t1;
      }
      if (!miss) consider(t0);
    }
    if (!found) return std::nullopt;
    return best;
  }

  PointCloud scan(Rng& rng) const {
    PointCloud cloud;
    cloud.frame_id = "street";
    const double deg = std::numbers::pi / 180.0;
    const auto steps = static_cast<std::size_t>(std::floor(360.0 / azimuth_step_deg));
    for (std::size_t b = 0; b < beams; ++b) {
      const double el = (top_elevation_deg - beam_step_deg * static_cast<double>(b)) * deg;
      for (std::size_t j = 0; j < steps; ++j) {
        const double az = azimuth_step_deg * static_cast<double>(j) * deg;
        const std::array<double, 3> d = {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
        const auto t = hit(d);
        if (!t) continue;
        const double r = *t + range_noise * rng.normal();
        cloud.points.push_back({r * d[0], r * d[1], r * d[2], 0.5f});
      }
    }
    return cloud;
  }

  // Appends free-floating particles so that they make up `percent` of the
  // resulting cloud. Returns how many were added.
  std::size_t inject_particles(PointCloud& cloud, double percent, Rng& rng) const {
    const double n_scene = static_cast<double>(cloud.points.size());
    const auto n = static_cast<std::size_t>(std::llround(percent * n_scene / (100.0 - percent)));
    const double ground = -sensor_height;
    std::size_t added = 0;
    while (added < n) {
      const double x = rng.uniform(-30.0, 30.0);
      const double y = rng.uniform(-(street_half_width - 0.5), street_half_width - 0.5);
      const double z = rng.uniform(ground + 0.4, ground + 6.0);
      if (x * x + y * y < 4.0 || inside_car(x, y, z, 0.3)) continue;
      cloud.points.push_back({x, y, z, 0.05f});
      ++added;
    }
    return added;
  }
};

// ---------------------------------------------------------------------------
// Annotations

inline std::string random_frame_id(Rng& rng) {
  static const std::array<std::string, 8> pieces = {"frame", "_", "-", "\xc3\xa9", "\"q\"", "\\", "\t", "/"};
  std::string id = "f" + std::to_string(rng.below(1000000));
  const std::size_t extra = rng.below(3);
  for (std::size_t i = 0; i < extra; ++i) id += pieces[rng.below(pieces.size())];
  return id;
}

template <typename E>
E random_enum(Rng& rng) {
  return static_cast<E>(rng.below(enum_names<E>().size()));
}

inline Timestamp random_timestamp(Rng& rng) {
  // 2000-01-01 .. 2100-01-01
  const std::int64_t lo = 946684800000LL;
  const std::int64_t hi = 4102444800000LL;
  return Timestamp(std::chrono::milliseconds(lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo)))));
}

// Draft-valid annotation; with `final_label` every category is set.
inline FrameAnnotation random_annotation(Rng& rng, bool final_label = false) {
  FrameAnnotation a;
  a.frame_id = random_frame_id(rng);
  auto pick = [&] { return final_label || rng.uniform() < 0.7; };
  LabelDraft& l = a.label;
  if (pick()) l.daytime = random_enum<Daytime>(rng);
  if (pick()) l.fog = random_enum<Fog>(rng);
  if (pick()) l.road = random_enum<Surface>(rng);
  if (pick()) l.roadside = random_enum<Surface>(rng);
  if (pick()) l.infrastructure = random_enum<Infrastructure>(rng);
  for (Category c : kCategories) {
    if (c != Category::Precipitation && l.has(c)) a.provenance[c] = Source::Human;
  }

  if (pick()) l.precipitation_kind = random_enum<PrecipitationKind>(rng);
  const bool kind_none = l.precipitation_kind == PrecipitationKind::None;
  if (!kind_none && (final_label ? l.precipitation_kind.has_value() : rng.uniform() < 0.6)) {
    l.precipitation_intensity = random_enum<Intensity>(rng);
  }
  if (rng.uniform() < 0.6) a.clutter_fraction = rng.uniform();
  if (l.has(Category::Precipitation)) {
    const bool can_be_auto = l.precipitation_intensity && a.clutter_fraction;
    a.provenance[Category::Precipitation] = can_be_auto && rng.uniform() < 0.5 ? Source::Auto : Source::Human;
  }
  a.updated_at = random_timestamp(rng);
  return a;
}

struct Mutation {
  std::string name;
  FrameAnnotation annotation;
  ValidationMode mode = ValidationMode::Draft;
};

// Every single-constraint break reachable by changing one field of `a`,
// which must be Final-valid. Each result violates exactly one rule.
inline std::vector<Mutation> single_fault_mutations(const FrameAnnotation& a) {
  std::vector<Mutation> out;
  auto add = [&](std::string name, auto change, ValidationMode mode = ValidationMode::Draft) {
    FrameAnnotation m = a;
    change(m);
    out.push_back({std::move(name), std::move(m), mode});
  };
  add("empty frame_id", [](FrameAnnotation& m) { m.frame_id.clear(); });
  for (Category c : kCategories) {
    const std::string key(category_key(c));
    add("unset provenance on " + key, [c](FrameAnnotation& m) { m.provenance[c] = Source::Unset; });
    add("value removed from " + key, [c](FrameAnnotation& m) { m.label.clear(c); });
    add("category " + key + " missing in final", [c](FrameAnnotation& m) {
      m.label.clear(c);
      m.provenance[c] = Source::Unset;
    }, ValidationMode::Final);
  }
  const auto kind = a.label.precipitation_kind;
  if (kind == PrecipitationKind::None) {
    add("intensity with kind None", [](FrameAnnotation& m) { m.label.precipitation_intensity = Intensity::Heavy; });
  } else {
    add("kind set to None beside intensity",
        [](FrameAnnotation& m) { m.label.precipitation_kind = PrecipitationKind::None; });
    add("intensity dropped in final", [](FrameAnnotation& m) {
      m.label.precipitation_intensity.reset();
      if (m.provenance[Category::Precipitation] == Source::Auto) m.provenance[Category::Precipitation] = Source::Human;
    }, ValidationMode::Final);
    add("kind dropped in final", [](FrameAnnotation& m) { m.label.precipitation_kind.reset(); },
        ValidationMode::Final);
    add("auto precipitation without clutter fraction", [](FrameAnnotation& m) {
      m.provenance[Category::Precipitation] = Source::Auto;
      m.clutter_fraction.reset();
    });
  }
  add("clutter fraction below 0", [](FrameAnnotation& m) { m.clutter_fraction = -0.25; });
  add("clutter fraction above 1", [](FrameAnnotation& m) { m.clutter_fraction = 1.5; });
  add("clutter fraction NaN", [](FrameAnnotation& m) { m.clutter_fraction = std::nan(""); });
  return out;
}

// Single edits of a serialized record that deserialize must reject.
inline std::vector<std::pair<std::string, std::string>> record_mutations(const FrameAnnotation& a) {
  std::vector<std::pair<std::string, std::string>> out;
  const Json base = to_json(a);
  auto edit = [&](std::string name, auto change) {
    Json j = base;
    change(j);
    out.emplace_back(std::move(name), j.dump());
  };
  for (const auto& item : base.items()) {
    const std::string key = item.key();
    edit("missing " + key, [&](Json& j) { j.erase(key); });
  }
  for (const char* key : {"daytime", "precipitation_kind", "precipitation_intensity", "fog", "road", "roadside",
                          "infrastructure"}) {
    edit(std::string(key) + " unknown value", [&](Json& j) { j[key] = "Drizzle"; });
    edit(std::string(key) + " wrong type", [&](Json& j) { j[key] = 3; });
  }
  for (Category c : kCategories) {
    const std::string key(category_key(c));
    edit("provenance missing " + key, [&](Json& j) { j["provenance"].erase(key); });
    edit("provenance " + key + " unknown source", [&](Json& j) { j["provenance"][key] = "Robot"; });
  }
  edit("provenance extra key", [](Json& j) { j["provenance"]["weather"] = "Human"; });
  edit("provenance not an object", [](Json& j) { j["provenance"] = "Human"; });
  edit("unknown key", [](Json& j) { j["comment"] = "x"; });
  edit("frame_id wrong type", [](Json& j) { j["frame_id"] = 7; });
  edit("frame_id null", [](Json& j) { j["frame_id"] = nullptr; });
  edit("clutter_fraction as string", [](Json& j) { j["clutter_fraction"] = "0.5"; });
  edit("updated_at malformed", [](Json& j) { j["updated_at"] = "yesterday"; });
  edit("updated_at wrong type", [](Json& j) { j["updated_at"] = 1700000000; });
  const std::string text = base.dump();
  out.emplace_back("duplicate key", "{\"fog\":null," + text.substr(1));
  out.emplace_back("truncated", text.substr(0, text.size() - 1));
  out.emplace_back("not an object", "[" + text + "]");
  out.emplace_back("trailing garbage", text + "x");
  return out;
}

// --- metrics oracle ------------------------------------------------------------

/// Precision/recall at every distinct threshold t (predict positive iff
/// score >= t), summed as (R_k - R_{k-1}) * P_k from the highest threshold down.
inline std::optional<double> brute_force_auprc(const std::vector<metrics::ScoredPrediction>& preds, std::size_t cls) {
  std::size_t positives = 0;
  std::vector<double> thresholds;
  for (const auto& p : preds) {
    positives += p.truth == cls ? 1 : 0;
    thresholds.push_back(p.scores[cls]);
  }
  if (positives == 0) return std::nullopt;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0;
    std::size_t predicted = 0;
    for (const auto& p : preds) {
      if (p.scores[cls] >= t) {
        ++predicted;
        tp += p.truth == cls ? 1 : 0;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

/// n <= 100 samples over `classes` classes; scores drawn from a coarse grid so ties occur.
inline std::vector<metrics::ScoredPrediction> random_scored(Rng& rng, std::size_t classes) {
  const std::size_t n = 1 + rng.below(100);
  std::vector<metrics::ScoredPrediction> out(n);
  const std::size_t levels = 2 + rng.below(30);
  for (auto& p : out) {
    p.truth = rng.below(classes);
    p.scores.resize(classes);
    for (auto& s : p.scores) s = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
  }
  return out;
}

// --- focal trainer ---------------------------------------------------------------

/// Small random model (biases randomized too) and batch for gradient checks.
struct GradientCase {
  focal::ToyModel model;
  std::vector<focal::SyntheticSample> batch;
  focal::FocalLossParams params;
};

inline GradientCase random_gradient_case(Rng& rng) {
  focal::ToyModelConfig cfg;
  cfg.input_dim = 2 + rng.below(6);
  cfg.trunk_widths.clear();
  for (std::size_t l = 0, n = 1 + rng.below(2); l < n; ++l) cfg.trunk_widths.push_back(2 + rng.below(6));
  cfg.head_hidden = 2 + rng.below(5);
  cfg.seed = rng.next();
  GradientCase g{focal::ToyModel::initialize(cfg), {}, focal::FocalLossParams::uniform(cfg.class_counts)};
  for (auto block : g.model.parameters()) {
    for (auto& v : block) v += 0.1 * rng.normal();
  }
  g.params.gamma = rng.uniform(0.0, 4.0);
  for (auto& w : g.params.class_weights) {
    for (auto& a : w) a = rng.uniform(0.25, 2.0);
  }
  for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) {
    focal::SyntheticSample s;
    for (std::size_t d = 0; d < cfg.input_dim; ++d) s.features.push_back(rng.normal());
    for (std::size_t h = 0; h < focal::kHeads; ++h) s.targets[h] = rng.below(cfg.class_counts[h]);
    g.batch.push_back(std::move(s));
  }
  return g;
}

/// max |analytic - central difference| / max |central difference| over all
/// parameters, central differences taken with step h.
inline double gradient_relative_error(const GradientCase& g, double h = 1e-5) {
  const auto analytic = focal::loss_gradient(g.model, g.batch, g.params);
  const auto grads = analytic.gradient.parameters();
  focal::ToyModel probe = g.model;
  auto blocks = probe.parameters();
  double max_diff = 0.0;
  double max_ref = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const double up = focal::batch_loss(probe, g.batch, g.params);
      blocks[b][i] = saved - h;
      const double down = focal::batch_loss(probe, g.batch, g.params);
      blocks[b][i] = saved;
      const double numeric = (up - down) / (2 * h);
      max_diff = std::max(max_diff, std::abs(grads[b][i] - numeric));
      max_ref = std::max(max_ref, std::abs(numeric));
    }
  }
  return max_ref > 0 ? max_diff / max_ref : max_diff;
}

}  // namespace envlabel::testing
