#include "envlabel/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "envlabel/errors.hpp"
#include "envlabel/kdtree.hpp"

namespace envlabel {

namespace {

constexpr std::size_t kRecordBytes = 16;

float read_le_float(const std::byte* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
  }
  return std::bit_cast<float>(bits);
}

void write_le_float(std::byte* p, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
  }
  std::memcpy(p, &bits, sizeof bits);
}

}  // namespace

double range_of(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

void LidarSpec::check() const {
  if (!(alpha_deg > 0.0) || !std::isfinite(alpha_deg)) throw std::invalid_argument("LidarSpec: alpha must be > 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("LidarSpec: beta must be > 0");
  if (min_neighbors < 1) throw std::invalid_argument("LidarSpec: min_neighbors must be >= 1");
  if (!(clutter_threshold > 0.0 && clutter_threshold < 1.0)) {
    throw std::invalid_argument("LidarSpec: clutter_threshold must be in (0, 1)");
  }
  if (!(min_radius >= 0.0) || !std::isfinite(min_radius)) {
    throw std::invalid_argument("LidarSpec: min_radius must be >= 0");
  }
}

PointCloud load_point_cloud(std::span<const std::byte> bytes, std::string frame_id) {
  if (bytes.size() % kRecordBytes != 0) {
    throw FormatError("point cloud " + frame_id + ": partial record (" + std::to_string(bytes.size()) +
                      " bytes is not a multiple of 16)");
  }
  PointCloud cloud;
  cloud.frame_id = std::move(frame_id);
  const std::size_t n = bytes.size() / kRecordBytes;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::byte* rec = bytes.data() + i * kRecordBytes;
    const float x = read_le_float(rec);
    const float y = read_le_float(rec + 4);
    const float z = read_le_float(rec + 8);
    const float intensity = read_le_float(rec + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(intensity)) {
      throw FormatError("point cloud " + cloud.frame_id + ": non-finite value in point " + std::to_string(i));
    }
    cloud.points.push_back({x, y, z, intensity});
  }
  return cloud;
}

PointCloud load_point_cloud(std::istream& in, std::string frame_id) {
  std::vector<char> raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return load_point_cloud(std::as_bytes(std::span(raw)), std::move(frame_id));
}

PointCloud load_point_cloud_file(const std::filesystem::path& path, std::string frame_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open point cloud " + path.string());
  return load_point_cloud(in, std::move(frame_id));
}

std::vector<std::byte> encode_point_cloud(const PointCloud& cloud) {
  std::vector<std::byte> out(cloud.size() * kRecordBytes);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    std::byte* rec = out.data() + i * kRecordBytes;
    write_le_float(rec, static_cast<float>(p.x));
    write_le_float(rec + 4, static_cast<float>(p.y));
    write_le_float(rec + 8, static_cast<float>(p.z));
    write_le_float(rec + 12, p.intensity);
  }
  return out;
}

void save_point_cloud_file(const PointCloud& cloud, const std::filesystem::path& path) {
  const auto bytes = encode_point_cloud(cloud);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write point cloud " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

double search_radius(double range, const LidarSpec& spec) {
  const double r = spec.alpha_deg * spec.beta * std::numbers::pi * range / 180.0;
  return std::max(spec.min_radius, r);
}

std::size_t count_neighbors(const PointCloud& cloud, std::size_t index, double radius) {
  if (index >= cloud.size()) throw std::out_of_range("count_neighbors: index out of range");
  if (!(radius > 0.0)) throw std::invalid_argument("count_neighbors: radius must be > 0");
  const KdTree tree(cloud.points);
  return tree.count_neighbors(index, radius);
}

ClutterResult classify_clutter(const PointCloud& cloud, const LidarSpec& spec, ClassifyOptions options) {
  spec.check();
  ClutterResult result;
  result.n_points = cloud.size();
  result.flags.assign(cloud.size(), 0);
  if (cloud.empty()) return result;

  const KdTree tree(cloud.points);
  const std::size_t need = spec.min_neighbors;
  const auto order = tree.storage_order();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const std::size_t i = order[j];
      const double r = search_radius(range_of(cloud.points[i]), spec);
      result.flags[i] = tree.count_neighbors(i, r, need) < need ? 1 : 0;
    }
  };

  unsigned threads = options.threads;
  if (threads == 0) threads = std::min(8u, std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, (cloud.size() + 4095) / 4096));
  if (threads <= 1) {
    work(0, cloud.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cloud.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(cloud.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }

  result.n_clutter = static_cast<std::size_t>(std::count(result.flags.begin(), result.flags.end(), 1));
  result.fraction = static_cast<double>(result.n_clutter) / static_cast<double>(result.n_points);
  return result;
}

Intensity precipitation_intensity(const ClutterResult& result, const LidarSpec& spec) {
  return result.fraction > spec.clutter_threshold ? Intensity::Heavy : Intensity::Light;
}

PointCloud remove_clutter(const PointCloud& cloud, const ClutterResult& result) {
  if (result.flags.size() != cloud.size()) {
    throw std::invalid_argument("remove_clutter: " + std::to_string(result.flags.size()) +
                                " flags for " + std::to_string(cloud.size()) + " points");
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cloud.size() - result.n_clutter);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!result.flags[i]) out.points.push_back(cloud.points[i]);
  }
  return out;
}

}  // namespace envlabel
