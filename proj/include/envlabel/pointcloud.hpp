#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "envlabel/label_model.hpp"

namespace envlabel {

struct Point3 {
  double x = 0.0;  // meters, sensor frame
  double y = 0.0;
  double z = 0.0;
  float intensity = 0.0f;

  bool operator==(const Point3&) const = default;
};

/// Distance from the sensor origin.
double range_of(const Point3& p);

struct PointCloud {
  std::string frame_id;
  std::vector<Point3> points;  // source order

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Clutter-filter parameters.
struct LidarSpec {
  double alpha_deg = 0.1728;        // horizontal angular resolution
  double beta = 3.0;                // radius multiplier
  std::size_t min_neighbors = 3;    // fewer than this many neighbors -> clutter
  double clutter_threshold = 0.08;  // clutter fraction above this -> Heavy
  double min_radius = 0.04;         // search-radius floor, meters

  /// Throws std::invalid_argument naming the first bad field.
  void check() const;
};

struct ClutterResult {
  std::size_t n_points = 0;
  std::size_t n_clutter = 0;
  double fraction = 0.0;             // n_clutter / n_points, 0 for an empty cloud
  std::vector<std::uint8_t> flags;   // 1 = clutter, aligned with the cloud
};

/// Decodes headerless little-endian float32 (x, y, z, intensity) records,
/// 16 bytes per point. Throws FormatError on a partial record or a
/// non-finite value.
PointCloud load_point_cloud(std::span<const std::byte> bytes, std::string frame_id);
PointCloud load_point_cloud(std::istream& in, std::string frame_id);
PointCloud load_point_cloud_file(const std::filesystem::path& path, std::string frame_id);

/// Inverse of load_point_cloud (coordinates narrowed to float32).
std::vector<std::byte> encode_point_cloud(const PointCloud& cloud);
void save_point_cloud_file(const PointCloud& cloud, const std::filesystem::path& path);

/// Range-adaptive search radius: max(min_radius, alpha * beta * pi * range / 180).
double search_radius(double range, const LidarSpec& spec);

/// Number of other points within `radius` (closed ball) of point `index`.
/// Builds a spatial index per call; use KdTree directly for repeated queries.
/// Throws std::out_of_range for a bad index, std::invalid_argument for radius <= 0.
std::size_t count_neighbors(const PointCloud& cloud, std::size_t index, double radius);

struct ClassifyOptions {
  /// Worker threads for the per-point queries; 0 picks min(8, hardware threads).
  unsigned threads = 1;
};

/// Flags every point with fewer than spec.min_neighbors other points inside
/// its search radius.
ClutterResult classify_clutter(const PointCloud& cloud, const LidarSpec& spec,
                               ClassifyOptions options = {});

/// Heavy iff result.fraction > spec.clutter_threshold.
Intensity precipitation_intensity(const ClutterResult& result, const LidarSpec& spec);

/// The cloud without flagged points, order preserved. Throws
/// std::invalid_argument if the flags do not match the cloud.
PointCloud remove_clutter(const PointCloud& cloud, const ClutterResult& result);

}  // namespace envlabel
