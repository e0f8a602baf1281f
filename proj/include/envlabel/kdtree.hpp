#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "envlabel/pointcloud.hpp"

namespace envlabel {

/// Static spatial tree over a point set for closed-ball counting with a
/// per-query radius.
///
/// Points are sorted along a Morton curve and stored in structure-of-arrays
/// order, so every node covers a contiguous range and a leaf is scanned with
/// one simd::count_in_ball call. Node bounds are exact point extents; box
/// pruning uses the same subtraction and summation order as the leaf kernel,
/// so it can never drop a point the kernel would count.
class KdTree {
 public:
  static constexpr std::size_t kDefaultLeafSize = 32;
  static constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();

  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = kDefaultLeafSize);

  std::size_t size() const { return xs_.size(); }

  /// Points p with |p - q|^2 <= radius^2. Counting stops once `cap` is reached.
  std::size_t count_in_ball(double qx, double qy, double qz, double radius,
                            std::size_t cap = kNoCap) const;

  /// Points other than `index` within `radius` of point `index`, stopping at
  /// `cap`. Scans the point's own leaf first.
  std::size_t count_neighbors(std::size_t index, double radius, std::size_t cap = kNoCap) const;

  /// Input indices in storage order; queries issued in this order stay cache-local.
  std::span<const std::uint32_t> storage_order() const { return original_; }

  /// Indices (into the original span) of points within `radius` of q, ascending.
  std::vector<std::size_t> radius_search(double qx, double qy, double qz, double radius) const;

 private:
  struct Node {
    double lo[3];
    double hi[3];
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;  // -1 for leaves
    std::int32_t right = -1;
  };

  std::int32_t build(const std::vector<std::uint64_t>& codes, std::uint32_t begin, std::uint32_t end);
  std::size_t count_from(std::int32_t root, double qx, double qy, double qz, double r2,
                         std::size_t cap, std::int32_t skip_leaf, std::size_t already) const;
  std::size_t leaf_count(const Node& n, double qx, double qy, double qz, double r2) const;

  std::size_t leaf_size_;
  std::vector<double> xs_, ys_, zs_;       // leaf order
  std::vector<std::uint32_t> original_;    // leaf position -> input index
  std::vector<std::uint32_t> position_;    // input index -> leaf position
  std::vector<std::int32_t> leaf_of_;      // leaf position -> node
  std::vector<Node> nodes_;
};

}  // namespace envlabel
