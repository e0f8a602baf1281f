#include "envlabel/kdtree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "envlabel/simd/kernels.hpp"

namespace envlabel {

namespace {

constexpr std::uint32_t kGridMax = (1u << 21) - 1;

// Interleaves the low 21 bits of v with two zero bits between each.
std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

std::uint64_t grid(double v, double lo, double scale) {
  const double t = (v - lo) * scale;
  if (!(t > 0.0)) return 0;
  if (t >= kGridMax) return kGridMax;
  return static_cast<std::uint64_t>(t);
}

// Stable LSD radix sort of (code, id) pairs, 11-bit digits.
void radix_sort(std::vector<std::uint64_t>& codes, std::vector<std::uint32_t>& ids) {
  const std::size_t n = codes.size();
  std::vector<std::uint64_t> codes_tmp(n);
  std::vector<std::uint32_t> ids_tmp(n);
  constexpr int kBits = 11;
  constexpr std::size_t kBuckets = std::size_t{1} << kBits;
  for (int shift = 0; shift < 63; shift += kBits) {
    std::size_t counts[kBuckets] = {};
    for (std::size_t i = 0; i < n; ++i) ++counts[(codes[i] >> shift) & (kBuckets - 1)];
    if (counts[(codes[0] >> shift) & (kBuckets - 1)] == n) continue;  // digit constant
    std::size_t sum = 0;
    for (auto& c : counts) {
      const std::size_t v = c;
      c = sum;
      sum += v;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t d = counts[(codes[i] >> shift) & (kBuckets - 1)]++;
      codes_tmp[d] = codes[i];
      ids_tmp[d] = ids[i];
    }
    codes.swap(codes_tmp);
    ids.swap(ids_tmp);
  }
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw std::length_error("KdTree: too many points");
  }
  const auto n = static_cast<std::uint32_t>(points.size());
  if (n == 0) return;

  double lo[3] = {points[0].x, points[0].y, points[0].z};
  double hi[3] = {lo[0], lo[1], lo[2]};
  for (const Point3& p : points) {
    const double c[3] = {p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      lo[a] = c[a] < lo[a] ? c[a] : lo[a];
      hi[a] = c[a] > hi[a] ? c[a] : hi[a];
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  const double scale = extent > 0.0 && std::isfinite(extent) ? kGridMax / extent : 0.0;

  std::vector<std::uint64_t> codes(n);
  original_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Point3& p = points[i];
    codes[i] = spread_bits(grid(p.x, lo[0], scale)) << 2 | spread_bits(grid(p.y, lo[1], scale)) << 1 |
               spread_bits(grid(p.z, lo[2], scale));
    original_[i] = i;
  }
  radix_sort(codes, original_);

  xs_.resize(n);
  ys_.resize(n);
  zs_.resize(n);
  position_.resize(n);
  for (std::uint32_t pos = 0; pos < n; ++pos) {
    const Point3& p = points[original_[pos]];
    xs_[pos] = p.x;
    ys_[pos] = p.y;
    zs_[pos] = p.z;
    position_[original_[pos]] = pos;
  }

  nodes_.reserve(2 * (n / leaf_size_ + 1));
  build(codes, 0, n);
  leaf_of_.assign(n, -1);
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& node = nodes_[k];
    if (node.left >= 0) continue;
    for (std::uint32_t pos = node.begin; pos < node.end; ++pos) leaf_of_[pos] = static_cast<std::int32_t>(k);
  }
}

// Ranges are split where the highest differing Morton bit flips, or at the
// middle when all codes are equal. Every level consumes at least one code
// bit or halves a run of equal codes, so depth stays below 63 + 32.
std::int32_t KdTree::build(const std::vector<std::uint64_t>& codes, std::uint32_t begin, std::uint32_t end) {
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;

  if (end - begin <= leaf_size_) {
    for (int a = 0; a < 3; ++a) {
      node.lo[a] = std::numeric_limits<double>::infinity();
      node.hi[a] = -std::numeric_limits<double>::infinity();
    }
    for (std::uint32_t i = begin; i < end; ++i) {
      const double c[3] = {xs_[i], ys_[i], zs_[i]};
      for (int a = 0; a < 3; ++a) {
        node.lo[a] = c[a] < node.lo[a] ? c[a] : node.lo[a];
        node.hi[a] = c[a] > node.hi[a] ? c[a] : node.hi[a];
      }
    }
    nodes_[static_cast<std::size_t>(self)] = node;
    return self;
  }

  std::uint32_t split = begin + (end - begin) / 2;
  const std::uint64_t diff = codes[begin] ^ codes[end - 1];
  if (diff != 0) {
    const std::uint64_t bit = std::uint64_t{1} << (63 - std::countl_zero(diff));
    split = static_cast<std::uint32_t>(
        std::partition_point(codes.begin() + begin, codes.begin() + end,
                             [bit](std::uint64_t c) { return (c & bit) == 0; }) -
        codes.begin());
  }
  node.left = build(codes, begin, split);
  node.right = build(codes, split, end);

  const Node& l = nodes_[static_cast<std::size_t>(node.left)];
  const Node& r = nodes_[static_cast<std::size_t>(node.right)];
  for (int a = 0; a < 3; ++a) {
    node.lo[a] = std::min(l.lo[a], r.lo[a]);
    node.hi[a] = std::max(l.hi[a], r.hi[a]);
  }
  nodes_[static_cast<std::size_t>(self)] = node;
  return self;
}

std::size_t KdTree::leaf_count(const Node& n, double qx, double qy, double qz, double r2) const {
  const std::size_t len = n.end - n.begin;
  return simd::count_in_ball({xs_.data() + n.begin, len}, {ys_.data() + n.begin, len},
                             {zs_.data() + n.begin, len}, qx, qy, qz, r2);
}

std::size_t KdTree::count_from(std::int32_t root, double qx, double qy, double qz, double r2,
                               std::size_t cap, std::int32_t skip_leaf, std::size_t already) const {
  std::size_t count = already;
  if (root < 0 || count >= cap) return count;
  const Node* skip = skip_leaf >= 0 ? &nodes_[static_cast<std::size_t>(skip_leaf)] : nullptr;
  const double q[3] = {qx, qy, qz};

  std::int32_t stack[128];
  int top = 0;
  stack[top++] = root;
  while (top > 0) {
    const std::int32_t k = stack[--top];
    if (k == skip_leaf) continue;
    const Node& n = nodes_[static_cast<std::size_t>(k)];

    // Differences are taken as bound - q, the same operand order (up to sign)
    // as the leaf kernel's p - q, so rounding is monotone between the two.
    double near[3];
    double far[3];
    for (int a = 0; a < 3; ++a) {
      const double dlo = n.lo[a] - q[a];
      const double dhi = n.hi[a] - q[a];
      near[a] = q[a] < n.lo[a] ? dlo : (q[a] > n.hi[a] ? dhi : 0.0);
      far[a] = std::max(dlo < 0 ? -dlo : dlo, dhi < 0 ? -dhi : dhi);
    }
    const double near2 = (near[0] * near[0] + near[1] * near[1]) + near[2] * near[2];
    if (near2 > r2) continue;
    const double far2 = (far[0] * far[0] + far[1] * far[1]) + far[2] * far[2];
    if (far2 <= r2) {
      std::size_t inside = n.end - n.begin;
      if (skip != nullptr && skip->begin >= n.begin && skip->end <= n.end) {
        inside -= skip->end - skip->begin;
      }
      count += inside;
    } else if (n.left < 0) {
      count += leaf_count(n, qx, qy, qz, r2);
    } else {
      // Visit the nearer child first.
      const Node& l = nodes_[static_cast<std::size_t>(n.left)];
      const Node& r = nodes_[static_cast<std::size_t>(n.right)];
      double cl = 0.0;
      double cr = 0.0;
      for (int a = 0; a < 3; ++a) {
        cl += q[a] < l.lo[a] ? l.lo[a] - q[a] : (q[a] > l.hi[a] ? q[a] - l.hi[a] : 0.0);
        cr += q[a] < r.lo[a] ? r.lo[a] - q[a] : (q[a] > r.hi[a] ? q[a] - r.hi[a] : 0.0);
      }
      if (cl <= cr) {
        stack[top++] = n.right;
        stack[top++] = n.left;
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
    if (count >= cap) return cap;
  }
  return count;
}

std::size_t KdTree::count_in_ball(double qx, double qy, double qz, double radius,
                                  std::size_t cap) const {
  if (nodes_.empty()) return 0;
  const std::size_t c = count_from(0, qx, qy, qz, radius * radius, cap, -1, 0);
  return std::min(c, cap);
}

std::size_t KdTree::count_neighbors(std::size_t index, double radius, std::size_t cap) const {
  if (index >= position_.size()) throw std::out_of_range("KdTree::count_neighbors: index out of range");
  const std::uint32_t pos = position_[index];
  const double qx = xs_[pos];
  const double qy = ys_[pos];
  const double qz = zs_[pos];
  const double r2 = radius * radius;
  // The query point is in the tree and always counts itself once.
  const std::size_t cap_with_self = cap == kNoCap ? kNoCap : cap + 1;
  const std::int32_t own = leaf_of_[pos];
  std::size_t c = leaf_count(nodes_[static_cast<std::size_t>(own)], qx, qy, qz, r2);
  if (c < cap_with_self) c = count_from(0, qx, qy, qz, r2, cap_with_self, own, c);
  return std::min(c, cap_with_self) - 1;
}

std::vector<std::size_t> KdTree::radius_search(double qx, double qy, double qz, double radius) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  const double r2 = radius * radius;
  const double q[3] = {qx, qy, qz};
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    double near[3];
    for (int a = 0; a < 3; ++a) {
      near[a] = q[a] < n.lo[a] ? n.lo[a] - q[a] : (q[a] > n.hi[a] ? n.hi[a] - q[a] : 0.0);
    }
    if ((near[0] * near[0] + near[1] * near[1]) + near[2] * near[2] > r2) continue;
    if (n.left >= 0) {
      stack.push_back(n.left);
      stack.push_back(n.right);
      continue;
    }
    for (std::uint32_t pos = n.begin; pos < n.end; ++pos) {
      const double dx = xs_[pos] - qx;
      const double dy = ys_[pos] - qy;
      const double dz = zs_[pos] - qz;
      if ((dx * dx + dy * dy) + dz * dz <= r2) out.push_back(original_[pos]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace envlabel
