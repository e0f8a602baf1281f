#include <gtest/gtest.h>

#include <algorithm>

#include "envlabel/kdtree.hpp"
#include "support/fixtures.hpp"

using namespace envlabel;
using envlabel::testing::random_structured_cloud;

namespace {

std::vector<std::size_t> brute_ball(const std::vector<Point3>& pts, double qx, double qy, double qz, double r) {
  std::vector<std::size_t> out;
  const double r2 = r * r;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dx = pts[i].x - qx;
    const double dy = pts[i].y - qy;
    const double dz = pts[i].z - qz;
    if ((dx * dx + dy * dy) + dz * dz <= r2) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST(KdTree, EmptyTree) {
  std::vector<Point3> none;
  KdTree tree(none);
  EXPECT_EQ(tree.size(), 0u);
  EXPECT_EQ(tree.count_in_ball(0, 0, 0, 1.0), 0u);
  EXPECT_TRUE(tree.radius_search(0, 0, 0, 1.0).empty());
  EXPECT_THROW(tree.count_neighbors(0, 1.0), std::out_of_range);
}

TEST(KdTree, SinglePointHasNoNeighbors) {
  std::vector<Point3> one = {{1.0, 2.0, 3.0, 0.0f}};
  KdTree tree(one);
  EXPECT_EQ(tree.count_neighbors(0, 10.0), 0u);
  EXPECT_EQ(tree.count_in_ball(1.0, 2.0, 3.0, 0.0), 1u);
}

TEST(KdTree, AllCoincidentPoints) {
  std::vector<Point3> pts(500, Point3{0.5, -0.5, 2.0, 0.0f});
  KdTree tree(pts, 4);
  for (std::size_t i = 0; i < pts.size(); i += 37) EXPECT_EQ(tree.count_neighbors(i, 1e-9), pts.size() - 1);
  EXPECT_EQ(tree.count_neighbors(3, 0.0, 7), 7u);
}

TEST(KdTree, MatchesBruteForceAcrossLeafSizes) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto cloud = random_structured_cloud(rng, 1 + rng.below(1500), 20.0);
    const auto& pts = cloud.points;
    const std::size_t leaf = 1 + rng.below(64);
    KdTree tree(pts, leaf);
    for (int q = 0; q < 50; ++q) {
      const Point3& base = pts[rng.below(pts.size())];
      const double qx = base.x + 0.05 * rng.normal();
      const double qy = base.y + 0.05 * rng.normal();
      const double qz = base.z + 0.05 * rng.normal();
      const double r = rng.uniform(0.0, 1.5);
      const auto expect = brute_ball(pts, qx, qy, qz, r);
      ASSERT_EQ(tree.count_in_ball(qx, qy, qz, r), expect.size());
      ASSERT_EQ(tree.radius_search(qx, qy, qz, r), expect);
    }
  }
}

TEST(KdTree, CountNeighborsExcludesSelfAndHonoursCap) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = random_structured_cloud(rng, 2 + rng.below(800), 10.0);
    const auto& pts = cloud.points;
    KdTree tree(pts);
    for (std::size_t i = 0; i < pts.size(); i += 1 + pts.size() / 60) {
      const double r = rng.uniform(0.0, 1.0);
      const std::size_t full = brute_ball(pts, pts[i].x, pts[i].y, pts[i].z, r).size() - 1;
      ASSERT_EQ(tree.count_neighbors(i, r), full);
      const std::size_t cap = rng.below(6);
      ASSERT_EQ(tree.count_neighbors(i, r, cap), std::min(full, cap));
    }
  }
}

TEST(KdTree, BoundaryDistanceIsInside) {
  // Query radii equal to exact stored distances must count the point.
  Rng rng(23);
  const auto cloud = random_structured_cloud(rng, 600, 10.0);
  const auto& pts = cloud.points;
  KdTree tree(pts, 8);
  for (int t = 0; t < 300; ++t) {
    const std::size_t i = rng.below(pts.size());
    const std::size_t j = rng.below(pts.size());
    const double dx = pts[j].x - pts[i].x;
    const double dy = pts[j].y - pts[i].y;
    const double dz = pts[j].z - pts[i].z;
    const double r = std::sqrt((dx * dx + dy * dy) + dz * dz);
    ASSERT_EQ(tree.count_in_ball(pts[i].x, pts[i].y, pts[i].z, r),
              brute_ball(pts, pts[i].x, pts[i].y, pts[i].z, r).size());
  }
}

TEST(KdTree, WideCoordinateRange) {
  std::vector<Point3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({1e6 + 0.001 * i, -1e6, 0.0, 0.0f});
  for (int i = 0; i < 200; ++i) pts.push_back({-1e6, 1e-3 * i, 5.0, 0.0f});
  KdTree tree(pts, 16);
  EXPECT_EQ(tree.count_neighbors(100, 0.0015), 2u);
  EXPECT_EQ(tree.count_neighbors(300, 0.0015), 2u);
  EXPECT_EQ(tree.count_neighbors(0, 0.0015), 1u);
}
