#include "locgan/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace locgan;

namespace {

/// Independent point-in-polygon oracle (crossing number), deliberately a
/// different algorithm from the renderer's sign-of-cross test.
bool crossing_number_contains(const ConvexPolygon& poly, Vec2 p) {
  int crossings = 0;
  const size_t n = poly.pts.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 a = poly.pts[i];
    const Vec2 b = poly.pts[(i + 1) % n];
    if ((a.y <= p.y && b.y > p.y) || (b.y <= p.y && a.y > p.y)) {
      const double t = (p.y - a.y) / (b.y - a.y);
      if (p.x < a.x + t * (b.x - a.x)) ++crossings;
    }
  }
  return (crossings % 2) == 1;
}

SceneSpec empty_scene(double extent = 100.0) {
  SceneSpec s;
  s.extent_x = extent;
  s.extent_y = extent;
  return s;
}

}  // namespace

// ============================================================================
// generate_scene
// ============================================================================

TEST(GenerateScene, SameSeedIsIdentical) {
  const SceneParams params;
  const SceneSpec a = generate_scene(42, params);
  const SceneSpec b = generate_scene(42, params);
  ASSERT_EQ(a.buildings.size(), b.buildings.size());
  ASSERT_EQ(a.trees.size(), b.trees.size());
  ASSERT_EQ(a.dynamic_obstacles.size(), b.dynamic_obstacles.size());
  ASSERT_EQ(a.shadow_polygons.size(), b.shadow_polygons.size());
  for (size_t i = 0; i < a.buildings.size(); ++i) {
    ASSERT_EQ(a.buildings[i].height, b.buildings[i].height);
    for (size_t j = 0; j < a.buildings[i].footprint.pts.size(); ++j) {
      ASSERT_EQ(a.buildings[i].footprint.pts[j].x,
                b.buildings[i].footprint.pts[j].x);
      ASSERT_EQ(a.buildings[i].footprint.pts[j].y,
                b.buildings[i].footprint.pts[j].y);
    }
  }
  for (size_t i = 0; i < a.trees.size(); ++i) {
    ASSERT_EQ(a.trees[i].center.x, b.trees[i].center.x);
    ASSERT_EQ(a.trees[i].canopy_radius, b.trees[i].canopy_radius);
  }
}

TEST(GenerateScene, ZeroDensityGivesEmptyLists) {
  SceneParams params;
  params.building_density = 0.0;
  params.tree_density = 0.0;
  params.dynamic_density = 0.0;
  params.shadows = false;
  const SceneSpec s = generate_scene(7, params);
  EXPECT_TRUE(s.buildings.empty());
  EXPECT_TRUE(s.trees.empty());
  EXPECT_TRUE(s.dynamic_obstacles.empty());
  EXPECT_TRUE(s.shadow_polygons.empty());
}

TEST(GenerateScene, MeanCountsTrackConfiguredDensity) {
  SceneParams params;
  double buildings = 0.0, trees = 0.0, dynamics = 0.0;
  const int n = 100;
  for (int seed = 0; seed < n; ++seed) {
    const SceneSpec s = generate_scene(static_cast<uint64_t>(seed), params);
    buildings += static_cast<double>(s.buildings.size());
    trees += static_cast<double>(s.trees.size());
    dynamics += static_cast<double>(s.dynamic_obstacles.size());
  }
  buildings /= n;
  trees /= n;
  dynamics /= n;
  EXPECT_NEAR(buildings, params.building_density, 0.2 * params.building_density);
  EXPECT_NEAR(trees, params.tree_density, 0.2 * params.tree_density);
  EXPECT_NEAR(dynamics, params.dynamic_density, 0.2 * params.dynamic_density);
}

TEST(GenerateScene, GeometryStaysInsideExtent) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const SceneSpec s = generate_scene(seed, SceneParams{});
    for (const Building& b : s.buildings)
      for (const Vec2& p : b.footprint.pts) {
        ASSERT_LE(std::abs(p.x), s.extent_x * 0.5);
        ASSERT_LE(std::abs(p.y), s.extent_y * 0.5);
      }
    for (const Building& b : s.buildings) ASSERT_GT(b.height, 0.0);
    for (const Tree& t : s.trees) ASSERT_GT(t.height, 0.0);
  }
}

// ============================================================================
// render_aerial
// ============================================================================

TEST(RenderAerial, EmptySceneIsUniformGround) {
  const SceneSpec s = empty_scene();
  const Raster r = render_aerial(s, Pose2D::identity(), 32, 0.5);
  for (int i = 1; i < 32 * 32; ++i) ASSERT_EQ(r.data[i], r.data[0]);
  EXPECT_NEAR(r.data[0], 0.52f, 1e-6);
}

TEST(RenderAerial, Deterministic) {
  const SceneSpec s = generate_scene(11, SceneParams{});
  const Pose2D pose = make_pose(5.0, 2.0, 0.3);
  const Raster a = render_aerial(s, pose, 64, 0.5);
  const Raster b = render_aerial(s, pose, 64, 0.5);
  ASSERT_EQ(0, std::memcmp(a.data.data(), b.data.data(),
                           sizeof(float) * a.data.size()));
}

TEST(RenderAerial, RoofCoversExactPolygonRasterization) {
  SceneSpec s = empty_scene();
  Building b;
  b.footprint = make_rect({0.0, 10.0}, 20.0, 10.0);  // covers local y in [0,20]
  b.height = 10.0;
  b.roof_intensity = 0.8f;
  s.buildings.push_back(b);
  const Raster r = render_aerial(s, Pose2D::identity(), 32, 0.5);
  int inside_count = 0;
  for (int row = 0; row < 32; ++row)
    for (int col = 0; col < 32; ++col) {
      const Vec2 w = r.pixel_to_world(row, col);
      const bool inside = crossing_number_contains(b.footprint, w);
      if (inside) {
        ASSERT_FLOAT_EQ(r.at(0, row, col), 0.8f) << row << "," << col;
        ++inside_count;
      } else {
        ASSERT_NEAR(r.at(0, row, col), 0.52f, 1e-6) << row << "," << col;
      }
    }
  // the building occupies the left half of the raster
  EXPECT_EQ(inside_count, 32 * 16);
}

TEST(RenderAerial, FootprintOutsideExtentRejected) {
  const SceneSpec s = empty_scene(20.0);
  EXPECT_THROW(render_aerial(s, Pose2D::identity(), 64, 0.5), RangeError);
  EXPECT_THROW(render_aerial(s, make_pose(9.0, 0.0, 0.0), 16, 0.5), RangeError);
}

TEST(RenderAerial, ValuesStayInUnitInterval) {
  const SceneSpec s = generate_scene(3, SceneParams{});
  const Raster r = render_aerial(s, make_pose(0, 0, 0.7), 64, 0.5);
  for (float v : r.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

// ============================================================================
// render_gridmap
// ============================================================================

TEST(RenderGridmap, EmptySceneIsAllZero) {
  const SceneSpec s = empty_scene();
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  for (float v : r.data) ASSERT_EQ(v, 0.0f);
}

TEST(RenderGridmap, DynamicObstaclesNeverAppear) {
  SceneSpec s = empty_scene();
  DynamicObstacle d;
  d.footprint = make_rect({4.0, 0.0}, 2.2, 0.95);
  d.height = 1.8;
  s.dynamic_obstacles.push_back(d);
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  for (float v : r.data) ASSERT_EQ(v, 0.0f);
}

TEST(RenderGridmap, LowBuildingFilteredByHeight) {
  SceneSpec s = empty_scene();
  Building b;
  b.footprint = make_rect({5.0, 0.0}, 1.0, 4.0);
  b.height = 2.5;  // below the 3 m cut
  s.buildings.push_back(b);
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  for (float v : r.data) ASSERT_EQ(v, 0.0f);
}

TEST(RenderGridmap, NearWallOccludesFarWall) {
  SceneSpec s = empty_scene(120.0);
  Building near_wall, far_wall;
  near_wall.footprint = make_rect({3.5, 0.0}, 0.5, 6.0);
  near_wall.height = 8.0;
  far_wall.footprint = make_rect({8.5, 0.0}, 0.5, 6.0);
  far_wall.height = 8.0;
  s.buildings.push_back(near_wall);
  s.buildings.push_back(far_wall);
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  int occupied = 0;
  for (int row = 0; row < 64; ++row)
    for (int col = 0; col < 64; ++col)
      if (r.at(0, row, col) > 0.0f) {
        ++occupied;
        const Vec2 w = r.pixel_to_world(row, col);
        // every mark belongs to the near wall; the far wall is shadowed
        ASSERT_LE(w.x, 4.3) << "far wall leaked at " << w.x << "," << w.y;
        ASSERT_GE(w.x, 2.7);
      }
  EXPECT_GT(occupied, 10);
}

TEST(RenderGridmap, HitPointsMatchRaySegmentOracle) {
  // single wall with its facing side at x = 3: for a ray at angle theta the
  // expected range is 3 / cos(theta)
  SceneSpec s = empty_scene(120.0);
  Building wall;
  wall.footprint = make_rect({3.5, 0.0}, 0.5, 6.0);
  wall.height = 8.0;
  s.buildings.push_back(wall);
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  const double max_angle = std::atan2(6.0, 3.0);
  for (double theta = -max_angle + 0.05; theta < max_angle - 0.05;
       theta += 0.1) {
    const double t = 3.0 / std::cos(theta);
    const Vec2 hit{t * std::cos(theta), t * std::sin(theta)};
    int row, col;
    r.local_to_cell(se2_untransform_point(r.anchor, hit), &row, &col);
    ASSERT_TRUE(r.in_bounds(row, col));
    EXPECT_GT(r.at(0, row, col), 0.0f)
        << "expected hit at theta=" << theta << " cell " << row << "," << col;
  }
}

TEST(RenderGridmap, InvariantToDynamicObstaclesAndShadows) {
  SceneParams params;
  const SceneSpec full = generate_scene(21, params);
  SceneSpec stripped = full;
  stripped.dynamic_obstacles.clear();
  stripped.shadow_polygons.clear();
  const Pose2D pose = make_pose(3.0, 1.0, 0.4);
  const Raster a = render_gridmap(full, pose, 64, 0.5);
  const Raster b = render_gridmap(stripped, pose, 64, 0.5);
  ASSERT_EQ(0, std::memcmp(a.data.data(), b.data.data(),
                           sizeof(float) * a.data.size()));
}

TEST(RenderGridmap, OcclusionBlocksEverythingBehindFirstHit) {
  // a closed box around the vehicle: nothing outside the box may be marked
  SceneSpec s = empty_scene(120.0);
  Building box;
  box.footprint = make_rect({0.0, 0.0}, 4.0, 4.0);
  box.height = 10.0;
  s.buildings.push_back(box);
  Building outside;
  outside.footprint = make_rect({10.0, 0.0}, 1.0, 8.0);
  outside.height = 10.0;
  s.buildings.push_back(outside);
  const Raster r = render_gridmap(s, Pose2D::identity(), 64, 0.5);
  for (int row = 0; row < 64; ++row)
    for (int col = 0; col < 64; ++col)
      if (r.at(0, row, col) > 0.0f) {
        const Vec2 w = r.pixel_to_world(row, col);
        ASSERT_LE(std::max(std::abs(w.x), std::abs(w.y)), 4.4);
      }
}

// ============================================================================
// distance map
// ============================================================================

TEST(DistanceMap, CenterZeroCornerOne) {
  const Raster d = make_distance_map(33, 0.5);
  EXPECT_FLOAT_EQ(d.at(0, 16, 16), 0.0f);
  EXPECT_FLOAT_EQ(d.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(d.at(0, 32, 32), 1.0f);
  EXPECT_FLOAT_EQ(d.at(0, 0, 32), 1.0f);
}

TEST(DistanceMap, RightEdgeMidRowHandGeometry) {
  const int n = 33;
  const double res = 0.5;
  const Raster d = make_distance_map(n, res);
  // center row, right edge: offset is (n/2) pixels along one axis
  const double edge = (n / 2) * res;
  const double corner = std::sqrt(2.0) * edge;
  EXPECT_NEAR(d.at(0, 16, 32), edge / corner, 1e-6);
}

TEST(DistanceMap, EvenSizeStillNormalized) {
  const Raster d = make_distance_map(64, 0.2);
  float mx = 0.0f, mn = 1.0f;
  for (float v : d.data) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  EXPECT_FLOAT_EQ(mx, 1.0f);
  EXPECT_GT(mn, 0.0f);  // no pixel sits exactly on the center of an even grid
  EXPECT_LT(mn, 0.03f);
}

TEST(DistanceMap, ValuesMatchDefinition) {
  const int n = 16;
  const double res = 0.25;
  const Raster d = make_distance_map(n, res);
  const double corner_dist =
      std::hypot((n * 0.5 - 0.5) * res, (n * 0.5 - 0.5) * res);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double dx = (n * 0.5 - r - 0.5) * res;
      const double dy = (n * 0.5 - c - 0.5) * res;
      ASSERT_NEAR(d.at(0, r, c), std::hypot(dx, dy) / corner_dist, 1e-6);
    }
}
