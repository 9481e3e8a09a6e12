#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "locgan/errors.hpp"
#include "locgan/pose.hpp"
#include "locgan/raster.hpp"
#include "locgan/rng.hpp"

namespace locgan {

// ---------------------------------------------------------------------------
// Scene geometry
// ---------------------------------------------------------------------------

struct ConvexPolygon {
  std::vector<Vec2> pts;  // counter-clockwise

  bool contains(Vec2 p) const {
    const size_t n = pts.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec2 a = pts[i];
      const Vec2 b = pts[(i + 1) % n];
      if (cross(b - a, p - a) < 0.0) return false;
    }
    return true;
  }

  void aabb(Vec2* lo, Vec2* hi) const {
    lo->x = lo->y = std::numeric_limits<double>::infinity();
    hi->x = hi->y = -std::numeric_limits<double>::infinity();
    for (const Vec2& p : pts) {
      lo->x = std::min(lo->x, p.x);
      lo->y = std::min(lo->y, p.y);
      hi->x = std::max(hi->x, p.x);
      hi->y = std::max(hi->y, p.y);
    }
  }
};

/// Axis aligned rectangle helper (returns CCW corners).
inline ConvexPolygon make_rect(Vec2 center, double half_x, double half_y,
                               double angle = 0.0) {
  const double c = std::cos(angle), s = std::sin(angle);
  auto corner = [&](double dx, double dy) {
    return Vec2{center.x + c * dx - s * dy, center.y + s * dx + c * dy};
  };
  ConvexPolygon poly;
  poly.pts = {corner(-half_x, -half_y), corner(half_x, -half_y),
              corner(half_x, half_y), corner(-half_x, half_y)};
  return poly;
}

struct Building {
  ConvexPolygon footprint;
  double height = 0.0;       // meters
  float roof_intensity = 0.7f;
};

struct Tree {
  Vec2 center;
  double canopy_radius = 2.0;
  double height = 5.0;
  float intensity = 0.35f;
};

struct DynamicObstacle {
  ConvexPolygon footprint;   // vehicle / tram sized rectangle
  double height = 1.8;       // below the grid-map height cut
  float intensity = 0.25f;
};

struct ShadowPolygon {
  ConvexPolygon poly;
  float darkening = 0.5f;  // multiplicative factor applied to the aerial image
};

struct Road {
  Vec2 a, b;
  double half_width = 3.5;
};

/// Fully deterministic description of one synthetic world.
struct SceneSpec {
  uint64_t seed = 0;
  double extent_x = 0.0;  // scene spans [-extent/2, extent/2]
  double extent_y = 0.0;
  double texture_amplitude = 0.0;  // procedural ground texture; 0 = flat
  std::vector<Road> roads;
  std::vector<Building> buildings;
  std::vector<Tree> trees;
  std::vector<DynamicObstacle> dynamic_obstacles;
  std::vector<ShadowPolygon> shadow_polygons;

  bool point_inside(Vec2 p) const {
    return std::abs(p.x) <= extent_x * 0.5 && std::abs(p.y) <= extent_y * 0.5;
  }
};

struct SceneParams {
  double extent = 160.0;
  double building_density = 12.0;  // expected counts per scene
  double tree_density = 16.0;
  double dynamic_density = 5.0;
  bool shadows = true;
  /// When positive, buildings are placed on a regular grid with this spacing
  /// along the road, producing repeating structure in the travel direction.
  double periodic_spacing = 0.0;
  /// Footprint (meters) within which at least one tall obstacle is
  /// guaranteed around every point of the trajectory.
  double guarantee_footprint = 26.0;
};

// ---------------------------------------------------------------------------
// generate_scene
// ---------------------------------------------------------------------------

inline SceneSpec generate_scene(uint64_t seed, const SceneParams& params) {
  if (params.extent < params.guarantee_footprint)
    throw ContractError("generate_scene: extent smaller than patch footprint");
  SceneSpec scene;
  scene.seed = seed;
  scene.extent_x = params.extent;
  scene.extent_y = params.extent;
  scene.texture_amplitude = 1.0;
  Rng rng(hash_combine(seed, 0xace1u));

  const double half = params.extent * 0.5;
  const double road_len = params.extent - 20.0;
  scene.roads.push_back(Road{{-road_len * 0.5, 0.0}, {road_len * 0.5, 0.0}, 3.5});

  auto overlaps_existing = [&scene](const ConvexPolygon& poly, double margin = 1.0) {
    Vec2 lo, hi;
    poly.aabb(&lo, &hi);
    for (const Building& b : scene.buildings) {
      Vec2 blo, bhi;
      b.footprint.aabb(&blo, &bhi);
      if (lo.x - margin < bhi.x && hi.x + margin > blo.x &&
          lo.y - margin < bhi.y && hi.y + margin > blo.y)
        return true;
    }
    return false;
  };

  auto add_building = [&](Vec2 center, double hx, double hy, double angle,
                          bool allow_reject) -> bool {
    ConvexPolygon fp = make_rect(center, hx, hy, angle);
    Vec2 lo, hi;
    fp.aabb(&lo, &hi);
    if (std::abs(lo.x) > half || std::abs(hi.x) > half || std::abs(lo.y) > half ||
        std::abs(hi.y) > half)
      return false;
    if (allow_reject && overlaps_existing(fp, 1.0)) return false;
    Building b;
    b.footprint = fp;
    b.height = rng.uniform(5.0, 16.0);
    b.roof_intensity = static_cast<float>(rng.uniform(0.55, 0.9));
    scene.buildings.push_back(b);
    return true;
  };

  if (params.periodic_spacing > 0.0) {
    // identical blocks repeating along the road: ambiguous travel direction
    const double spacing = params.periodic_spacing;
    const double hx = std::min(4.0, spacing * 0.35);
    for (double x = -road_len * 0.5 + spacing; x < road_len * 0.5 - spacing;
         x += spacing) {
      for (double side : {-1.0, 1.0}) {
        ConvexPolygon fp = make_rect({x, side * 11.0}, hx, 5.0, 0.0);
        Building b;
        b.footprint = fp;
        b.height = 9.0;
        b.roof_intensity = 0.7f;
        scene.buildings.push_back(b);
      }
    }
  } else {
    const int n_buildings = rng.poisson(params.building_density);
    for (int i = 0; i < n_buildings; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 80 && !placed; ++attempt) {
        const double x = rng.uniform(-road_len * 0.5, road_len * 0.5);
        const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double setback = rng.uniform(7.0, 18.0);
        const double hx = rng.uniform(4.0, 9.0);
        const double hy = rng.uniform(3.0, 7.0);
        const double angle = rng.uniform(-0.18, 0.18);
        placed = add_building({x, side * (3.5 + setback + hy)}, hx, hy, angle,
                              true);
      }
      if (!placed)
        throw GenerationError(
            "generate_scene: could not place requested building density");
    }
  }

  const int n_trees = rng.poisson(params.tree_density);
  for (int i = 0; i < n_trees; ++i) {
    Tree t;
    for (int attempt = 0; attempt < 40; ++attempt) {
      t.center = {rng.uniform(-road_len * 0.5, road_len * 0.5),
                  (rng.bernoulli(0.5) ? 1.0 : -1.0) *
                      rng.uniform(5.0, std::min(26.0, half - 6.0))};
      bool inside_building = false;
      for (const Building& b : scene.buildings)
        if (b.footprint.contains(t.center)) inside_building = true;
      if (!inside_building) break;
    }
    t.canopy_radius = rng.uniform(1.4, 3.4);
    t.height = rng.uniform(4.0, 9.0);
    t.intensity = static_cast<float>(rng.uniform(0.28, 0.42));
    scene.trees.push_back(t);
  }

  const int n_dynamic = rng.poisson(params.dynamic_density);
  for (int i = 0; i < n_dynamic; ++i) {
    DynamicObstacle d;
    const double x = rng.uniform(-road_len * 0.5, road_len * 0.5);
    const double lane = rng.bernoulli(0.5) ? 1.6 : -1.6;
    const bool tram = rng.bernoulli(0.15);
    d.footprint = make_rect({x, lane}, tram ? 7.0 : 2.2, tram ? 1.3 : 0.95,
                            rng.uniform(-0.06, 0.06));
    d.height = rng.uniform(1.4, 2.4);
    d.intensity = static_cast<float>(rng.bernoulli(0.5) ? rng.uniform(0.08, 0.2)
                                                        : rng.uniform(0.75, 0.92));
    scene.dynamic_obstacles.push_back(d);
  }

  if (params.shadows) {
    // each building casts a quadrilateral to a fixed sun direction
    const Vec2 sun_dir = {0.35, 0.55};
    for (const Building& b : scene.buildings) {
      ShadowPolygon sp;
      sp.poly.pts.reserve(b.footprint.pts.size());
      const double len = 0.45 * b.height;
      for (const Vec2& p : b.footprint.pts)
        sp.poly.pts.push_back({p.x + sun_dir.x * len, p.y + sun_dir.y * len});
      sp.darkening = static_cast<float>(rng.uniform(0.45, 0.6));
      scene.shadow_polygons.push_back(sp);
    }
  }

  // Guarantee at least one tall obstacle near every trajectory point so a
  // grid map rendered anywhere along the road is never empty.
  if (params.building_density > 0.0 || params.tree_density > 0.0 ||
      params.periodic_spacing > 0.0) {
    const double reach = params.guarantee_footprint * 0.5;
    for (double x = -road_len * 0.5; x <= road_len * 0.5; x += 3.0) {
      bool covered = false;
      for (const Building& b : scene.buildings) {
        Vec2 lo, hi;
        b.footprint.aabb(&lo, &hi);
        if (x + reach > lo.x && x - reach < hi.x &&
            std::min(std::abs(lo.y), std::abs(hi.y)) < reach)
          covered = true;
      }
      for (const Tree& t : scene.trees)
        if (std::abs(t.center.x - x) < reach && std::abs(t.center.y) < reach)
          covered = true;
      if (!covered) {
        Tree t;
        t.center = {x, (hash01(seed, static_cast<int64_t>(x * 16.0), 7) < 0.5
                            ? -1.0
                            : 1.0) *
                           rng.uniform(6.0, reach - 2.0)};
        t.canopy_radius = rng.uniform(1.6, 3.0);
        t.height = rng.uniform(4.5, 8.0);
        t.intensity = static_cast<float>(rng.uniform(0.28, 0.42));
        scene.trees.push_back(t);
      }
    }
  }

  return scene;
}

// ---------------------------------------------------------------------------
// Aerial rendering
// ---------------------------------------------------------------------------

namespace detail {

/// Smooth deterministic value noise keyed on world position.
inline double world_noise(uint64_t seed, Vec2 p, double cell) {
  const double fx = p.x / cell, fy = p.y / cell;
  const int64_t ix = static_cast<int64_t>(std::floor(fx));
  const int64_t iy = static_cast<int64_t>(std::floor(fy));
  const double tx = fx - static_cast<double>(ix);
  const double ty = fy - static_cast<double>(iy);
  const double v00 = hash01(seed, ix, iy);
  const double v10 = hash01(seed, ix + 1, iy);
  const double v01 = hash01(seed, ix, iy + 1);
  const double v11 = hash01(seed, ix + 1, iy + 1);
  const double a = v00 + (v10 - v00) * tx;
  const double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;  // in [0,1)
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / std::max(1e-12, dot(ab, ab)), 0.0, 1.0);
  const Vec2 proj = a + t * ab;
  return norm(p - proj);
}

inline void check_footprint(const SceneSpec& scene, const Pose2D& pose,
                            int size_px, double resolution) {
  const double half_diag = 0.5 * size_px * resolution * std::sqrt(2.0);
  const Vec2 corners[4] = {{half_diag, 0}, {-half_diag, 0}, {0, half_diag},
                           {0, -half_diag}};
  (void)corners;
  if (std::abs(pose.x) + half_diag > scene.extent_x * 0.5 ||
      std::abs(pose.y) + half_diag > scene.extent_y * 0.5)
    throw RangeError("raster footprint falls outside the scene extent");
}

}  // namespace detail

/// Top-down grayscale rendering of the scene around `pose`: ground, roads,
/// shadows, trees, roofs and dynamic obstacles, with mild procedural texture.
inline Raster render_aerial(const SceneSpec& scene, const Pose2D& pose,
                            int size_px, double resolution) {
  detail::check_footprint(scene, pose, size_px, resolution);
  Raster raster(1, size_px, size_px, resolution, pose);

  struct CachedPoly {
    const ConvexPolygon* poly;
    Vec2 lo, hi;
    float value;
  };
  std::vector<CachedPoly> shadows, roofs, dynamics;
  for (const ShadowPolygon& s : scene.shadow_polygons) {
    CachedPoly c{&s.poly, {}, {}, s.darkening};
    s.poly.aabb(&c.lo, &c.hi);
    shadows.push_back(c);
  }
  for (const Building& b : scene.buildings) {
    CachedPoly c{&b.footprint, {}, {}, b.roof_intensity};
    b.footprint.aabb(&c.lo, &c.hi);
    roofs.push_back(c);
  }
  for (const DynamicObstacle& d : scene.dynamic_obstacles) {
    CachedPoly c{&d.footprint, {}, {}, d.intensity};
    d.footprint.aabb(&c.lo, &c.hi);
    dynamics.push_back(c);
  }

  const double amp = scene.texture_amplitude;
  for (int r = 0; r < size_px; ++r) {
    for (int col = 0; col < size_px; ++col) {
      const Vec2 w = raster.pixel_to_world(r, col);
      double v = 0.52 +
                 amp * 0.10 * (detail::world_noise(scene.seed, w, 2.3) - 0.5) +
                 amp * 0.05 * (detail::world_noise(scene.seed ^ 0x9e37ULL, w, 0.7) - 0.5);
      for (const Road& road : scene.roads)
        if (detail::point_segment_distance(w, road.a, road.b) <= road.half_width)
          v = 0.34 + amp * 0.05 * (detail::world_noise(scene.seed ^ 0x51ULL, w, 1.1) - 0.5);
      for (const CachedPoly& s : shadows)
        if (w.x >= s.lo.x && w.x <= s.hi.x && w.y >= s.lo.y && w.y <= s.hi.y &&
            s.poly->contains(w))
          v *= s.value;
      for (const CachedPoly& d : dynamics)
        if (w.x >= d.lo.x && w.x <= d.hi.x && w.y >= d.lo.y && w.y <= d.hi.y &&
            d.poly->contains(w))
          v = d.value + amp * 0.04 * (detail::world_noise(scene.seed ^ 0xd1ULL, w, 0.8) - 0.5);
      for (const Tree& t : scene.trees) {
        const double dist = norm(w - t.center);
        if (dist <= t.canopy_radius) {
          const double fade = 1.0 - 0.4 * (dist / t.canopy_radius);
          v = t.intensity * fade +
              amp * 0.06 * (detail::world_noise(scene.seed ^ 0x7eeULL, w, 0.9) - 0.5);
        }
      }
      for (const CachedPoly& b : roofs)
        if (w.x >= b.lo.x && w.x <= b.hi.x && w.y >= b.lo.y && w.y <= b.hi.y &&
            b.poly->contains(w))
          v = b.value + amp * 0.05 * (detail::world_noise(scene.seed ^ 0x3bULL, w, 1.7) - 0.5);
      raster.at(0, r, col) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return raster;
}

// ---------------------------------------------------------------------------
// Grid-map rendering (2D ray casting with occlusion)
// ---------------------------------------------------------------------------

namespace detail {

/// First hit of ray origin+t*dir against segment [a,b]; returns t or nullopt.
inline std::optional<double> ray_segment(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 seg = b - a;
  const double denom = cross(dir, seg);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const Vec2 diff = a - origin;
  const double t = cross(diff, seg) / denom;
  const double u = cross(diff, dir) / denom;
  if (t > 1e-9 && u >= 0.0 && u <= 1.0) return t;
  return std::nullopt;
}

/// First hit of ray origin+t*dir against a circle.
inline std::optional<double> ray_circle(Vec2 origin, Vec2 dir, Vec2 center,
                                        double radius) {
  const Vec2 oc = origin - center;
  const double b = dot(oc, dir);
  const double c = dot(oc, oc) - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t1 = -b - sq;
  if (t1 > 1e-9) return t1;
  const double t2 = -b + sq;
  if (t2 > 1e-9) return t2;  // origin inside the circle
  return std::nullopt;
}

}  // namespace detail

/// Occupancy raster of the nearest visible outlines of tall (>= min_height)
/// obstacles, ray-cast from the vehicle position. Dynamic obstacles and
/// shadows never appear; an obstacle occludes everything behind it.
inline Raster render_gridmap(const SceneSpec& scene, const Pose2D& vehicle_pose,
                             int size_px, double resolution,
                             double min_height = 3.0,
                             double angular_step_deg = 0.25) {
  detail::check_footprint(scene, vehicle_pose, size_px, resolution);
  Raster raster(1, size_px, size_px, resolution, vehicle_pose);

  struct Segment {
    Vec2 a, b;
  };
  std::vector<Segment> segments;
  for (const Building& b : scene.buildings) {
    if (b.height < min_height) continue;
    const size_t n = b.footprint.pts.size();
    for (size_t i = 0; i < n; ++i)
      segments.push_back({b.footprint.pts[i], b.footprint.pts[(i + 1) % n]});
  }
  struct Circle {
    Vec2 center;
    double radius;
  };
  std::vector<Circle> circles;
  for (const Tree& t : scene.trees)
    if (t.height >= min_height) circles.push_back({t.center, t.canopy_radius});

  const Vec2 origin{vehicle_pose.x, vehicle_pose.y};
  const double max_range =
      0.5 * size_px * resolution * std::sqrt(2.0) + resolution;
  const int n_rays = static_cast<int>(std::lround(360.0 / angular_step_deg));
  for (int k = 0; k < n_rays; ++k) {
    const double theta = (static_cast<double>(k) * angular_step_deg) * M_PI / 180.0;
    const Vec2 dir{std::cos(theta), std::sin(theta)};
    double best = max_range;
    bool hit = false;
    for (const Segment& s : segments) {
      const auto t = detail::ray_segment(origin, dir, s.a, s.b);
      if (t && *t < best) {
        best = *t;
        hit = true;
      }
    }
    for (const Circle& c : circles) {
      const auto t = detail::ray_circle(origin, dir, c.center, c.radius);
      if (t && *t < best) {
        best = *t;
        hit = true;
      }
    }
    if (!hit) continue;
    const Vec2 world{origin.x + dir.x * best, origin.y + dir.y * best};
    const Vec2 local = se2_untransform_point(vehicle_pose, world);
    int row, col;
    raster.local_to_cell(local, &row, &col);
    if (raster.in_bounds(row, col)) raster.at(0, row, col) = 1.0f;
  }
  return raster;
}

/// Single-channel map of each pixel's metric distance to the raster center,
/// normalized to [0,1] by the corner distance.
inline Raster make_distance_map(int size_px, double resolution) {
  if (size_px <= 0) throw DimensionError("make_distance_map: size must be positive");
  Raster raster(1, size_px, size_px, resolution);
  const Vec2 corner = raster.pixel_to_local(0, 0);
  const double max_dist = norm(corner);
  for (int r = 0; r < size_px; ++r)
    for (int c = 0; c < size_px; ++c) {
      const Vec2 local = raster.pixel_to_local(r, c);
      raster.at(0, r, c) =
          max_dist > 0.0 ? static_cast<float>(norm(local) / max_dist) : 0.0f;
    }
  return raster;
}

}  // namespace locgan
