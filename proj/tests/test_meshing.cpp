#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "vpf/data.hpp"
#include "vpf/mesh.hpp"

namespace vpf {
namespace {

OccupancyGrid logistic_sphere(int R, double r) {
  OccupancyGrid g;
  g.grid.d = R;
  g.grid.side = 1.0;
  const auto c = g.grid.cell_centers();
  g.values.resize(c.size());
  for (size_t i = 0; i < c.size(); ++i) g.values[i] = 1.0 / (1.0 + std::exp((norm(c[i]) - r) / 0.02));
  return g;
}

OccupancyGrid cube_corners(int mask) {
  OccupancyGrid g;
  g.grid.d = 2;
  g.values.resize(8);
  for (int k = 0; k < 8; ++k) {
    const int i = k & 1, j = k >> 1 & 1, l = k >> 2 & 1;
    g.values[static_cast<size_t>((i * 2 + j) * 2 + l)] = (mask >> k & 1) ? 0.9 : 0.1;
  }
  return g;
}

TEST(MarchingCubes, UniformGridIsEmpty) {
  OccupancyGrid g;
  g.grid.d = 5;
  g.values.assign(125, 0.2);
  EXPECT_TRUE(marching_cubes(g, 0.5).empty());
  g.values.assign(125, 0.7);
  EXPECT_TRUE(marching_cubes(g, 0.5).empty());
}

TEST(MarchingCubes, SingleCornerGivesOneTriangleFacingOut) {
  for (int k = 0; k < 8; ++k) {
    const TriMesh m = marching_cubes(cube_corners(1 << k), 0.5);
    ASSERT_EQ(m.faces.size(), 1u) << "corner " << k;
    const auto cc = OccupancyGrid{}.grid.cell_center(k & 1, k >> 1 & 1, k >> 2 & 1);
    Vec3 centroid = (1.0 / 3) * (m.vertices[0] + m.vertices[1] + m.vertices[2]);
    EXPECT_LT(dot(m.face_normal(0), cc - centroid), 0.0) << "normal should point away from the inside corner";
  }
}

TEST(MarchingCubes, EveryCaseClosesWithPadding) {
  MarchingCubesOptions opt;
  opt.close_boundary = true;
  for (int mask = 1; mask < 255; ++mask) {
    const TriMesh m = marching_cubes(cube_corners(mask), 0.5, opt);
    ASSERT_FALSE(m.empty());
    EXPECT_TRUE(is_closed_manifold(m)) << "case " << mask;
    EXPECT_GT(m.volume(), 0.0) << "case " << mask;
    for (size_t f = 0; f < m.faces.size(); ++f) EXPECT_GT(m.face_area(f), 0.0);
  }
}

TEST(MarchingCubes, VerticesInterpolateToLevel) {
  const int R = 9;
  OccupancyGrid g;
  g.grid.d = R;
  g.grid.side = 2.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  g.values.resize(static_cast<size_t>(R * R * R));
  for (auto& v : g.values) v = u(rng);
  const double level = 0.43;
  const TriMesh m = marching_cubes(g, level);
  ASSERT_FALSE(m.empty());
  const double h = g.grid.side / R;
  const Vec3 origin = g.grid.cell_center(0, 0, 0);
  auto value = [&](int i, int j, int k) { return g.values[static_cast<size_t>((i * R + j) * R + k)]; };
  for (const Vec3& p : m.vertices) {
    const Vec3 q = (1.0 / h) * (p - origin);
    int axis = -1;
    int idx[3];
    for (int a = 0; a < 3; ++a) {
      const double r = std::round(q[a]);
      if (std::abs(q[a] - r) < 1e-9) {
        idx[a] = static_cast<int>(r);
      } else {
        ASSERT_EQ(axis, -1) << "vertex off the lattice edges";
        axis = a;
        idx[a] = static_cast<int>(std::floor(q[a]));
      }
    }
    ASSERT_NE(axis, -1);
    const double t = q[axis] - idx[axis];
    const double v0 = value(idx[0], idx[1], idx[2]);
    idx[axis] += 1;
    const double v1 = value(idx[0], idx[1], idx[2]);
    EXPECT_NEAR(v0 + t * (v1 - v0), level, 1e-6);
  }
}

TEST(MarchingCubes, SphereAreaConvergesAndCloses) {
  const double r = 0.35, exact = 4 * std::numbers::pi * r * r;
  double prev = 1e9;
  for (int R : {32, 64, 128}) {
    const TriMesh m = marching_cubes(logistic_sphere(R, r), 0.5);
    EXPECT_TRUE(is_closed_manifold(m));
    const double err = std::abs(m.area() - exact) / exact;
    EXPECT_LT(err, prev) << "R=" << R;
    prev = err;
    if (R == 128) EXPECT_LT(err, 0.02);
  }
}

TEST(MarchingCubes, SphereInsideAgreesWithAnalyticSign) {
  const int R = 64;
  const double r = 0.35, band = 1.0 / R;
  const TriMesh m = marching_cubes(logistic_sphere(R, r), 0.5);
  InsideTester t(m);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  int agree = 0, total = 0;
  while (total < 20000) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    if (std::abs(norm(p) - r) < band) continue;
    ++total;
    agree += t.inside(p) == (norm(p) < r);
  }
  EXPECT_GE(static_cast<double>(agree) / total, 0.999);
}

TEST(MarchingCubes, OutputIsDeterministic) {
  const auto g = logistic_sphere(24, 0.3);
  const TriMesh a = marching_cubes(g, 0.5), b = marching_cubes(g, 0.5);
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  ASSERT_EQ(a.faces, b.faces);
  for (size_t i = 0; i < a.vertices.size(); ++i) EXPECT_EQ(a.vertices[i].x, b.vertices[i].x);
}

TEST(MarchingCubes, CaseTableComplementReversesLoops) {
  for (int c = 1; c < 255; ++c) {
    size_t edges = 0, edges_c = 0;
    for (const auto& l : mc_case_loops(c)) edges += l.size();
    for (const auto& l : mc_case_loops(255 - c)) edges_c += l.size();
    EXPECT_EQ(edges, edges_c) << c;
  }
  EXPECT_TRUE(mc_case_loops(0).empty());
  EXPECT_TRUE(mc_case_loops(255).empty());
}

TEST(PointInMesh, BoxTrivia) {
  const TriMesh box = data::make_box(0.5, 0.5, 0.5);
  EXPECT_TRUE(point_in_mesh(box, {0, 0, 0}));
  EXPECT_FALSE(point_in_mesh(box, {10, 0, 0}));
  EXPECT_FALSE(point_in_mesh(box, {0, 0, -10}));
}

TEST(PointInMesh, MatchesConvexHalfSpaceOracle) {
  const TriMesh s = data::make_icosphere(3);
  InsideTester t(s, 5);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  int checked = 0;
  while (checked < 10000) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    double max_plane = -1e9;
    for (size_t f = 0; f < s.faces.size(); ++f) {
      max_plane = std::max(max_plane, dot(s.face_normal(f), p - s.vertices[static_cast<size_t>(s.faces[f][0])]));
    }
    if (std::abs(max_plane) < 1e-4) continue;
    ++checked;
    ASSERT_EQ(t.inside(p), max_plane < 0) << p.x << " " << p.y << " " << p.z;
  }
}

TEST(PointInMesh, SurfacePointsCountAsInside) {
  const TriMesh box = data::make_box(0.5, 0.5, 0.5);
  const InsideTester t(box);
  EXPECT_TRUE(t.inside({0.5, 0.1, -0.2}));
  EXPECT_TRUE(t.inside({0.1, -0.5, 0.3}));
  EXPECT_TRUE(t.inside({0.5, 0.5, 0.5}));         // corner
  EXPECT_TRUE(t.inside({0.5, 0.2, 0.5}));         // edge
  EXPECT_TRUE(t.inside({0.5 + 1e-12, 0.1, 0.1}));  // within rounding of a face
  EXPECT_FALSE(t.inside({0.5 + 1e-6, 0.1, 0.1}));
  EXPECT_TRUE(t.inside({0.5 - 1e-6, 0.1, 0.1}));
  // Rotated sphere-like mesh: every vertex is on the surface.
  const TriMesh s = data::make_icosphere(2);
  const InsideTester ts(s);
  for (size_t i = 0; i < s.vertices.size(); i += 7) EXPECT_TRUE(ts.inside(s.vertices[i]));
}

TEST(PointInMesh, OpenMeshIsRejected) {
  TriMesh box = data::make_box(0.5, 0.5, 0.5);
  box.faces.pop_back();
  box.faces.pop_back();
  EXPECT_FALSE(is_closed_manifold(box));
  InsideTester t(box, 3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  bool threw = false;
  for (int i = 0; i < 200 && !threw; ++i) {
    try {
      t.inside({u(rng), u(rng), u(rng)});
    } catch (const NonWatertight&) {
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

TEST(TriMeshIo, ObjRoundTripIsExact) {
  const TriMesh m = marching_cubes(logistic_sphere(16, 0.3), 0.5);
  const auto path = (std::filesystem::temp_directory_path() / "vpf_roundtrip.obj").string();
  write_obj(path, m);
  const TriMesh r = read_obj(path);
  ASSERT_EQ(r.vertices.size(), m.vertices.size());
  ASSERT_EQ(r.faces, m.faces);
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    EXPECT_EQ(r.vertices[i].x, m.vertices[i].x);
    EXPECT_EQ(r.vertices[i].y, m.vertices[i].y);
    EXPECT_EQ(r.vertices[i].z, m.vertices[i].z);
  }
  std::filesystem::remove(path);
}

TEST(TriMesh, ValidateRejectsBadIndex) {
  TriMesh m = data::make_box(1, 1, 1);
  m.faces.push_back({0, 1, 99});
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace vpf
