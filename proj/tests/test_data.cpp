#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "vpf/data.hpp"

namespace fs = std::filesystem;

namespace vpf::data {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vpf_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Shapes, UnitBoxHasTwelveTrianglesAndUnitVolume) {
  const TriMesh b = make_box(0.5, 0.5, 0.5);
  EXPECT_EQ(b.faces.size(), 12u);
  EXPECT_NEAR(b.volume(), 1.0, 1e-9);
  EXPECT_TRUE(is_closed_manifold(b));
}

TEST(Shapes, EllipsoidVolumeMatchesAnalytic) {
  const TriMesh e = make_ellipsoid(0.4, 0.3, 0.2, 3);
  const double exact = 4.0 / 3.0 * std::numbers::pi * 0.4 * 0.3 * 0.2;
  EXPECT_NEAR(e.volume(), exact, 0.02 * exact);
}

TEST(Shapes, CylinderAndCapsuleVolumes) {
  const double r = 0.3, h = 0.4;
  const double cyl = std::numbers::pi * r * r * 2 * h;
  EXPECT_NEAR(make_cylinder(r, h, 128).volume(), cyl, 0.01 * cyl);
  const double cap = cyl + 4.0 / 3.0 * std::numbers::pi * r * r * r;
  EXPECT_NEAR(make_capsule(r, h, 128, 32).volume(), cap, 0.01 * cap);
}

TEST(Shapes, EveryFamilyIsWatertightNormalizedAndDeterministic) {
  for (Family f : {Family::box, Family::ellipsoid, Family::cylinder, Family::capsule, Family::union2}) {
    for (uint64_t seed : {1u, 2u, 3u}) {
      const ShapeSpec spec = random_spec(f, seed);
      const TriMesh m = generate_shape(spec);
      SCOPED_TRACE(family_name(f) + " seed " + std::to_string(seed));
      EXPECT_TRUE(watertight_self_check(m, seed));
      EXPECT_GT(m.volume(), 0.0);
      Vec3 lo, hi;
      m.bounds(lo, hi);
      EXPECT_NEAR(std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}), 1.0, 1e-9);
      for (int a = 0; a < 3; ++a) EXPECT_NEAR(lo[a] + hi[a], 0.0, 1e-9);
      const TriMesh again = generate_shape(spec);
      EXPECT_EQ(again.faces, m.faces);
      ASSERT_EQ(again.vertices.size(), m.vertices.size());
      for (size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(again.vertices[i].z, m.vertices[i].z);
    }
  }
}

TEST(Shapes, DisjointUnionIsReseeded) {
  ShapeSpec s = random_spec(Family::union2, 4);
  s.parts[0].translation = {-3, 0, 0};
  s.parts[1].translation = {3, 0, 0};
  const TriMesh m = generate_shape(s);
  EXPECT_TRUE(watertight_self_check(m));
  Vec3 lo, hi;
  m.bounds(lo, hi);
  EXPECT_NEAR(std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}), 1.0, 1e-9);
}

TEST(Shapes, FamilyNamesRoundTrip) {
  for (Family f : {Family::box, Family::ellipsoid, Family::cylinder, Family::capsule, Family::union2}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  EXPECT_THROW(parse_family("torus"), std::invalid_argument);
}

Camera front_camera(int size, double distance) {
  return look_at({0, -distance, 0}, {0, 0, 0}, {0, 0, 1}, size, size, 0.6 * size, 0.6 * size);
}

TEST(Render, EmptyMeshIsBackground) {
  const Image img = render(TriMesh{}, front_camera(16, 1.2));
  for (float v : img.rgb) EXPECT_EQ(v, 1.0f);
}

TEST(Render, FacingTriangleCoversPrincipalPoint) {
  TriMesh t;
  t.vertices = {{-0.3, 0, -0.3}, {0.3, 0, -0.3}, {0, 0, 0.4}};
  t.faces = {{0, 1, 2}};
  const Camera cam = front_camera(31, 1.2);
  Light light;
  light.azimuth_deg = -90;
  light.elevation_deg = 0;
  const Image img = render(t, cam, light);
  const int cx = static_cast<int>(cam.cx), cy = static_cast<int>(cam.cy);
  EXPECT_NE(img.at(cy, cx, 0), light.background);
  EXPECT_EQ(img.at(0, 0, 0), light.background);
}

TEST(Render, NearerSurfaceWins) {
  TriMesh t;
  t.vertices = {{-1, 0.2, -1}, {1, 0.2, -1}, {0, 0.2, 1}, {-1, -0.2, -1}, {1, -0.2, -1}, {0, -0.2, 1}};
  t.faces = {{0, 1, 2}, {3, 4, 5}};
  // Tilt the nearer triangle so the two shade differently.
  t.vertices[5] = {0, -0.6, 1};
  const Camera cam = front_camera(21, 1.5);
  const Image both = render(t, cam);
  TriMesh near_only = t;
  near_only.faces = {{3, 4, 5}};
  const Image front = render(near_only, cam);
  EXPECT_EQ(both.at(10, 10, 0), front.at(10, 10, 0));
}

TEST(Render, SphereSilhouetteMatchesProjectedDisk) {
  const double r = 0.3, D = 1.2;
  const int size = 128;
  const TriMesh s = make_ellipsoid(r, r, r, 4);
  const Camera cam = front_camera(size, D);
  const Image img = render(s, cam);
  int covered = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) covered += img.at(y, x, 0) != 1.0f;
  const double radius_px = cam.fx * std::tan(std::asin(r / D));
  const double disk = std::numbers::pi * radius_px * radius_px;
  EXPECT_NEAR(covered, disk, 0.03 * disk);
}

TEST(Render, PpmRoundTripQuantizes) {
  Image img;
  img.height = 3;
  img.width = 4;
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  for (int i = 0; i < 36; ++i) img.rgb.push_back(u(rng));
  const auto path = scratch("img.ppm");
  write_ppm(path.string(), img);
  const Image back = read_ppm(path.string());
  ASSERT_EQ(back.height, 3);
  ASSERT_EQ(back.width, 4);
  for (size_t i = 0; i < img.rgb.size(); ++i) EXPECT_NEAR(back.rgb[i], img.rgb[i], 0.5f / 255.0f + 1e-6f);
  fs::remove(path);
}

TEST(Render, CamerasFollowViewSetup) {
  ViewSetup vs;
  const auto cams = random_cameras(vs, 9);
  ASSERT_EQ(cams.size(), 24u);
  for (const auto& c : cams) {
    const Vec3 e = c.center();
    EXPECT_NEAR(norm(e), 1.2, 1e-12);
    const double elev = std::asin(e.z / norm(e)) * 180 / std::numbers::pi;
    EXPECT_GE(elev, 15.0 - 1e-9);
    EXPECT_LE(elev, 60.0 + 1e-9);
    const Projection p = project(c, {0, 0, 0});
    EXPECT_NEAR(p.u, c.cx, 1e-9);
    EXPECT_NEAR(p.v, c.cy, 1e-9);
  }
}

DatasetOptions small_options(int objects) {
  DatasetOptions opt;
  opt.objects = objects;
  opt.seed = 5;
  opt.views.image_size = 24;
  return opt;
}

TEST(Dataset, SingleObjectFileCount) {
  const auto root = scratch("ds1");
  build_dataset(root.string(), small_options(1));
  const auto entries = read_manifest(root.string());
  ASSERT_EQ(entries.size(), 1u);
  const fs::path dir = root / entries[0].object_id;
  int ppm = 0, obj = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ppm += e.path().extension() == ".ppm";
    obj += e.path().extension() == ".obj";
  }
  EXPECT_EQ(ppm, 24);
  EXPECT_EQ(obj, 1);
  EXPECT_EQ(read_cameras((dir / "cameras.jsonl").string()).size(), 24u);
  EXPECT_TRUE(fs::exists(root / "manifest.jsonl"));
  fs::remove_all(root);
}

TEST(Dataset, RebuildIsByteIdentical) {
  const auto a = scratch("dsa"), b = scratch("dsb");
  auto opt = small_options(3);
  build_dataset(a.string(), opt);
  opt.workers = 3;
  build_dataset(b.string(), opt);
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  for (const auto& e : read_manifest(a.string())) {
    EXPECT_EQ(slurp(a / e.object_id / "cameras.jsonl"), slurp(b / e.object_id / "cameras.jsonl"));
    EXPECT_EQ(slurp(a / e.object_id / "mesh.obj"), slurp(b / e.object_id / "mesh.obj"));
    EXPECT_EQ(slurp(a / e.object_id / "view_07.ppm"), slurp(b / e.object_id / "view_07.ppm"));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, SplitsAreDisjointAndCover) {
  const auto root = scratch("dssplit");
  auto opt = small_options(20);
  opt.views.views = 1;
  opt.views.image_size = 8;
  const auto entries = build_dataset(root.string(), opt);
  std::map<std::string, int> count;
  std::set<std::string> ids;
  for (const auto& e : entries) {
    ++count[e.split];
    ids.insert(e.object_id);
  }
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(count["train"], 16);
  EXPECT_EQ(count["val"], 2);
  EXPECT_EQ(count["test"], 2);
  EXPECT_EQ(load_split(root.string(), "test").size(), 2u);
  for (const auto& e : entries) {
    const Object o = load_object(root.string(), e.object_id);
    EXPECT_TRUE(watertight_self_check(o.mesh));
  }
  fs::remove_all(root);
}

TEST(Dataset, StoredMeshLabelsSurviveObjRoundTrip) {
  const auto root = scratch("dslabels");
  auto opt = small_options(2);
  opt.views.views = 1;
  build_dataset(root.string(), opt);
  for (const auto& e : read_manifest(root.string())) {
    const TriMesh stored = load_object(root.string(), e.object_id).mesh;
    const TriMesh fresh = generate_shape(random_spec(e.seed));
    InsideTester a(stored), b(fresh);
    std::mt19937_64 rng(e.seed);
    std::uniform_real_distribution<double> u(-0.55, 0.55);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 p{u(rng), u(rng), u(rng)};
      ASSERT_EQ(a.inside(p), b.inside(p));
    }
  }
  fs::remove_all(root);
}

TEST(Dataset, RejectsBadOptions) {
  auto opt = small_options(0);
  EXPECT_THROW(build_dataset(scratch("bad").string(), opt), std::invalid_argument);
  opt.objects = 2;
  opt.train_fraction = 0.95;
  opt.val_fraction = 0.1;
  EXPECT_THROW(build_dataset(scratch("bad").string(), opt), std::invalid_argument);
}

}  // namespace
}  // namespace vpf::data
