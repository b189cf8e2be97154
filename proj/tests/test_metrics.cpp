#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vpf/data.hpp"
#include "vpf/metrics.hpp"

namespace vpf::metrics {
namespace {

TriMesh sphere(double r, int subdiv = 5) { return data::make_ellipsoid(r, r, r, subdiv); }

TriMesh moved(TriMesh m, Vec3 t) {
  m.translate(t);
  return m;
}

TEST(KdTree, MatchesBruteForceExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  // Duplicates exercise the lower-index tie rule.
  pts[500] = pts[20];
  const KdTree tree(pts);
  for (int q = 0; q < 100; ++q) {
    const Vec3 x = q == 0 ? pts[20] : Vec3{u(rng), u(rng), u(rng)};
    int best = 0;
    double bd = 1e300;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double d = dot(x - pts[i], x - pts[i]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    double d2 = 0;
    EXPECT_EQ(tree.nearest(x, &d2), best);
    EXPECT_EQ(d2, bd);
  }
}

TEST(KdTree, EmptyTreeThrows) { EXPECT_THROW(KdTree(std::vector<Vec3>{}).nearest({0, 0, 0}), std::logic_error); }

TEST(SurfaceSampling, IsAreaUniform) {
  // A 1 x 1 x 3 box: the four long faces carry 12/14 of the area.
  const TriMesh box = data::make_box(0.5, 0.5, 1.5);
  const auto s = sample_surface(box, 20000, 3);
  int on_caps = 0;
  for (const Vec3& p : s.points) on_caps += std::abs(std::abs(p.z) - 1.5) < 1e-12;
  EXPECT_NEAR(on_caps / 20000.0, 2.0 / 14.0, 0.01);
  for (size_t i = 0; i < s.points.size(); ++i) EXPECT_NEAR(norm(s.normals[i]), 1.0, 1e-12);
}

TEST(Iou, IdenticalDisjointAndHalfOverlap) {
  const TriMesh cube = data::make_box(0.5, 0.5, 0.5);
  EXPECT_GE(volumetric_iou(cube, cube, 100000, 1), 0.99);
  EXPECT_LE(volumetric_iou(cube, moved(cube, {3, 0, 0}), 100000, 1), 0.01);
  EXPECT_NEAR(volumetric_iou(cube, moved(cube, {0.5, 0, 0}), 100000, 1), 1.0 / 3.0, 0.02);
}

TEST(Iou, GeneratedMeshWithItself) {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const TriMesh m = data::generate_shape(data::random_spec(seed));
    EXPECT_GE(volumetric_iou(m, m, 100000, seed), 0.99);
  }
}

TEST(Iou, EmptyUnionThrows) { EXPECT_THROW(volumetric_iou(TriMesh{}, TriMesh{}, 100, 1), std::domain_error); }

TEST(Chamfer, IdenticalMeshesAreZero) {
  const TriMesh m = sphere(0.5, 3);
  EXPECT_LE(chamfer_l1(m, m, 20000, 4).value, 1e-12);
}

TEST(Chamfer, IndependentSamplesMatchPoissonSpacing) {
  // Mean nearest-neighbour distance between two independent uniform point
  // sets of density rho on a surface is 1 / (2 sqrt(rho)).
  const int n = 100000;
  const TriMesh m = sphere(0.5);
  const auto a = sample_surface(m, n, 1), b = sample_surface(m, n, 2);
  const KdTree ta(a.points), tb(b.points);
  double acc = 0;
  for (const Vec3& p : a.points) {
    double d2 = 0;
    tb.nearest(p, &d2);
    acc += std::sqrt(d2);
  }
  for (const Vec3& p : b.points) {
    double d2 = 0;
    ta.nearest(p, &d2);
    acc += std::sqrt(d2);
  }
  const double units = acc / (2.0 * n) / 0.1;
  const double expected = 1.0 / (2.0 * std::sqrt(n / m.area())) / 0.1;
  EXPECT_NEAR(units, expected, 0.1 * expected);
  EXPECT_LT(units, 0.03);
}

TEST(Chamfer, CubeShiftedAlongEveryAxis) {
  const TriMesh cube = data::make_box(0.5, 0.5, 0.5);
  const auto r = chamfer_l1(moved(cube, {0.05, 0.05, 0.05}), cube, 100000, 7);
  EXPECT_NEAR(r.value, 0.5, 0.025);
}

TEST(Chamfer, ConcentricSpheres) {
  const auto r = chamfer_l1(sphere(0.4), sphere(0.5), 30000, 7);
  EXPECT_NEAR(r.value, 1.0, 0.05);
}

TEST(Chamfer, SmallShiftFollowsFirstOrderOracle) {
  // For a small shift t of a convex surface the nearest-surface distance is
  // |t . n| to first order; the area-weighted mean over faces predicts it.
  for (uint64_t seed : {11u, 12u, 13u}) {
    const TriMesh m = data::generate_shape(data::random_spec(data::Family::ellipsoid, seed));
    const Vec3 t{0.01, 0.02, -0.015};
    double pred = 0;
    for (size_t f = 0; f < m.faces.size(); ++f) pred += m.face_area(f) * std::abs(dot(t, m.face_normal(f)));
    pred /= m.area();
    const auto r = chamfer_l1(moved(m, t), m, 100000, seed);
    EXPECT_NEAR(r.value * 0.1, pred, 0.1 * pred);
  }
}

TEST(Chamfer, SwapOnlyChangesUnit) {
  const TriMesh a = data::make_box(0.5, 0.5, 0.5);
  const TriMesh b = moved(a, {0.1, -0.05, 0.02});
  EXPECT_DOUBLE_EQ(chamfer_l1(a, b, 20000, 5).value, chamfer_l1(b, a, 20000, 5).value);
}

TEST(Chamfer, EmptyPredictionIsFlagged) {
  const auto r = chamfer_l1(TriMesh{}, data::make_box(0.5, 0.5, 0.5));
  EXPECT_TRUE(r.empty_prediction);
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(NormalConsistency, IdenticalAndFlipped) {
  const TriMesh m = data::generate_shape(data::random_spec(data::Family::union2, 3));
  EXPECT_GE(normal_consistency(m, m, 100000, 2), 0.999);
  TriMesh f = m;
  f.flip_orientation();
  EXPECT_NEAR(normal_consistency(f, m, 20000, 2), normal_consistency(m, m, 20000, 2), 2e-3);
}

TEST(NormalConsistency, CoarseIcosphereMatchesBruteForce) {
  const int n = 3000;
  const TriMesh fine = sphere(1.0, 5), coarse = data::make_icosphere(2);
  const double nc = normal_consistency(coarse, fine, n, 9);
  EXPECT_GT(nc, 0.97);
  EXPECT_LT(nc, 1.0);
  const auto a = sample_surface(coarse, n, 9), b = sample_surface(fine, n, 9);
  auto one_way = [](const SurfaceSamples& from, const SurfaceSamples& to) {
    double acc = 0;
    for (size_t i = 0; i < from.points.size(); ++i) {
      size_t best = 0;
      double bd = 1e300;
      for (size_t j = 0; j < to.points.size(); ++j) {
        const double d = dot(from.points[i] - to.points[j], from.points[i] - to.points[j]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      acc += std::abs(dot(from.normals[i], to.normals[best]));
    }
    return acc / static_cast<double>(from.points.size());
  };
  EXPECT_NEAR(nc, 0.5 * (one_way(a, b) + one_way(b, a)), 1e-6);
}

TEST(Metrics, InvariantUnderSharedRigidMotion) {
  const TriMesh a = data::generate_shape(data::random_spec(data::Family::box, 21));
  const TriMesh b = data::generate_shape(data::random_spec(data::Family::capsule, 22));
  // A quarter turn keeps the bounding-box edge that sets the Chamfer unit.
  auto pose = [&](TriMesh m) {
    for (auto& v : m.vertices) v = Vec3{-v.y, v.x, v.z} + Vec3{0.3, -1.0, 2.0};
    return m;
  };
  const MetricReport r0 = evaluate(a, b, 50000, 3), r1 = evaluate(pose(a), pose(b), 50000, 3);
  EXPECT_NEAR(r0.iou, r1.iou, 0.02);
  EXPECT_NEAR(r0.chamfer_l1, r1.chamfer_l1, 0.05 * r0.chamfer_l1);
  EXPECT_NEAR(r0.normal_consistency, r1.normal_consistency, 0.01);
}

TEST(Metrics, ReportFormats) {
  MetricReport r;
  r.object_id = "obj_0001";
  r.n_views = 4;
  r.iou = 0.5;
  r.chamfer_l1 = 1.25;
  r.normal_consistency = 0.9;
  r.seed = 3;
  r.sample_count = 100;
  const std::string j = report_json(r);
  for (const char* key : {"\"object_id\":\"obj_0001\"", "\"n_views\":4", "\"iou\":0.5", "\"chamfer_l1\":1.25",
                          "\"normal_consistency\":0.9", "\"seed\":3"}) {
    EXPECT_NE(j.find(key), std::string::npos) << key << " in " << j;
  }
  const std::string t = report_table({r, r});
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
  r.empty_prediction = true;
  EXPECT_NE(report_json(r).find("\"chamfer_l1\":null"), std::string::npos);
}

}  // namespace
}  // namespace vpf::metrics
