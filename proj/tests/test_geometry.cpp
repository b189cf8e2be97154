#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "vpf/geometry.hpp"
#include "vpf/gradcheck.hpp"

using namespace vpf;

namespace {

Camera random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vec3 eye{u(rng), u(rng), u(rng)};
  eye = (1.5 + 0.5 * u(rng)) * normalized(eye);
  return look_at(eye, Vec3{0.1 * u(rng), 0.1 * u(rng), 0.0}, Vec3{0, 0, 1}, 48, 64, 40 + 5 * u(rng),
                 41 + 5 * u(rng));
}

}  // namespace

TEST(Geometry, PrincipalPointAndBehind) {
  Camera c = look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 32, 32, 20, 20);
  auto p = project(c, {0, 0, 1});
  EXPECT_NEAR(p.u, c.cx, 1e-12);
  EXPECT_NEAR(p.v, c.cy, 1e-12);
  EXPECT_NEAR(p.depth, 3.0, 1e-12);
  EXPECT_TRUE(project(c, c.center()).behind);
  EXPECT_TRUE(project(c, {0, 0, -5}).behind);
}

TEST(Geometry, ProjectMatchesMatrixOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 50; ++t) {
    Camera c = random_camera(rng);
    c.validate();
    // P = K [R | t] as an explicit 3x4 matrix.
    double K[3][3] = {{c.fx, 0, c.cx}, {0, c.fy, c.cy}, {0, 0, 1}};
    double Rt[3][4];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) Rt[i][j] = c.rotation[static_cast<size_t>(i)][static_cast<size_t>(j)];
      Rt[i][3] = c.translation[i];
    }
    double P[3][4] = {};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 3; ++k) P[i][j] += K[i][k] * Rt[k][j];
    Vec3 X{u(rng), u(rng), u(rng)};
    double h[3];
    for (int i = 0; i < 3; ++i) h[i] = P[i][0] * X.x + P[i][1] * X.y + P[i][2] * X.z + P[i][3];
    auto p = project(c, X);
    ASSERT_FALSE(p.behind);
    EXPECT_NEAR(p.u, h[0] / h[2], 1e-9);
    EXPECT_NEAR(p.v, h[1] / h[2], 1e-9);
    EXPECT_NEAR(p.depth, h[2], 1e-9);
    Vec3 back = unproject(c, p.u, p.v, p.depth);
    EXPECT_LE(norm(back - X), 1e-6);
  }
}

TEST(Geometry, FlipMirrorsProjection) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 20; ++t) {
    Camera c = random_camera(rng);
    Camera f = flip_horizontal(c);
    EXPECT_NO_THROW(f.validate());
    Vec3 X{u(rng), u(rng), u(rng)};
    auto p = project(c, X), q = project(f, mirror_x(X));
    EXPECT_NEAR(q.u, c.width - 1 - p.u, 1e-9);
    EXPECT_NEAR(q.v, p.v, 1e-9);
    EXPECT_NEAR(q.depth, p.depth, 1e-9);
  }
}

TEST(Geometry, CameraValidation) {
  Camera c;
  c.fx = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.fx = 1;
  c.rotation[0][0] = -1;  // reflection
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.rotation[0][0] = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Geometry, CameraJsonRoundTrip) {
  std::mt19937_64 rng(7);
  std::vector<Camera> cams{random_camera(rng), random_camera(rng)};
  auto path = std::filesystem::temp_directory_path() / "vpf_cams_test.jsonl";
  write_cameras(path.string(), cams);
  auto back = read_cameras(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 2u);
  for (size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].fx, cams[i].fx);
    EXPECT_EQ(back[i].cy, cams[i].cy);
    EXPECT_EQ(back[i].width, cams[i].width);
    EXPECT_EQ(back[i].rotation, cams[i].rotation);
    EXPECT_EQ(back[i].translation.z, cams[i].translation.z);
  }
}

TEST(Geometry, PosEncodeExamples) {
  auto z = pos_encode_depth(0.0, 11);
  ASSERT_EQ(z.size(), 22u);
  for (size_t i = 0; i < 22; ++i) EXPECT_EQ(z[i], i % 2 == 0 ? 0.0 : 1.0);
  auto h = pos_encode_depth(0.5, 11);
  EXPECT_NEAR(h[0], 1.0, 1e-15);
  EXPECT_NEAR(h[1], 0.0, 1e-15);
  auto e = pos_encode_depth(0.3, 11);
  for (int l = 0; l < 11; ++l) {
    const double a = std::pow(2.0, l) * std::numbers::pi * 0.3;
    EXPECT_NEAR(e[static_cast<size_t>(2 * l)], std::sin(a), 1e-12);
    EXPECT_NEAR(e[static_cast<size_t>(2 * l + 1)], std::cos(a), 1e-12);
  }
  EXPECT_THROW(pos_encode_depth(0.1, 0), std::invalid_argument);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 100; ++t) {
    for (double v : pos_encode_depth(u(rng), 11)) {
      EXPECT_LE(std::abs(v), 1.0);
    }
  }
}

TEST(Geometry, BilinearExamplesAndOracle) {
  Tensor map = tu::random_tensor({5, 7, 3}, 9);
  auto mv = map.to_vector();
  auto texel = [&](int y, int x, int c) { return mv[static_cast<size_t>((y * 7 + x) * 3 + c)]; };
  auto s = bilinear_sample(map, 4, 2);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s[static_cast<size_t>(c)], texel(2, 4, c));
  auto m = bilinear_sample(map, 4.5, 2);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(m[static_cast<size_t>(c)], 0.5 * (texel(2, 4, c) + texel(2, 5, c)), 1e-15);
  for (double v : bilinear_sample(map, -0.1, 2)) EXPECT_EQ(v, 0.0);
  for (double v : bilinear_sample(map, 3, 4.01)) EXPECT_EQ(v, 0.0);
  // Brute-force tent weights over every texel.
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> uu(0, 6), vv(0, 4);
  for (int t = 0; t < 100; ++t) {
    const double u = uu(rng), v = vv(rng);
    auto got = bilinear_sample(map, u, v);
    for (int c = 0; c < 3; ++c) {
      double want = 0;
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x)
          want += std::max(0.0, 1 - std::abs(u - x)) * std::max(0.0, 1 - std::abs(v - y)) * texel(y, x, c);
      EXPECT_NEAR(got[static_cast<size_t>(c)], want, 1e-6);
    }
  }
}

TEST(Geometry, TrilinearExamplesAndLinearField) {
  GridSpec g{6, {0.1, -0.2, 0.05}, 1.1};
  Tensor vol = tu::random_tensor({6, 6, 6, 2}, 11);
  auto vv = vol.to_vector();
  auto cell = [&](int i, int j, int k, int c) { return vv[static_cast<size_t>(((i * 6 + j) * 6 + k) * 2 + c)]; };
  auto at = trilinear_sample(vol, g.cell_center(2, 3, 4), g);
  EXPECT_NEAR(at[0], cell(2, 3, 4, 0), 1e-12);
  Vec3 mid = 0.5 * (g.cell_center(1, 1, 1) + g.cell_center(2, 2, 2));
  double mean = 0;
  for (int t = 0; t < 8; ++t) mean += cell(1 + (t >> 2 & 1), 1 + (t >> 1 & 1), 1 + (t & 1), 1) / 8;
  EXPECT_NEAR(trilinear_sample(vol, mid, g)[1], mean, 1e-12);

  auto f = [](Vec3 p) { return 2 * p.x + 3 * p.y - p.z; };
  std::vector<double> lin;
  for (const auto& c : g.cell_centers()) lin.push_back(f(c));
  Tensor lv = Tensor::from_values({6, 6, 6, 1}, lin, DType::f64);
  const Vec3 lo = g.cell_center(0, 0, 0), hi = g.cell_center(5, 5, 5);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    Vec3 p{lo.x + u(rng) * (hi.x - lo.x), lo.y + u(rng) * (hi.y - lo.y), lo.z + u(rng) * (hi.z - lo.z)};
    EXPECT_NEAR(trilinear_sample(lv, p, g)[0], f(p), 1e-5);
  }
  // Outside the hull the sample clamps to the boundary value.
  Vec3 out{hi.x + 3, lo.y, lo.z};
  EXPECT_NEAR(trilinear_sample(lv, out, g)[0], f({hi.x, lo.y, lo.z}), 1e-12);
}

TEST(Geometry, TrilinearPlanIsDifferentiable) {
  GridSpec g{3, {0, 0, 0}, 1.0};
  Var vol = tu::param({27, 4}, 13);
  auto plan = trilinear_plan(g, {{0.1, 0.2, -0.3}, {0.4, -0.4, 0.0}});
  auto res = gradcheck([&] { return tu::probe_loss(gather_weighted(vol, plan)); }, {{"vol", vol}});
  EXPECT_LE(max_gradcheck_error(res), 1e-6);
}

TEST(Geometry, GridSpecValidation) {
  EXPECT_THROW((GridSpec{1, {}, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((GridSpec{4, {}, 0.0}).validate(), std::invalid_argument);
  GridSpec g{4, {0, 0, 0}, 1.0};
  EXPECT_NEAR(g.cell_center(0, 0, 0).x, -0.375, 1e-15);
  EXPECT_NEAR(g.cell_center(3, 0, 0).x, 0.375, 1e-15);
}
