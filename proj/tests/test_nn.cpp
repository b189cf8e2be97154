#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "naive.hpp"
#include "test_util.hpp"
#include "vpf/gradcheck.hpp"
#include "vpf/nn.hpp"

using namespace vpf;

namespace {

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Perturbs norm affines away from (1, 0) so oracles exercise them.
void jitter(nn::ParamStore& ps, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& [name, v] : ps.entries()) {
    if (name.find("gamma") == std::string::npos && name.find("beta") == std::string::npos &&
        name.find(".b") == std::string::npos)
      continue;
    auto vals = v.value().to_vector();
    for (auto& x : vals) x += u(rng);
    Var(v).assign(Tensor::from_values(v.shape(), vals, v.dtype()));
  }
}

}  // namespace

TEST(Nn, EncoderZeroImageAndShape) {
  nn::ParamStore ps(1);
  nn::ImageEncoder enc(ps, "enc", {{8, 16, 16, 64}});
  Var zero(Tensor({2, 64, 64, 3}));
  Var y = enc(zero);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 16, 64}));
  for (double v : y.value().to_vector()) EXPECT_EQ(v, 0.0);
  try {
    enc(Var(Tensor({1, 30, 32, 3})));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pad by 2 rows"), std::string::npos) << e.what();
  }
}

TEST(Nn, EncoderGradient) {
  PrecisionScope f64(DType::f64);
  nn::ParamStore ps(2);
  nn::ImageEncoder enc(ps, "enc", {{8, 8, 8, 8}});
  jitter(ps, 3);
  Var img(tu::random_tensor({2, 8, 8, 3}, 4));
  auto res = gradcheck([&] { return tu::probe_loss(enc(img)); }, ps.entries());
  EXPECT_LE(max_gradcheck_error(res), 1e-4);
}

TEST(Nn, TransformerMatchesNaiveOracle) {
  PrecisionScope f64(DType::f64);
  nn::ParamStore ps(5);
  nn::TransformerLayer layer(ps, "tf", 16, 8, 32);
  jitter(ps, 6);
  Tensor x = tu::random_tensor({2, 3, 16}, 7);
  auto got = layer(Var(x)).value().to_vector();
  auto xv = x.to_vector();
  for (size_t g = 0; g < 2; ++g) {
    auto want = naive::transformer(naive::to_mat(xv, 3, 16, g * 48), layer);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 16; ++j) EXPECT_NEAR(got[g * 48 + i * 16 + j], want[i][j], 1e-6);
  }
}

TEST(Nn, TransformerEquivarianceAndSingleToken) {
  nn::ParamStore ps(8);
  nn::TransformerLayer layer(ps, "tf", 16, 8, 128);
  for (int n : {1, 2, 3, 5, 8}) {
    Tensor x = tu::random_tensor({1, n, 16}, 9, DType::f32);
    auto y = layer(Var(x)).value().to_vector();
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(static_cast<unsigned>(n));
    std::shuffle(perm.begin(), perm.end(), rng);
    auto xv = x.to_vector();
    std::vector<double> px(xv.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j) px[static_cast<size_t>(i * 16 + j)] = xv[static_cast<size_t>(perm[static_cast<size_t>(i)] * 16 + j)];
    auto py = layer(Var(Tensor::from_values({1, n, 16}, px, DType::f32))).value().to_vector();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j)
        EXPECT_NEAR(py[static_cast<size_t>(i * 16 + j)], y[static_cast<size_t>(perm[static_cast<size_t>(i)] * 16 + j)], 1e-5);
  }
  // A single token's output does not depend on other groups.
  Tensor a = tu::random_tensor({2, 1, 16}, 10, DType::f32);
  auto ya = layer(Var(a)).value().to_vector();
  auto yb = layer(Var(a.reshape({2, 1, 16}).clone())).value().to_vector();
  EXPECT_EQ(ya, yb);
}

TEST(Nn, SequenceAttentionOracleAndPositions) {
  PrecisionScope f64(DType::f64);
  nn::ParamStore ps(11);
  nn::SequenceAttention sa(ps, "seq", 16, 8, 32);
  jitter(ps, 12);
  Tensor x = tu::random_tensor({1, 4, 16}, 13);
  auto got = sa(Var(x)).value().to_vector();
  auto want = naive::sequence(naive::to_mat(x.to_vector(), 4, 16), sa);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 16; ++j) EXPECT_NEAR(got[i * 16 + j], want[i][j], 1e-6);
  // Identical tokens at different positions are told apart.
  std::vector<double> same(64);
  for (size_t i = 0; i < 64; ++i) same[i] = 0.1 * static_cast<double>(i % 16);
  auto ys = sa(Var(Tensor::from_values({1, 4, 16}, same, DType::f64))).value().to_vector();
  EXPECT_GT(max_diff(std::vector<double>(ys.begin(), ys.begin() + 16), std::vector<double>(ys.begin() + 16, ys.begin() + 32)), 1e-3);
  EXPECT_EQ(sa(Var(tu::random_tensor({3, 1, 16}, 14))).shape(), (Shape{3, 1, 16}));
}

TEST(Nn, AttSetsInvariance) {
  nn::ParamStore ps(15);
  nn::AttSets att(ps, "att", 8);
  Tensor one = tu::random_tensor({2, 1, 8}, 16, DType::f32);
  auto y1 = att(Var(one)).value().to_vector();
  auto ov = one.to_vector();
  for (size_t i = 0; i < ov.size(); ++i) EXPECT_NEAR(y1[i], ov[i], 1e-6);
  // Identical views return that view.
  std::vector<double> rep;
  for (int i = 0; i < 4; ++i) rep.insert(rep.end(), ov.begin(), ov.begin() + 8);
  auto yr = att(Var(Tensor::from_values({1, 4, 8}, rep, DType::f32))).value().to_vector();
  for (size_t j = 0; j < 8; ++j) EXPECT_NEAR(yr[j], ov[j], 1e-6);
  // All 6 orders of 3 views.
  Tensor x = tu::random_tensor({1, 3, 8}, 17, DType::f32);
  auto xv = x.to_vector();
  auto base = att(Var(x)).value().to_vector();
  std::vector<int> perm{0, 1, 2};
  do {
    std::vector<double> px;
    for (int p : perm) px.insert(px.end(), xv.begin() + p * 8, xv.begin() + p * 8 + 8);
    auto y = att(Var(Tensor::from_values({1, 3, 8}, px, DType::f32))).value().to_vector();
    EXPECT_LE(max_diff(y, base), 1e-5);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(Nn, DecoderZeroLastLayerAndShape) {
  nn::ParamStore ps(18);
  nn::OccupancyDecoder dec(ps, "dec", 32);
  ASSERT_EQ(dec.layers.size(), 8u);
  EXPECT_EQ(dec.layers[4].in(), 128);
  EXPECT_EQ(dec.layers[3].out(), 96);
  dec.zero_last_layer();
  Var y = dec(Var(Tensor({5, 32})));
  EXPECT_EQ(y.shape(), (Shape{5}));
  for (double v : sigmoid(y).value().to_vector()) EXPECT_EQ(v, 0.5);
  Var yr = dec(Var(tu::random_tensor({7, 32}, 19, DType::f32)));
  for (double v : yr.value().to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Nn, DecoderGradient) {
  PrecisionScope f64(DType::f64);
  nn::ParamStore ps(20);
  nn::OccupancyDecoder dec(ps, "dec", 8, 16);
  jitter(ps, 21);
  Var f(tu::random_tensor({6, 8}, 22));
  auto res = gradcheck([&] { return tu::probe_loss(dec(f)); }, ps.entries());
  EXPECT_LE(max_gradcheck_error(res), 1e-4);
}

TEST(Nn, ResBlockGradientAndFinite) {
  PrecisionScope f64(DType::f64);
  nn::ParamStore ps(23);
  nn::ResBlock3d rb(ps, "rb", 8);
  jitter(ps, 24);
  Var x(tu::random_tensor({2, 2, 2, 2, 8}, 25));
  auto res = gradcheck([&] { return tu::probe_loss(rb(x)); }, ps.entries());
  EXPECT_LE(max_gradcheck_error(res), 1e-4);
}

TEST(Nn, ParamStoreRejectsDuplicates) {
  nn::ParamStore ps;
  ps.constant("a", {2}, 1.0);
  EXPECT_THROW(ps.constant("a", {2}, 1.0), std::invalid_argument);
  EXPECT_THROW(ps.get("b"), std::out_of_range);
  EXPECT_EQ(nn::norm_groups(64), 8);
  EXPECT_EQ(nn::norm_groups(12), 4);
}
