#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vpf/geometry.hpp"

namespace vpf {

void GridSpec::validate() const {
  if (d < 2) throw std::invalid_argument("grid: resolution must be >= 2");
  if (!(side > 0)) throw std::invalid_argument("grid: side must be positive");
}

Vec3 GridSpec::cell_center(int i, int j, int k) const {
  auto c = [&](int idx, double o) { return o + side * ((idx + 0.5) / d - 0.5); };
  return {c(i, center.x), c(j, center.y), c(k, center.z)};
}

std::vector<Vec3> GridSpec::cell_centers() const {
  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(cells()));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) out.push_back(cell_center(i, j, k));
  return out;
}

std::vector<double> pos_encode_depth(double d_norm, int bands) {
  if (bands < 1) throw std::invalid_argument("pos_encode_depth: bands must be >= 1");
  std::vector<double> out(static_cast<size_t>(2 * bands));
  double f = std::numbers::pi;
  for (int l = 0; l < bands; ++l, f *= 2.0) {
    out[static_cast<size_t>(2 * l)] = std::sin(f * d_norm);
    out[static_cast<size_t>(2 * l + 1)] = std::cos(f * d_norm);
  }
  return out;
}

std::shared_ptr<SamplePlan> bilinear_plan(int height, int width, const std::vector<PixelCoord>& coords) {
  auto plan = std::make_shared<SamplePlan>();
  plan->rows = static_cast<int64_t>(coords.size());
  plan->taps = 4;
  plan->index.assign(coords.size() * 4, -1);
  plan->weight.assign(coords.size() * 4, 0.0);
  for (size_t r = 0; r < coords.size(); ++r) {
    const auto& c = coords[r];
    if (!c.valid || !(c.u >= 0.0) || !(c.v >= 0.0) || c.u > width - 1 || c.v > height - 1) continue;
    const int x0 = std::min(static_cast<int>(std::floor(c.u)), width - 1);
    const int y0 = std::min(static_cast<int>(std::floor(c.v)), height - 1);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double ax = c.u - x0, ay = c.v - y0;
    const int64_t idx[4] = {static_cast<int64_t>(y0) * width + x0, static_cast<int64_t>(y0) * width + x1,
                            static_cast<int64_t>(y1) * width + x0, static_cast<int64_t>(y1) * width + x1};
    const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    for (int t = 0; t < 4; ++t) {
      plan->index[r * 4 + static_cast<size_t>(t)] = idx[t];
      plan->weight[r * 4 + static_cast<size_t>(t)] = w[t];
    }
  }
  return plan;
}

PixelCoord image_to_feature(const Projection& p, const Camera& cam, int stride, int fh, int fw) {
  PixelCoord out;
  if (p.behind || p.u < -0.5 || p.v < -0.5 || p.u > cam.width - 0.5 || p.v > cam.height - 0.5) {
    out.valid = false;
    return out;
  }
  out.u = std::clamp((p.u + 0.5) / stride - 0.5, 0.0, fw - 1.0);
  out.v = std::clamp((p.v + 0.5) / stride - 0.5, 0.0, fh - 1.0);
  return out;
}

std::shared_ptr<SamplePlan> trilinear_plan(const GridSpec& grid, const std::vector<Vec3>& points) {
  grid.validate();
  auto plan = std::make_shared<SamplePlan>();
  plan->rows = static_cast<int64_t>(points.size());
  plan->taps = 8;
  plan->index.resize(points.size() * 8);
  plan->weight.resize(points.size() * 8);
  const int d = grid.d;
  const Vec3 lo = grid.center - Vec3{grid.side / 2, grid.side / 2, grid.side / 2};
  for (size_t r = 0; r < points.size(); ++r) {
    int i0[3], i1[3];
    double a[3];
    for (int ax = 0; ax < 3; ++ax) {
      double f = (points[r][ax] - lo[ax]) / grid.side * d - 0.5;
      if (!std::isfinite(f)) f = 0.0;
      f = std::clamp(f, 0.0, d - 1.0);
      i0[ax] = std::min(static_cast<int>(std::floor(f)), d - 2);
      i1[ax] = i0[ax] + 1;
      a[ax] = f - i0[ax];
    }
    for (int t = 0; t < 8; ++t) {
      const int bx = (t >> 2) & 1, by = (t >> 1) & 1, bz = t & 1;
      const int64_t ix = bx ? i1[0] : i0[0], iy = by ? i1[1] : i0[1], iz = bz ? i1[2] : i0[2];
      plan->index[r * 8 + static_cast<size_t>(t)] = (ix * d + iy) * d + iz;
      plan->weight[r * 8 + static_cast<size_t>(t)] =
          (bx ? a[0] : 1 - a[0]) * (by ? a[1] : 1 - a[1]) * (bz ? a[2] : 1 - a[2]);
    }
  }
  return plan;
}

namespace {

std::vector<double> apply_plan(const Tensor& src, const SamplePlan& plan) {
  const int64_t c = src.dim(-1);
  const auto v = src.to_vector();
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  for (int t = 0; t < plan.taps; ++t) {
    const int64_t idx = plan.index[static_cast<size_t>(t)];
    if (idx < 0) continue;
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(j)] += plan.weight[static_cast<size_t>(t)] * v[static_cast<size_t>(idx * c + j)];
  }
  return out;
}

}  // namespace

std::vector<double> bilinear_sample(const Tensor& map, double u, double v) {
  if (map.rank() != 3) throw ShapeError("bilinear_sample expects [H, W, C], got " + shape_str(map.shape()));
  auto plan = bilinear_plan(static_cast<int>(map.dim(0)), static_cast<int>(map.dim(1)), {{u, v, true}});
  return apply_plan(map, *plan);
}

std::vector<double> trilinear_sample(const Tensor& vol, Vec3 X, const GridSpec& grid) {
  if (vol.rank() != 4 || vol.dim(0) != grid.d || vol.dim(1) != grid.d || vol.dim(2) != grid.d) {
    throw ShapeError("trilinear_sample: volume " + shape_str(vol.shape()) + " does not match grid d=" +
                     std::to_string(grid.d));
  }
  auto plan = trilinear_plan(grid, {X});
  return apply_plan(vol, *plan);
}

}  // namespace vpf
