#include <stdexcept>

#include "vpf/fusion.hpp"

namespace vpf {

PixelFusion::PixelFusion(nn::ParamStore& ps, const std::string& name, int64_t img_c, int bands_, int64_t c,
                         int heads, int64_t ff, int n_layers)
    : bands(bands_), mlp(ps, name + ".token", img_c, bands_, c), out(ps, name + ".out", c, c, 1.0) {
  for (int i = 0; i < n_layers; ++i) layers.emplace_back(ps, name + ".set" + std::to_string(i), c, heads, ff);
}

Var PixelFusion::fuse_tokens(const Var& tokens) const {
  Var t = tokens;
  if (!mean_only) {
    for (const auto& l : layers) t = l(t);
  }
  return mean_over_axis(t, 1);
}

Var PixelFusion::operator()(const Var& maps, const std::vector<Camera>& cams,
                            const std::vector<std::vector<Vec3>>& points, int64_t views, double side) const {
  const int64_t b = static_cast<int64_t>(points.size());
  if (b < 1 || views < 1) throw std::invalid_argument("pixel fusion needs at least one object and one view");
  if (maps.dim(0) != b * views || static_cast<int64_t>(cams.size()) != b * views) {
    throw std::invalid_argument("pixel fusion: expected " + std::to_string(b * views) + " maps and cameras");
  }
  const int64_t q = static_cast<int64_t>(points[0].size());
  std::vector<int64_t> vidx;
  std::vector<Vec3> pts;
  vidx.reserve(static_cast<size_t>(b * q * views));
  pts.reserve(vidx.capacity());
  for (int64_t i = 0; i < b; ++i) {
    if (static_cast<int64_t>(points[static_cast<size_t>(i)].size()) != q) {
      throw std::invalid_argument("pixel fusion: every object needs the same number of query points");
    }
    for (const auto& p : points[static_cast<size_t>(i)]) {
      for (int64_t v = 0; v < views; ++v) {
        vidx.push_back(i * views + v);
        pts.push_back(p);
      }
    }
  }
  const auto s = make_view_sampling(cams, vidx, pts, maps.dim(1), maps.dim(2), bands, side, maps.dtype());
  const Var tokens = mlp(maps, s);
  return out(fuse_tokens(reshape(tokens, {b * q, views, tokens.dim(1)})));
}

void PixelFusion::zero_output() {
  out.w.assign(Tensor(out.w.shape(), out.w.dtype()));
  out.b.assign(Tensor(out.b.shape(), out.b.dtype()));
}

}  // namespace vpf
