#include <stdexcept>

#include "vpf/fusion.hpp"

namespace vpf {

Arch parse_arch(const std::string& s) {
  if (s == "A" || s == "a") return Arch::A;
  if (s == "B" || s == "b") return Arch::B;
  if (s == "C" || s == "c") return Arch::C;
  if (s == "D" || s == "d") return Arch::D;
  throw std::invalid_argument("unknown architecture '" + s + "' (expected A, B, C or D)");
}

char arch_char(Arch a) { return static_cast<char>('A' + static_cast<int>(a)); }

ViewSampling make_view_sampling(const std::vector<Camera>& cams, const std::vector<int64_t>& views,
                                const std::vector<Vec3>& points, int64_t fh, int64_t fw, int bands,
                                double side, DType dt) {
  if (views.size() != points.size()) throw std::invalid_argument("view sampling: views/points size mismatch");
  std::vector<PixelCoord> coords(points.size());
  std::vector<double> codes;
  codes.reserve(points.size() * static_cast<size_t>(2 * bands));
  for (size_t r = 0; r < points.size(); ++r) {
    const Camera& cam = cams.at(static_cast<size_t>(views[r]));
    const Projection p = project(cam, points[r]);
    coords[r] = image_to_feature(p, cam, nn::ImageEncoder::kStride, static_cast<int>(fh), static_cast<int>(fw));
    const auto g = pos_encode_depth(normalize_depth(p.depth, side), bands);
    codes.insert(codes.end(), g.begin(), g.end());
  }
  auto plan = bilinear_plan(static_cast<int>(fh), static_cast<int>(fw), coords);
  const int64_t per_view = fh * fw;
  for (size_t r = 0; r < points.size(); ++r) {
    for (int t = 0; t < plan->taps; ++t) {
      auto& idx = plan->index[r * static_cast<size_t>(plan->taps) + static_cast<size_t>(t)];
      if (idx >= 0) idx += views[r] * per_view;
    }
  }
  ViewSampling s;
  s.plan = plan;
  s.depth_code = Tensor::from_values({static_cast<int64_t>(points.size()), 2 * bands}, codes, dt);
  return s;
}

TokenMlp::TokenMlp(nn::ParamStore& ps, const std::string& name, int64_t img_c, int bands, int64_t c)
    : fc1(ps, name + ".fc1", img_c + 2 * bands, c), fc2(ps, name + ".fc2", c, c, 1.0) {}

Var TokenMlp::operator()(const Var& maps, const ViewSampling& s) const {
  const Var flat = reshape(maps, {maps.dim(0) * maps.dim(1) * maps.dim(2), maps.dim(3)});
  const Var feat = gather_weighted(flat, s.plan);
  return fc2(relu(fc1(concat({feat, constant(s.depth_code)}, 1))));
}

VolumeBuilder::VolumeBuilder(nn::ParamStore& ps, const std::string& name, const GridSpec& g, int64_t img_c,
                             int bands_, int64_t c)
    : grid(g), bands(bands_), mlp(ps, name, img_c, bands_, c) {
  grid.validate();
}

Var VolumeBuilder::operator()(const Var& maps, const std::vector<Camera>& cams) const {
  const int64_t v = maps.dim(0);
  if (static_cast<int64_t>(cams.size()) != v) {
    throw std::invalid_argument("volume builder: " + std::to_string(v) + " feature maps but " +
                                std::to_string(cams.size()) + " cameras");
  }
  const auto centers = grid.cell_centers();
  std::vector<int64_t> views;
  std::vector<Vec3> pts;
  views.reserve(static_cast<size_t>(v) * centers.size());
  pts.reserve(views.capacity());
  for (int64_t i = 0; i < v; ++i) {
    for (const auto& c : centers) {
      views.push_back(i);
      pts.push_back(c);
    }
  }
  const auto s = make_view_sampling(cams, views, pts, maps.dim(1), maps.dim(2), bands, grid.side, maps.dtype());
  const Var tokens = mlp(maps, s);
  return reshape(tokens, {v, grid.d, grid.d, grid.d, tokens.dim(1)});
}

int unet_levels(int d) {
  int l = 0;
  while ((1 << (l + 1)) <= d) ++l;  // floor(log2 d)
  return std::max(1, l - 1);
}

UNet3d::UNet3d(nn::ParamStore& ps, const std::string& name, int d, int64_t c) {
  const int levels = unet_levels(d);
  if (d % (1 << (levels - 1)) != 0) {
    throw std::invalid_argument("U-Net: resolution " + std::to_string(d) + " not divisible by " +
                                std::to_string(1 << (levels - 1)));
  }
  for (int l = 0; l < levels; ++l) {
    const int64_t w = c << l;
    enc_.emplace_back(ps, name + ".enc" + std::to_string(l), w);
    if (l + 1 < levels) {
      const std::string p = name + ".down" + std::to_string(l);
      down_.emplace_back(ps.kaiming(p + ".w", {2, 2, 2, w, 2 * w}, 8 * w), ps.constant(p + ".b", {2 * w}, 0.0));
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    const int64_t w = c << l;
    const std::string p = name + ".up" + std::to_string(l);
    up_.emplace_back(ps.kaiming(p + ".w", {2 * w, 2, 2, 2, w}, 2 * w), ps.constant(p + ".b", {w}, 0.0));
    merge_.emplace_back(ps, name + ".merge" + std::to_string(l), 2 * w, w);
    dec_.emplace_back(ps, name + ".dec" + std::to_string(l), w);
  }
}

Var UNet3d::operator()(const Var& x, const Hook& after_encoder) const {
  std::vector<Var> skips;
  Var h = x;
  for (size_t l = 0; l < enc_.size(); ++l) {
    h = enc_[l](h);
    if (after_encoder) h = after_encoder(h, static_cast<int>(l));
    skips.push_back(h);
    if (l < down_.size()) h = conv3d(h, down_[l].first, down_[l].second, {2, 2, 2}, {0, 0, 0});
  }
  for (size_t i = 0; i < up_.size(); ++i) {
    const Var& skip = skips[skips.size() - 2 - i];
    h = conv_transpose3d_k2s2(h, up_[i].first, up_[i].second);
    h = merge_[i](concat({h, skip}, -1));
    h = dec_[i](h);
  }
  return h;
}

Var to_view_sets(const Var& x, int64_t batch, int64_t views) {
  const int64_t c = x.dim(-1);
  const int64_t s = x.numel() / (batch * views * c);
  const Var y = permute(reshape(x, {batch, views, s, c}), {0, 2, 1, 3});
  return reshape(y, {batch * s, views, c});
}

Var from_view_sets(const Var& sets, int64_t batch, int64_t views, const Shape& spatial) {
  const int64_t c = sets.dim(-1);
  const int64_t s = shape_numel(spatial);
  const Var y = permute(reshape(sets, {batch, s, views, c}), {0, 2, 1, 3});
  Shape out{batch * views};
  out.insert(out.end(), spatial.begin(), spatial.end());
  out.push_back(c);
  return reshape(y, out);
}

namespace {

Shape spatial_of(const Var& x) { return Shape(x.shape().begin() + 1, x.shape().end() - 1); }

// Mean over the N views of each object: [B * N, S..., c] -> [B, S..., c].
Var mean_views(const Var& x, int64_t b, int64_t n) {
  Shape s = x.shape();
  s[0] = n;
  s.insert(s.begin(), b);
  return mean_over_axis(reshape(x, s), 1);
}

// Applies f to sequences along spatial axis `axis` (1..3) of [V, d, d, d, c].
Var along_axis(const Var& x, int axis, const nn::SequenceAttention& f) {
  const int64_t v = x.dim(0), c = x.dim(4);
  std::vector<int> perm{0, 1, 2, 3, 4};
  // Move the attended axis to position 3.
  std::swap(perm[static_cast<size_t>(axis)], perm[3]);
  const Var moved = axis == 3 ? x : permute(x, perm);
  const int64_t len = moved.dim(3);
  Var y = f(reshape(moved, {v * moved.dim(1) * moved.dim(2), len, c}));
  y = reshape(y, moved.shape());
  return axis == 3 ? y : permute(y, perm);  // the swap is its own inverse
}

FeatureStats stats_of(const Var& x, int level) {
  FeatureStats s;
  s.level = level;
  const auto v = x.value().to_vector();
  double sum = 0, sq = 0;
  for (double e : v) sum += e;
  s.mean = sum / static_cast<double>(v.size());
  for (double e : v) sq += (e - s.mean) * (e - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

}  // namespace

VolumeFusion::VolumeFusion(nn::ParamStore& ps, const std::string& name, const FusionConfig& cfg) : cfg_(cfg) {
  const int64_t c = cfg.c;
  if (cfg.arch != Arch::C) unet_ = UNet3d(ps, name + ".unet", cfg.d, c);
  switch (cfg.arch) {
    case Arch::A:
      attsets_ = nn::AttSets(ps, name + ".attsets", c, 3);
      break;
    case Arch::B:
      for (int i = 0; i < 3; ++i) set_layers_.emplace_back(ps, name + ".set" + std::to_string(i), c, cfg.heads, cfg.ff);
      break;
    case Arch::C:
      for (int i = 0; i < 3; ++i) {
        const std::string p = name + ".axial" + std::to_string(i);
        Axial a;
        a.views = nn::TransformerLayer(ps, p + ".views", c, cfg.heads, cfg.ff);
        for (int ax = 0; ax < 3; ++ax) {
          a.axes[ax] = nn::SequenceAttention(ps, p + ".axis" + std::to_string(ax), c, cfg.heads, cfg.ff);
        }
        axial_.push_back(std::move(a));
      }
      break;
    case Arch::D: {
      const int levels = unet_levels(cfg.d);
      for (int l = 0; l < levels; ++l) {
        std::vector<nn::TransformerLayer> blk;
        for (int i = 0; i < 2; ++i) {
          blk.emplace_back(ps, name + ".scale" + std::to_string(l) + ".set" + std::to_string(i), c << l, cfg.heads,
                           cfg.ff);
        }
        scale_attn_.push_back(std::move(blk));
      }
      break;
    }
  }
}

Var VolumeFusion::operator()(const Var& vols, int64_t batch, int64_t views, FusionTrace* trace) const {
  if (views < 1 || batch < 1) throw std::invalid_argument("fusion needs at least one view and one object");
  if (vols.rank() != 5 || vols.dim(0) != batch * views || vols.dim(1) != cfg_.d || vols.dim(2) != cfg_.d ||
      vols.dim(3) != cfg_.d || vols.dim(4) != cfg_.c) {
    throw ShapeError("fusion: volumes " + shape_str(vols.shape()) + " do not match " + std::to_string(batch) +
                     " x " + std::to_string(views) + " views of d=" + std::to_string(cfg_.d) +
                     ", c=" + std::to_string(cfg_.c));
  }
  switch (cfg_.arch) {
    case Arch::A:
      return fuse_a(vols, batch, views);
    case Arch::B:
      return fuse_b(vols, batch, views);
    case Arch::C:
      return fuse_c(vols, batch, views);
    case Arch::D:
      return fuse_d(vols, batch, views, trace);
  }
  throw std::logic_error("unreachable");
}

Var VolumeFusion::fuse_a(const Var& x, int64_t b, int64_t n) const {
  const Var u = unet_(x);
  const Var fused = attsets_(to_view_sets(u, b, n));
  const int64_t d = cfg_.d;
  return reshape(fused, {b, d, d, d, cfg_.c});
}

Var VolumeFusion::fuse_b(const Var& x, int64_t b, int64_t n) const {
  const Var u = unet_(x);
  Var t = to_view_sets(u, b, n);
  for (const auto& layer : set_layers_) t = layer(t);
  const int64_t d = cfg_.d;
  return reshape(mean_over_axis(t, 1), {b, d, d, d, cfg_.c});
}

Var VolumeFusion::fuse_c(const Var& x, int64_t b, int64_t n) const {
  Var h = x;
  const Shape sp = spatial_of(x);
  for (const auto& blk : axial_) {
    h = from_view_sets(blk.views(to_view_sets(h, b, n)), b, n, sp);
    for (int ax = 0; ax < 3; ++ax) h = along_axis(h, ax + 1, blk.axes[ax]);
  }
  return mean_views(h, b, n);
}

Var VolumeFusion::fuse_d(const Var& x, int64_t b, int64_t n, FusionTrace* trace) const {
  auto hook = [&](const Var& h, int level) {
    Var t = to_view_sets(h, b, n);
    for (const auto& layer : scale_attn_[static_cast<size_t>(level)]) t = layer(t);
    const Var out = from_view_sets(t, b, n, spatial_of(h));
    if (trace) {
      ++trace->attention_blocks;
      trace->stats.push_back(stats_of(out, level));
    }
    return out;
  };
  return mean_views(unet_(x, hook), b, n);
}

}  // namespace vpf
