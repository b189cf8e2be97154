#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpf/pipeline.hpp"

namespace vpf::pipeline {

std::string stage_name(Stage s) { return s == Stage::full ? "full" : "volume-only"; }

std::string model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"arch", std::string(1, arch_char(c.arch))},
                        {"d", c.d},
                        {"c", c.c},
                        {"heads", c.heads},
                        {"ff", c.ff},
                        {"bands", c.bands},
                        {"side", c.side},
                        {"encoder_widths", c.encoder_widths},
                        {"hidden", c.hidden},
                        {"pixel_layers", c.pixel_layers},
                        {"seed", c.seed},
                        {"dtype", c.dtype == DType::f64 ? "f64" : "f32"}}
      .dump();
}

ModelConfig model_config_from_json(const std::string& s) {
  const auto j = nlohmann::json::parse(s);
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.d = j.at("d").get<int>();
  c.c = j.at("c").get<int64_t>();
  c.heads = j.at("heads").get<int>();
  c.ff = j.at("ff").get<int64_t>();
  c.bands = j.at("bands").get<int>();
  c.side = j.at("side").get<double>();
  c.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
  c.hidden = j.at("hidden").get<int64_t>();
  c.pixel_layers = j.at("pixel_layers").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.dtype = j.at("dtype").get<std::string>() == "f64" ? DType::f64 : DType::f32;
  return c;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg), ps_(cfg.seed) {
  if (cfg.d < 1 || cfg.c < 1 || cfg.heads < 1 || cfg.bands < 1 || !(cfg.side > 0)) {
    throw std::invalid_argument("model config: d, c, heads, bands and side must be positive");
  }
  if (cfg.c % cfg.heads != 0) throw std::invalid_argument("model config: c must be divisible by heads");
  if (cfg.encoder_widths.size() != 4) throw std::invalid_argument("model config: the encoder takes four widths");
  PrecisionScope precision(cfg.dtype);
  encoder = nn::ImageEncoder(ps_, "enc", nn::ImageEncoderConfig{cfg.encoder_widths});
  const int64_t img_c = encoder.out_channels();
  builder = VolumeBuilder(ps_, "vol", grid(), img_c, cfg.bands, cfg.c);
  fusion = VolumeFusion(ps_, "f", FusionConfig{cfg.arch, cfg.d, cfg.c, cfg.heads, cfg.ff});
  pixel = PixelFusion(ps_, "pix", img_c, cfg.bands, cfg.c, cfg.heads, cfg.ff, cfg.pixel_layers);
  decoder = nn::OccupancyDecoder(ps_, "dec", cfg.c, cfg.hidden);
}

GridSpec Model::grid() const {
  GridSpec g;
  g.d = cfg_.d;
  g.side = cfg_.side;
  return g;
}

std::vector<std::string> Model::parameter_groups() { return {"enc", "vol", "f", "pix", "dec"}; }

Encoded Model::encode(const Tensor& images, const std::vector<Camera>& cams, int64_t batch, int64_t views,
                      FusionTrace* trace) const {
  if (batch < 1 || views < 1) throw std::invalid_argument("forward needs at least one object and one view");
  if (images.rank() != 4 || images.dim(3) != 3) throw ShapeError("images must be [B * N, H, W, 3]");
  if (images.dim(0) != batch * views || static_cast<int64_t>(cams.size()) != batch * views) {
    throw ShapeError("expected " + std::to_string(batch * views) + " images and cameras, got " +
                     std::to_string(images.dim(0)) + " and " + std::to_string(cams.size()));
  }
  Encoded e;
  e.batch = batch;
  e.views = views;
  e.cams = cams;
  e.maps = encoder(constant(images.dtype() == cfg_.dtype ? images : images.to(cfg_.dtype)));
  e.fused = fusion(builder(e.maps, cams), batch, views, trace);
  return e;
}

Var Model::query(const Encoded& e, const std::vector<std::vector<Vec3>>& points) const {
  if (static_cast<int64_t>(points.size()) != e.batch) {
    throw std::invalid_argument("query: " + std::to_string(points.size()) + " point sets for " +
                                std::to_string(e.batch) + " objects");
  }
  std::vector<Vec3> flat;
  std::vector<int64_t> owner;
  for (size_t b = 0; b < points.size(); ++b) {
    flat.insert(flat.end(), points[b].begin(), points[b].end());
    owner.insert(owner.end(), points[b].size(), static_cast<int64_t>(b));
  }
  if (flat.empty()) throw std::invalid_argument("query: no points");
  auto plan = trilinear_plan(grid(), flat);
  const int64_t cells = grid().cells();
  for (size_t r = 0; r < flat.size(); ++r) {
    for (int t = 0; t < plan->taps; ++t) {
      auto& idx = plan->index[r * static_cast<size_t>(plan->taps) + static_cast<size_t>(t)];
      if (idx >= 0) idx += owner[r] * cells;
    }
  }
  Var feat = gather_weighted(reshape(e.fused, {e.batch * cells, cfg_.c}), plan);
  if (stage_ == Stage::full) feat = add(feat, pixel(e.maps, e.cams, points, e.views, cfg_.side));
  return decoder(feat);
}

Var Model::forward(const Tensor& images, const std::vector<Camera>& cams, int64_t batch, int64_t views,
                   const std::vector<std::vector<Vec3>>& points) const {
  return query(encode(images, cams, batch, views), points);
}

void Model::begin_full_stage() {
  pixel.zero_output();
  stage_ = Stage::full;
}

Tensor images_to_tensor(const std::vector<const data::Image*>& images, const std::vector<bool>& flips, DType dt) {
  if (images.empty()) throw std::invalid_argument("no images");
  if (!flips.empty() && flips.size() != images.size()) throw std::invalid_argument("one flip flag per image");
  const int h = images[0]->height, w = images[0]->width;
  Tensor t({static_cast<int64_t>(images.size()), h, w, 3}, dt);
  visit_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    T* out = t.mutable_data<T>();
    for (size_t i = 0; i < images.size(); ++i) {
      const data::Image& im = *images[i];
      if (im.height != h || im.width != w) throw ShapeError("images differ in size");
      const bool flip = !flips.empty() && flips[i];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sx = flip ? w - 1 - x : x;
          for (int c = 0; c < 3; ++c) {
            out[((i * static_cast<size_t>(h) + static_cast<size_t>(y)) * static_cast<size_t>(w) + static_cast<size_t>(x)) * 3 + static_cast<size_t>(c)] =
                static_cast<T>(im.at(y, sx, c));
          }
        }
      }
    }
  });
  return t;
}

ViewInput canonical_views(const std::vector<const data::Image*>& images, const std::vector<Camera>& cams, DType dt) {
  if (images.size() != cams.size()) throw std::invalid_argument("one camera per image");
  std::vector<size_t> order(images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::string> keys(images.size());
  for (size_t i = 0; i < keys.size(); ++i) keys[i] = camera_to_json(cams[i]);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return images[a]->rgb < images[b]->rgb;
  });
  ViewInput v;
  std::vector<const data::Image*> sorted;
  for (size_t i : order) {
    sorted.push_back(images[i]);
    v.cams.push_back(cams[i]);
  }
  v.images = images_to_tensor(sorted, {}, dt);
  return v;
}

OccupancyGrid eval_grid(const Model& m, const Tensor& images, const std::vector<Camera>& cams, int resolution,
                        int chunk) {
  if (resolution < 1) throw std::invalid_argument("eval_grid: resolution must be positive");
  NoGradGuard no_grad;
  OccupancyGrid g;
  g.grid.d = resolution;
  g.grid.side = m.config().side;
  const auto centers = g.grid.cell_centers();
  const Encoded e = m.encode(images, cams, 1, static_cast<int64_t>(cams.size()));
  g.values.resize(centers.size());
  const size_t step = static_cast<size_t>(std::max(1, chunk));
  for (size_t b = 0; b < centers.size(); b += step) {
    const size_t n = std::min(step, centers.size() - b);
    std::vector<std::vector<Vec3>> pts{std::vector<Vec3>(centers.begin() + static_cast<long>(b),
                                                         centers.begin() + static_cast<long>(b + n))};
    const Tensor p = sigmoid(m.query(e, pts)).value();
    for (size_t i = 0; i < n; ++i) g.values[b + i] = p.at(static_cast<int64_t>(i));
  }
  return g;
}

TriMesh reconstruct(const Model& m, const Tensor& images, const std::vector<Camera>& cams, int resolution,
                    double level) {
  if (!(level > 0 && level < 1)) throw std::invalid_argument("level must lie in (0, 1)");
  MarchingCubesOptions opt;
  opt.close_boundary = true;
  opt.pad_value = 0.0;
  return marching_cubes(eval_grid(m, images, cams, resolution), level, opt);
}

}  // namespace vpf::pipeline
