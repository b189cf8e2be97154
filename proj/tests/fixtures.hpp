#pragma once

#include <random>
#include <vector>

#include "vpf/data.hpp"
#include "vpf/pipeline.hpp"

namespace vpf::tu {

/// The smallest model that exercises every path: d=2, c=8, 8x8 images.
inline pipeline::ModelConfig micro_config(DType dt = DType::f64, Arch arch = Arch::D, uint64_t seed = 3) {
  pipeline::ModelConfig c;
  c.arch = arch;
  c.d = 2;
  c.c = 8;
  c.heads = 2;
  c.ff = 16;
  c.bands = 3;
  c.encoder_widths = {8, 8, 8, 8};
  c.hidden = 16;
  c.pixel_layers = 1;
  c.seed = seed;
  c.dtype = dt;
  return c;
}

inline std::vector<Camera> cameras(int n, int size, uint64_t seed) {
  data::ViewSetup vs;
  vs.views = n;
  vs.image_size = size;
  return data::random_cameras(vs, seed);
}

inline Tensor images(int n, int size, uint64_t seed, DType dt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(static_cast<size_t>(n) * size * size * 3);
  for (auto& x : v) x = u(rng);
  return Tensor::from_values({n, size, size, 3}, v, dt);
}

inline std::vector<Vec3> points(int n, uint64_t seed, double half = 0.55) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> p(static_cast<size_t>(n));
  for (auto& x : p) x = {u(rng), u(rng), u(rng)};
  return p;
}

/// In-memory objects rendered from generated shapes.
inline std::vector<data::Object> objects(int n, int views, int size, uint64_t seed) {
  std::vector<data::Object> out;
  data::ViewSetup vs;
  vs.views = views;
  vs.image_size = size;
  for (int i = 0; i < n; ++i) {
    data::Object o;
    o.id = "mem_" + std::to_string(i);
    o.mesh = data::generate_shape(data::random_spec(seed * 131 + static_cast<uint64_t>(i)));
    o.cams = data::random_cameras(vs, seed * 7 + static_cast<uint64_t>(i));
    for (const auto& c : o.cams) o.images.push_back(data::render(o.mesh, c));
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace vpf::tu
