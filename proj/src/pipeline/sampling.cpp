#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vpf/pipeline.hpp"

namespace vpf::pipeline {

int uniform_count(const PointSamplingOptions& o) {
  if (o.count < 1 || o.uniform_parts < 0 || o.surface_parts < 0 || o.uniform_parts + o.surface_parts == 0) {
    throw std::invalid_argument("point sampling: count must be positive and the ratio non-degenerate");
  }
  const int64_t num = static_cast<int64_t>(o.count) * o.uniform_parts;
  const int64_t den = o.uniform_parts + o.surface_parts;
  return static_cast<int>((num + den - 1) / den);
}

PointSampler::PointSampler(const TriMesh& mesh, uint64_t seed) : mesh_(&mesh), tester_(mesh, seed) {
  if (mesh.empty() || !is_closed_manifold(mesh)) throw NonWatertight("point sampling needs a watertight mesh");
  cdf_.resize(mesh.faces.size());
  double acc = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) cdf_[f] = acc += mesh.face_area(f);
}

PointBatch PointSampler::sample(const PointSamplingOptions& o, std::mt19937_64& rng) const {
  const int nu = uniform_count(o);
  if (o.sigma < 0 || !(o.side > 0)) throw std::invalid_argument("point sampling: sigma >= 0 and side > 0");
  PointBatch b;
  b.points.reserve(static_cast<size_t>(o.count));
  b.labels.reserve(static_cast<size_t>(o.count));
  std::uniform_real_distribution<double> cube(-0.5 * o.side, 0.5 * o.side), u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < nu; ++i) {
    const Vec3 p{cube(rng), cube(rng), cube(rng)};
    b.points.push_back(p);
    b.labels.push_back(tester_.inside(p) ? 1.0 : 0.0);
  }
  const double half = 0.5 * o.side;
  for (int i = nu; i < o.count; ++i) {
    const double r = u(rng) * cdf_.back();
    const size_t f =
        std::min(cdf_.size() - 1, static_cast<size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), r) - cdf_.begin()));
    const double a = std::sqrt(u(rng)), c = u(rng);
    const auto& t = mesh_->faces[f];
    Vec3 p = (1 - a) * mesh_->vertices[static_cast<size_t>(t[0])] +
             (a * (1 - c)) * mesh_->vertices[static_cast<size_t>(t[1])] +
             (a * c) * mesh_->vertices[static_cast<size_t>(t[2])];
    if (o.sigma == 0) {
      b.points.push_back(p);
      b.labels.push_back(1.0);  // on the surface counts as inside
      continue;
    }
    p = p + o.sigma * Vec3{noise(rng), noise(rng), noise(rng)};
    for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k], -half, half);
    b.points.push_back(p);
    b.labels.push_back(tester_.inside(p) ? 1.0 : 0.0);
  }
  return b;
}

PointBatch sample_points(const TriMesh& mesh, const PointSamplingOptions& o, uint64_t seed) {
  const PointSampler s(mesh, seed);
  std::mt19937_64 rng(seed);
  return s.sample(o, rng);
}

}  // namespace vpf::pipeline
