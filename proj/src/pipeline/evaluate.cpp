#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vpf/pipeline.hpp"

namespace vpf::pipeline {
namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::vector<int> pick_views(int available, int n, uint64_t seed) {
  if (n < 1 || n > available) {
    throw std::invalid_argument("cannot pick " + std::to_string(n) + " of " + std::to_string(available) + " views");
  }
  std::vector<int> all(static_cast<size_t>(available));
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = available - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(pick(rng))]);
  }
  all.resize(static_cast<size_t>(n));
  return all;
}

std::vector<metrics::MetricReport> evaluate_objects(const Model& m, const std::vector<data::Object>& objects,
                                                    int views, const EvalOptions& o) {
  std::vector<metrics::MetricReport> out;
  out.reserve(objects.size());
  for (const auto& obj : objects) {
    const auto ids = pick_views(static_cast<int>(obj.images.size()), views, o.seed ^ fnv1a(obj.id));
    std::vector<const data::Image*> imgs;
    std::vector<Camera> cams;
    for (int i : ids) {
      imgs.push_back(&obj.images[static_cast<size_t>(i)]);
      cams.push_back(obj.cams[static_cast<size_t>(i)]);
    }
    const ViewInput in = canonical_views(imgs, cams, m.config().dtype);
    const TriMesh pred = reconstruct(m, in.images, in.cams, o.resolution, o.level);
    auto r = metrics::evaluate(pred, obj.mesh, o.samples, o.seed, o.workers);
    r.object_id = obj.id;
    r.n_views = views;
    out.push_back(std::move(r));
  }
  return out;
}

metrics::MetricReport mean_report(const std::vector<metrics::MetricReport>& rows, const std::string& label) {
  metrics::MetricReport m;
  m.object_id = label;
  if (rows.empty()) return m;
  m.n_views = rows.front().n_views;
  m.sample_count = rows.front().sample_count;
  m.seed = rows.front().seed;
  for (const auto& r : rows) {
    m.iou += r.iou;
    m.chamfer_l1 += r.chamfer_l1;
    m.normal_consistency += r.normal_consistency;
    m.empty_prediction = m.empty_prediction || r.empty_prediction;
  }
  const double n = static_cast<double>(rows.size());
  m.iou /= n;
  m.chamfer_l1 = m.empty_prediction ? std::numeric_limits<double>::infinity() : m.chamfer_l1 / n;
  m.normal_consistency /= n;
  return m;
}

}  // namespace vpf::pipeline
