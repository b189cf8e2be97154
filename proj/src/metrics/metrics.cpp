#include "vpf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vpf/parallel.hpp"

namespace vpf::metrics {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, idx.size(), 0);
}

int KdTree::build(std::vector<int>& idx, size_t lo, size_t hi, int depth) {
  if (lo >= hi) return -1;
  // Split on the axis of widest spread.
  Vec3 mn{1e300, 1e300, 1e300}, mx{-1e300, -1e300, -1e300};
  for (size_t i = lo; i < hi; ++i) {
    const Vec3& p = points_[static_cast<size_t>(idx[i])];
    for (int a = 0; a < 3; ++a) {
      mn[a] = std::min(mn[a], p[a]);
      mx[a] = std::max(mx[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;
  }
  const size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(mid),
                   idx.begin() + static_cast<long>(hi), [&](int a, int b) {
                     const double pa = points_[static_cast<size_t>(a)][axis], pb = points_[static_cast<size_t>(b)][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[mid], axis, -1, -1});
  const int l = build(idx, lo, mid, depth + 1);
  const int r = build(idx, mid + 1, hi, depth + 1);
  nodes_[static_cast<size_t>(id)].left = l;
  nodes_[static_cast<size_t>(id)].right = r;
  return id;
}

void KdTree::search(int node, Vec3 q, int& best, double& best_d2) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<size_t>(node)];
  const Vec3& p = points_[static_cast<size_t>(n.point)];
  const Vec3 d = q - p;
  const double d2 = dot(d, d);
  if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
    best_d2 = d2;
    best = n.point;
  }
  const double delta = q[n.axis] - p[n.axis];
  const int near = delta < 0 ? n.left : n.right;
  const int far = delta < 0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (delta * delta <= best_d2) search(far, q, best, best_d2);
}

int KdTree::nearest(Vec3 q, double* dist2) const {
  if (root_ < 0) throw std::logic_error("nearest() on an empty tree");
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, q, best, best_d2);
  if (dist2) *dist2 = best_d2;
  return best;
}

SurfaceSamples sample_surface(const TriMesh& m, int n, uint64_t seed) {
  SurfaceSamples s;
  if (m.empty() || n <= 0) return s;
  std::vector<double> cdf(m.faces.size());
  double acc = 0;
  for (size_t f = 0; f < m.faces.size(); ++f) cdf[f] = acc += m.face_area(f);
  if (!(acc > 0)) return s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  s.points.reserve(static_cast<size_t>(n));
  s.normals.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double r = u(rng) * acc;
    const size_t f = std::min(cdf.size() - 1, static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin()));
    const double a = std::sqrt(u(rng)), b = u(rng);
    const auto& t = m.faces[f];
    const Vec3& p0 = m.vertices[static_cast<size_t>(t[0])];
    const Vec3& p1 = m.vertices[static_cast<size_t>(t[1])];
    const Vec3& p2 = m.vertices[static_cast<size_t>(t[2])];
    s.points.push_back((1 - a) * p0 + (a * (1 - b)) * p1 + (a * b) * p2);
    s.normals.push_back(m.face_normal(f));
  }
  return s;
}

double volumetric_iou(const TriMesh& pred, const TriMesh& gt, int n, uint64_t seed, int workers) {
  if (n <= 0) throw std::invalid_argument("iou needs a positive sample count");
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const TriMesh* m : {&pred, &gt}) {
    if (m->empty()) continue;
    Vec3 a, b;
    m->bounds(a, b);
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], a[k]);
      hi[k] = std::max(hi[k], b[k]);
    }
  }
  if (lo.x > hi.x) throw std::domain_error("iou: both meshes are empty");
  const Vec3 c = 0.5 * (lo + hi), half = 0.5 * 1.05 * (hi - lo);
  const InsideTester tp(pred, seed ^ 0x1111), tg(gt, seed ^ 0x2222);
  std::vector<Vec3> pts(static_cast<size_t>(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& p : pts) p = {c.x + half.x * u(rng), c.y + half.y * u(rng), c.z + half.z * u(rng)};
  std::vector<unsigned char> in_p(pts.size()), in_g(pts.size());
  parallel_for(pts.size(), workers, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      in_p[i] = tp.inside(pts[i]);
      in_g[i] = tg.inside(pts[i]);
    }
  });
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    inter += in_p[i] && in_g[i];
    uni += in_p[i] || in_g[i];
  }
  if (uni == 0) throw std::domain_error("iou: no sample fell inside either mesh");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct Directed {
  double mean_dist = 0;
  double mean_abs_dot = 0;
};

Directed directed(const SurfaceSamples& from, const SurfaceSamples& to, const KdTree& tree, int workers) {
  std::vector<double> dist(from.points.size()), dots(from.points.size());
  parallel_for(from.points.size(), workers, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      double d2 = 0;
      const int j = tree.nearest(from.points[i], &d2);
      dist[i] = std::sqrt(d2);
      dots[i] = std::abs(dot(from.normals[i], to.normals[static_cast<size_t>(j)]));
    }
  });
  Directed r;
  for (size_t i = 0; i < dist.size(); ++i) {
    r.mean_dist += dist[i];
    r.mean_abs_dot += dots[i];
  }
  r.mean_dist /= static_cast<double>(dist.size());
  r.mean_abs_dot /= static_cast<double>(dist.size());
  return r;
}

double chamfer_unit(const TriMesh& gt) {
  Vec3 lo, hi;
  gt.bounds(lo, hi);
  const double edge = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(edge > 0)) throw std::domain_error("chamfer: ground truth has a degenerate bounding box");
  return edge / 10.0;
}

struct Both {
  Directed pg, gp;
};

Both both_directions(const TriMesh& pred, const TriMesh& gt, int n, uint64_t seed, int workers) {
  // Same stream for both, so identical meshes give identical samples.
  const SurfaceSamples sp = sample_surface(pred, n, seed);
  const SurfaceSamples sg = sample_surface(gt, n, seed);
  const KdTree tp(sp.points), tg(sg.points);
  return {directed(sp, sg, tg, workers), directed(sg, sp, tp, workers)};
}

}  // namespace

ChamferResult chamfer_l1(const TriMesh& pred, const TriMesh& gt, int n, uint64_t seed, int workers) {
  if (gt.empty()) throw std::invalid_argument("chamfer: ground truth mesh is empty");
  if (n <= 0) throw std::invalid_argument("chamfer needs a positive sample count");
  ChamferResult r;
  if (pred.empty()) {
    r.empty_prediction = true;
    r.value = r.accuracy = r.completeness = std::numeric_limits<double>::infinity();
    return r;
  }
  const double unit = chamfer_unit(gt);
  const Both b = both_directions(pred, gt, n, seed, workers);
  r.accuracy = b.pg.mean_dist / unit;
  r.completeness = b.gp.mean_dist / unit;
  r.value = 0.5 * (r.accuracy + r.completeness);
  return r;
}

double normal_consistency(const TriMesh& pred, const TriMesh& gt, int n, uint64_t seed, int workers) {
  if (gt.empty()) throw std::invalid_argument("normal consistency: ground truth mesh is empty");
  if (pred.empty()) return 0.0;
  const Both b = both_directions(pred, gt, n, seed, workers);
  return 0.5 * (b.pg.mean_abs_dot + b.gp.mean_abs_dot);
}

MetricReport evaluate(const TriMesh& pred, const TriMesh& gt, int n, uint64_t seed, int workers) {
  MetricReport r;
  r.sample_count = n;
  r.seed = seed;
  r.iou = pred.empty() ? 0.0 : volumetric_iou(pred, gt, n, seed, workers);
  if (pred.empty()) {
    r.empty_prediction = true;
    r.chamfer_l1 = std::numeric_limits<double>::infinity();
    return r;
  }
  const double unit = chamfer_unit(gt);
  const Both b = both_directions(pred, gt, n, seed, workers);
  r.chamfer_l1 = 0.5 * (b.pg.mean_dist + b.gp.mean_dist) / unit;
  r.normal_consistency = 0.5 * (b.pg.mean_abs_dot + b.gp.mean_abs_dot);
  return r;
}

std::string report_json(const MetricReport& r) {
  nlohmann::json j{{"object_id", r.object_id},
                   {"n_views", r.n_views},
                   {"iou", r.iou},
                   {"normal_consistency", r.normal_consistency},
                   {"empty_prediction", r.empty_prediction},
                   {"sample_count", r.sample_count},
                   {"seed", r.seed}};
  if (r.empty_prediction) {
    j["chamfer_l1"] = nullptr;
  } else {
    j["chamfer_l1"] = r.chamfer_l1;
  }
  return j.dump();
}

std::string report_table(const std::vector<MetricReport>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %7s %8s %10s %8s\n", "object_id", "n_views", "iou", "chamfer_l1", "normal_c");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %7d %8.4f %10.4f %8.4f\n", r.object_id.c_str(), r.n_views, r.iou,
                  r.chamfer_l1, r.normal_consistency);
    out << line;
  }
  return out.str();
}

}  // namespace vpf::metrics
