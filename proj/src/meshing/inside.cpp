#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "vpf/mesh.hpp"

namespace vpf {

struct InsideTester::Impl {
  struct Tri {
    Vec3 a, e1, e2;
  };
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // children, or -1 for a leaf
    int begin = 0, end = 0;     // triangle range for leaves
  };
  std::vector<Tri> tris;
  std::vector<Node> nodes;
  Vec3 lo, hi;
  uint64_t seed;

  enum class Hit { none, hit, graze, surface };
  static constexpr double kEdge = 1e-9;

  int build(std::vector<int>& order, std::vector<Vec3>& cent, const std::vector<Vec3>& tlo,
            const std::vector<Vec3>& thi, int begin, int end) {
    Node n;
    n.lo = {1e300, 1e300, 1e300};
    n.hi = {-1e300, -1e300, -1e300};
    for (int i = begin; i < end; ++i) {
      for (int a = 0; a < 3; ++a) {
        n.lo[a] = std::min(n.lo[a], tlo[static_cast<size_t>(order[static_cast<size_t>(i)])][a]);
        n.hi[a] = std::max(n.hi[a], thi[static_cast<size_t>(order[static_cast<size_t>(i)])][a]);
      }
    }
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(n);
    if (end - begin <= 4) {
      nodes[static_cast<size_t>(id)].begin = begin;
      nodes[static_cast<size_t>(id)].end = end;
      return id;
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (n.hi[a] - n.lo[a] > n.hi[axis] - n.lo[axis]) axis = a;
    }
    const int mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](int x, int y) { return cent[static_cast<size_t>(x)][axis] < cent[static_cast<size_t>(y)][axis]; });
    const int l = build(order, cent, tlo, thi, begin, mid);
    const int r = build(order, cent, tlo, thi, mid, end);
    nodes[static_cast<size_t>(id)].left = l;
    nodes[static_cast<size_t>(id)].right = r;
    return id;
  }

  static bool slab(const Node& n, Vec3 o, Vec3 inv) {
    double t0 = 0, t1 = 1e300;
    for (int a = 0; a < 3; ++a) {
      double ta = (n.lo[a] - o[a]) * inv[a], tb = (n.hi[a] - o[a]) * inv[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  // Moller-Trumbore. Reports grazing when the ray is nearly parallel to the
  // triangle or passes within a tiny margin of an edge or vertex, and
  // `surface` when the origin itself lies on the triangle.
  static Hit intersect(const Tri& t, Vec3 o, Vec3 d) {
    constexpr double kEps = 1e-12;
    const Vec3 p = cross(d, t.e2);
    const double det = dot(t.e1, p);
    const double scale = norm(t.e1) * norm(t.e2);
    if (std::abs(det) < kEps * scale) {
      // Parallel: only a problem if the ray lies in the triangle's plane.
      const Vec3 nrm = cross(t.e1, t.e2);
      return std::abs(dot(o - t.a, nrm)) < kEps * scale ? Hit::graze : Hit::none;
    }
    const double inv = 1.0 / det;
    const Vec3 s = o - t.a;
    const double u = dot(s, p) * inv;
    if (u < -kEdge || u > 1 + kEdge) return Hit::none;
    const Vec3 q = cross(s, t.e1);
    const double v = dot(d, q) * inv;
    if (v < -kEdge || u + v > 1 + kEdge) return Hit::none;
    const double dist = dot(t.e2, q) * inv;
    if (dist < -kEdge) return Hit::none;
    if (dist < kEdge) return Hit::surface;
    if (u < kEdge || v < kEdge || u + v > 1 - kEdge) return Hit::graze;
    return Hit::hit;
  }

  // Parity of crossings, -1 if the ray grazes, 2 if o is on the surface.
  int cast(Vec3 o, Vec3 d) const {
    if (nodes.empty()) return 0;
    const Vec3 inv{1.0 / d.x, 1.0 / d.y, 1.0 / d.z};
    int count = 0;
    std::vector<int> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
      const Node& n = nodes[static_cast<size_t>(stack.back())];
      stack.pop_back();
      if (!slab(n, o, inv)) continue;
      if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
          const Hit h = intersect(tris[static_cast<size_t>(i)], o, d);
          if (h == Hit::surface) return 2;
          if (h == Hit::graze) return -1;
          if (h == Hit::hit) ++count;
        }
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return count & 1;
  }
};

InsideTester::InsideTester(const TriMesh& mesh, uint64_t seed) : impl_(std::make_unique<Impl>()) {
  mesh.validate();
  impl_->seed = seed;
  const size_t nf = mesh.faces.size();
  std::vector<Impl::Tri> raw(nf);
  std::vector<Vec3> cent(nf), tlo(nf), thi(nf);
  for (size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    const Vec3 a = mesh.vertices[static_cast<size_t>(t[0])], b = mesh.vertices[static_cast<size_t>(t[1])],
               c = mesh.vertices[static_cast<size_t>(t[2])];
    raw[f] = {a, b - a, c - a};
    cent[f] = (1.0 / 3.0) * (a + b + c);
    for (int ax = 0; ax < 3; ++ax) {
      tlo[f][ax] = std::min({a[ax], b[ax], c[ax]});
      thi[f][ax] = std::max({a[ax], b[ax], c[ax]});
    }
  }
  std::vector<int> order(nf);
  std::iota(order.begin(), order.end(), 0);
  if (nf > 0) impl_->build(order, cent, tlo, thi, 0, static_cast<int>(nf));
  impl_->tris.resize(nf);
  for (size_t i = 0; i < nf; ++i) impl_->tris[i] = raw[static_cast<size_t>(order[i])];
  if (nf > 0) {
    impl_->lo = impl_->nodes[0].lo;
    impl_->hi = impl_->nodes[0].hi;
  }
}

InsideTester::~InsideTester() = default;
InsideTester::InsideTester(InsideTester&&) noexcept = default;
InsideTester& InsideTester::operator=(InsideTester&&) noexcept = default;

Vec3 InsideTester::lo() const { return impl_->lo; }
Vec3 InsideTester::hi() const { return impl_->hi; }

bool InsideTester::inside(Vec3 p) const {
  if (impl_->tris.empty()) return false;
  for (int a = 0; a < 3; ++a) {
    if (p[a] < impl_->lo[a] - Impl::kEdge || p[a] > impl_->hi[a] + Impl::kEdge) return false;
  }
  // Directions depend only on the seed and the point, so answers are
  // reproducible regardless of query order.
  uint64_t h = impl_->seed;
  for (int a = 0; a < 3; ++a) {
    uint64_t bits;
    std::memcpy(&bits, &p[a], sizeof bits);
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  std::mt19937_64 rng(h);
  std::normal_distribution<double> g;
  int votes[2] = {0, 0};
  int attempts = 0;
  while (votes[0] + votes[1] < 3) {
    if (++attempts > 64) throw NonWatertight("point-in-mesh: every ray grazes the mesh");
    const Vec3 d = normalized(Vec3{g(rng), g(rng), g(rng)});
    const int parity = impl_->cast(p, d);
    if (parity == 2) return true;  // on the surface counts as inside
    if (parity >= 0) ++votes[parity];
  }
  if (votes[0] != 0 && votes[1] != 0) {
    throw NonWatertight("point-in-mesh: ray parities disagree; mesh is not watertight");
  }
  return votes[1] == 3;
}

bool point_in_mesh(const TriMesh& mesh, Vec3 p) { return InsideTester(mesh).inside(p); }

}  // namespace vpf
