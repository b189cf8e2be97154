#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "vpf/data.hpp"

namespace vpf::data {
namespace {

void orient_outward(TriMesh& m) {
  if (m.volume() < 0) m.flip_orientation();
}

// Surface of revolution about z: rings of (radius, z) from top to bottom,
// closed by a pole at each end.
TriMesh lathe(const std::vector<std::pair<double, double>>& rings, double z_top, double z_bottom, int segments) {
  TriMesh m;
  m.vertices.push_back({0, 0, z_top});
  for (const auto& [r, z] : rings) {
    for (int i = 0; i < segments; ++i) {
      const double a = 2 * std::numbers::pi * i / segments;
      m.vertices.push_back({r * std::cos(a), r * std::sin(a), z});
    }
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.push_back({0, 0, z_bottom});
  auto ring = [&](int k, int i) { return 1 + k * segments + (i % segments); };
  const int nr = static_cast<int>(rings.size());
  for (int i = 0; i < segments; ++i) {
    m.faces.push_back({0, ring(0, i), ring(0, i + 1)});
    for (int k = 0; k + 1 < nr; ++k) {
      m.faces.push_back({ring(k, i), ring(k + 1, i), ring(k + 1, i + 1)});
      m.faces.push_back({ring(k, i), ring(k + 1, i + 1), ring(k, i + 1)});
    }
    m.faces.push_back({bottom, ring(nr - 1, i + 1), ring(nr - 1, i)});
  }
  orient_outward(m);
  m.compute_normals();
  return m;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double q[4];
  double n = 0;
  for (double& v : q) {
    v = g(rng);
    n += v * v;
  }
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Vec3 apply(const Mat3& r, Vec3 p) {
  return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z, r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
          r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z};
}

Vec3 apply_t(const Mat3& r, Vec3 p) {
  return {r[0][0] * p.x + r[1][0] * p.y + r[2][0] * p.z, r[0][1] * p.x + r[1][1] * p.y + r[2][1] * p.z,
          r[0][2] * p.x + r[1][2] * p.y + r[2][2] * p.z};
}

double sdf_local(const ShapeSpec& s, Vec3 p) {
  const auto& q = s.params;
  switch (s.family) {
    case Family::box: {
      const Vec3 d{std::abs(p.x) - q[0], std::abs(p.y) - q[1], std::abs(p.z) - q[2]};
      const Vec3 o{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
      return norm(o) + std::min(std::max({d.x, d.y, d.z}), 0.0);
    }
    case Family::ellipsoid: {
      const double k0 = norm({p.x / q[0], p.y / q[1], p.z / q[2]});
      const double k1 = norm({p.x / (q[0] * q[0]), p.y / (q[1] * q[1]), p.z / (q[2] * q[2])});
      return k1 > 0 ? k0 * (k0 - 1.0) / k1 : -std::min({q[0], q[1], q[2]});
    }
    case Family::cylinder: {
      const double dx = std::hypot(p.x, p.y) - q[0], dz = std::abs(p.z) - q[1];
      return std::min(std::max(dx, dz), 0.0) + std::hypot(std::max(dx, 0.0), std::max(dz, 0.0));
    }
    case Family::capsule: {
      const double z = std::clamp(p.z, -q[1], q[1]);
      return norm({p.x, p.y, p.z - z}) - q[0];
    }
    case Family::union2:
      break;
  }
  throw std::invalid_argument("sdf of a union is not defined locally");
}

double sdf(const ShapeSpec& s, Vec3 p) { return sdf_local(s, apply_t(s.rotation, p - s.translation)); }

int components(const TriMesh& m) {
  std::vector<int> parent(m.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) x = parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
    return x;
  };
  for (const auto& f : m.faces) {
    parent[static_cast<size_t>(find(f[0]))] = find(f[1]);
    parent[static_cast<size_t>(find(f[1]))] = find(f[2]);
  }
  std::vector<bool> root(m.vertices.size(), false);
  int n = 0;
  for (const auto& f : m.faces) {
    const int r = find(f[0]);
    if (!root[static_cast<size_t>(r)]) {
      root[static_cast<size_t>(r)] = true;
      ++n;
    }
  }
  return n;
}

TriMesh primitive(const ShapeSpec& s) {
  const auto& q = s.params;
  switch (s.family) {
    case Family::box:
      return make_box(q.at(0), q.at(1), q.at(2));
    case Family::ellipsoid:
      return make_ellipsoid(q.at(0), q.at(1), q.at(2), 3);
    case Family::cylinder:
      return make_cylinder(q.at(0), q.at(1), 48);
    case Family::capsule:
      return make_capsule(q.at(0), q.at(1), 48, 12);
    case Family::union2:
      break;
  }
  throw std::logic_error("primitive() on a union");
}

TriMesh union_mesh(const ShapeSpec& s) {
  const auto& a = s.parts.at(0);
  const auto& b = s.parts.at(1);
  // Bounds from the posed part meshes.
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto* p : {&a, &b}) {
    TriMesh m = primitive(*p);
    for (auto& v : m.vertices) {
      const Vec3 w = apply(p->rotation, v) + p->translation;
      for (int ax = 0; ax < 3; ++ax) {
        lo[ax] = std::min(lo[ax], w[ax]);
        hi[ax] = std::max(hi[ax], w[ax]);
      }
    }
  }
  OccupancyGrid g;
  g.grid.d = 72;
  g.grid.center = 0.5 * (lo + hi);
  g.grid.side = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}) * 1.1;
  const auto centers = g.grid.cell_centers();
  g.values.resize(centers.size());
  for (size_t i = 0; i < centers.size(); ++i) g.values[i] = -std::min(sdf(a, centers[i]), sdf(b, centers[i]));
  MarchingCubesOptions opt;
  opt.close_boundary = true;
  opt.pad_value = -1.0;
  return marching_cubes(g, 0.0, opt);
}

void normalize_unit(TriMesh& m) {
  Vec3 lo, hi;
  m.bounds(lo, hi);
  const Vec3 c = 0.5 * (lo + hi);
  const double edge = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  for (auto& v : m.vertices) v = (1.0 / edge) * (v - c);
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::box:
      return "box";
    case Family::ellipsoid:
      return "ellipsoid";
    case Family::cylinder:
      return "cylinder";
    case Family::capsule:
      return "capsule";
    case Family::union2:
      return "union2";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::box, Family::ellipsoid, Family::cylinder, Family::capsule, Family::union2}) {
    if (family_name(f) == s) return f;
  }
  throw std::invalid_argument("unknown shape family " + s);
}

TriMesh make_box(double hx, double hy, double hz) {
  TriMesh m;
  for (int k = 0; k < 8; ++k) m.vertices.push_back({k & 1 ? hx : -hx, k & 2 ? hy : -hy, k & 4 ? hz : -hz});
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int b = side << axis;
      std::array<int, 4> q{b, b | 1 << u, b | 1 << u | 1 << v, b | 1 << v};  // normal +axis
      if (side == 0) std::reverse(q.begin(), q.end());
      m.faces.push_back({q[0], q[1], q[2]});
      m.faces.push_back({q[0], q[2], q[3]});
    }
  }
  m.compute_normals();
  return m;
}

TriMesh make_icosphere(int subdivisions) {
  const double t = (1 + std::sqrt(5.0)) / 2;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v = normalized(v);
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int id = static_cast<int>(m.vertices.size());
      m.vertices.push_back(normalized(0.5 * (m.vertices[static_cast<size_t>(a)] + m.vertices[static_cast<size_t>(b)])));
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& f : m.faces) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.faces = std::move(next);
  }
  orient_outward(m);
  m.compute_normals();
  return m;
}

TriMesh make_ellipsoid(double a, double b, double c, int subdivisions) {
  TriMesh m = make_icosphere(subdivisions);
  for (auto& v : m.vertices) v = {a * v.x, b * v.y, c * v.z};
  m.compute_normals();
  return m;
}

TriMesh make_cylinder(double r, double half_h, int segments) {
  return lathe({{r, half_h}, {r, -half_h}}, half_h, -half_h, segments);
}

TriMesh make_capsule(double r, double half_len, int segments, int rings) {
  std::vector<std::pair<double, double>> prof;
  for (int k = 1; k <= rings; ++k) {
    const double phi = std::numbers::pi / 2 * (1.0 - static_cast<double>(k) / rings);
    prof.emplace_back(r * std::cos(phi), half_len + r * std::sin(phi));
  }
  for (int k = 0; k < rings; ++k) {
    const double phi = -std::numbers::pi / 2 * static_cast<double>(k) / rings;
    prof.emplace_back(r * std::cos(phi), -half_len + r * std::sin(phi));
  }
  return lathe(prof, half_len + r, -half_len - r, segments);
}

ShapeSpec random_spec(Family f, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  ShapeSpec s;
  s.family = f;
  s.seed = seed;
  switch (f) {
    case Family::box:
      s.params = {range(0.15, 0.5), range(0.15, 0.5), range(0.15, 0.5)};
      break;
    case Family::ellipsoid:
      s.params = {range(0.15, 0.5), range(0.15, 0.5), range(0.15, 0.5)};
      break;
    case Family::cylinder:
      s.params = {range(0.12, 0.4), range(0.15, 0.5)};
      break;
    case Family::capsule:
      s.params = {range(0.1, 0.3), range(0.1, 0.4)};
      break;
    case Family::union2: {
      const Family base[4] = {Family::box, Family::ellipsoid, Family::cylinder, Family::capsule};
      for (int i = 0; i < 2; ++i) {
        ShapeSpec p = random_spec(base[rng() % 4], rng());
        p.translation = {range(-0.25, 0.25), range(-0.25, 0.25), range(-0.25, 0.25)};
        p.normalize = false;
        s.parts.push_back(p);
      }
      break;
    }
  }
  if (f != Family::union2) s.rotation = random_rotation(rng);
  return s;
}

ShapeSpec random_spec(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xf00dULL);
  return random_spec(static_cast<Family>(rng() % 5), seed);
}

TriMesh generate_shape(const ShapeSpec& spec) {
  TriMesh m;
  if (spec.family == Family::union2) {
    ShapeSpec s = spec;
    for (int attempt = 0;; ++attempt) {
      m = union_mesh(s);
      if (!m.empty() && components(m) == 1) break;
      if (attempt > 32) throw std::runtime_error("union2: could not draw touching parts");
      s = random_spec(Family::union2, spec.seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(attempt + 1));
    }
  } else {
    m = primitive(spec);
    for (auto& v : m.vertices) v = apply(spec.rotation, v) + spec.translation;
  }
  if (spec.normalize) normalize_unit(m);
  m.compute_normals();
  return m;
}

bool watertight_self_check(const TriMesh& m, uint64_t seed) {
  if (m.empty() || !is_closed_manifold(m)) return false;
  try {
    InsideTester t(m, seed);
    std::mt19937_64 rng(seed);
    Vec3 lo, hi;
    m.bounds(lo, hi);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 64; ++i) {
      t.inside({lo.x + (hi.x - lo.x) * u(rng), lo.y + (hi.y - lo.y) * u(rng), lo.z + (hi.z - lo.z) * u(rng)});
    }
  } catch (const NonWatertight&) {
    return false;
  }
  return true;
}

}  // namespace vpf::data
