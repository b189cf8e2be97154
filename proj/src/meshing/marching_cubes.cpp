#include <algorithm>
#include <array>
#include <unordered_map>

#include "vpf/mesh.hpp"

namespace vpf {
namespace {

// Edge e joins two corners differing in one axis bit.
constexpr std::array<std::array<int, 2>, 12> kEdges = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdges[static_cast<size_t>(e)][0] == a && kEdges[static_cast<size_t>(e)][1] == b) ||
        (kEdges[static_cast<size_t>(e)][0] == b && kEdges[static_cast<size_t>(e)][1] == a))
      return e;
  }
  return -1;
}

Vec3 corner_pos(int k) { return {static_cast<double>(k & 1), static_cast<double>(k >> 1 & 1), static_cast<double>(k >> 2 & 1)}; }

// Corners of each face in cyclic order.
std::array<std::array<int, 4>, 6> faces_of_cube() {
  std::array<std::array<int, 4>, 6> out{};
  int f = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int base = side << axis;
      out[static_cast<size_t>(f++)] = {base, base | 1 << u, base | 1 << u | 1 << v, base | 1 << v};
    }
  }
  return out;
}

// Builds the closed edge loops for one configuration. Each face contributes
// segments between its sign-changing edges; on a face with two diagonal
// inside corners each inside corner is cut off on its own. Because the rule
// depends only on the face, neighbouring cells always agree.
std::vector<std::vector<int>> build_loops(int cube) {
  auto inside = [&](int k) { return (cube >> k & 1) != 0; };
  std::array<std::vector<int>, 12> adj;
  for (const auto& f : faces_of_cube()) {
    std::vector<int> cross;
    for (int i = 0; i < 4; ++i) {
      const int a = f[static_cast<size_t>(i)], b = f[static_cast<size_t>((i + 1) % 4)];
      if (inside(a) != inside(b)) cross.push_back(edge_between(a, b));
    }
    auto link = [&](int e0, int e1) {
      adj[static_cast<size_t>(e0)].push_back(e1);
      adj[static_cast<size_t>(e1)].push_back(e0);
    };
    if (cross.size() == 2) {
      link(cross[0], cross[1]);
    } else if (cross.size() == 4) {
      for (int i = 0; i < 4; ++i) {
        const int c = f[static_cast<size_t>(i)];
        if (!inside(c)) continue;
        const int prev = f[static_cast<size_t>((i + 3) % 4)], next = f[static_cast<size_t>((i + 1) % 4)];
        link(edge_between(prev, c), edge_between(c, next));
      }
    }
  }
  std::vector<std::vector<int>> loops;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (used[static_cast<size_t>(start)] || adj[static_cast<size_t>(start)].empty()) continue;
    std::vector<int> loop{start};
    used[static_cast<size_t>(start)] = true;
    int prev = -1, cur = start;
    for (;;) {
      const auto& nb = adj[static_cast<size_t>(cur)];
      const int next = nb[0] != prev ? nb[0] : nb[1];
      if (next == start) break;
      loop.push_back(next);
      used[static_cast<size_t>(next)] = true;
      prev = cur;
      cur = next;
    }
    // Orient so the loop normal points from inside corners to outside ones.
    Vec3 n{}, ref{};
    for (size_t i = 0; i < loop.size(); ++i) {
      const auto& e = kEdges[static_cast<size_t>(loop[i])];
      const Vec3 p = 0.5 * (corner_pos(e[0]) + corner_pos(e[1]));
      const auto& e2 = kEdges[static_cast<size_t>(loop[(i + 1) % loop.size()])];
      const Vec3 q = 0.5 * (corner_pos(e2[0]) + corner_pos(e2[1]));
      n = n + cross(p, q);
      const Vec3 in = inside(e[0]) ? corner_pos(e[0]) : corner_pos(e[1]);
      const Vec3 out = inside(e[0]) ? corner_pos(e[1]) : corner_pos(e[0]);
      ref = ref + (out - in);
    }
    if (dot(n, ref) < 0) std::reverse(loop.begin(), loop.end());
    loops.push_back(std::move(loop));
  }
  return loops;
}

const std::array<std::vector<std::vector<int>>, 256>& table() {
  static const auto t = [] {
    std::array<std::vector<std::vector<int>>, 256> out;
    for (int c = 0; c < 256; ++c) out[static_cast<size_t>(c)] = build_loops(c);
    return out;
  }();
  return t;
}

}  // namespace

const std::vector<std::vector<int>>& mc_case_loops(int cube_index) {
  return table().at(static_cast<size_t>(cube_index));
}

std::array<int, 2> cube_edge_corners(int edge) { return kEdges.at(static_cast<size_t>(edge)); }

TriMesh marching_cubes(const OccupancyGrid& g, double level, const MarchingCubesOptions& opt) {
  const int r = g.grid.d;
  if (static_cast<int64_t>(g.values.size()) != static_cast<int64_t>(r) * r * r) {
    throw std::invalid_argument("marching cubes: " + std::to_string(g.values.size()) + " values for R=" +
                                std::to_string(r));
  }
  const int pad = opt.close_boundary ? 1 : 0;
  const int n = r + 2 * pad;  // lattice points per axis
  const double step = g.grid.side / r;
  const Vec3 origin = g.grid.cell_center(0, 0, 0) - Vec3{pad * step, pad * step, pad * step};
  auto value = [&](int i, int j, int k) {
    i -= pad, j -= pad, k -= pad;
    if (i < 0 || j < 0 || k < 0 || i >= r || j >= r || k >= r) return opt.pad_value;
    return g.values[(static_cast<size_t>(i) * r + static_cast<size_t>(j)) * r + static_cast<size_t>(k)];
  };
  auto lattice_id = [&](int i, int j, int k) { return (static_cast<int64_t>(i) * n + j) * n + k; };

  TriMesh m;
  std::unordered_map<int64_t, int> vertex_of_edge;
  const auto& tab = table();
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      for (int k = 0; k + 1 < n; ++k) {
        double v[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          v[c] = value(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1));
          if (v[c] >= level) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        int ids[12];
        std::fill(std::begin(ids), std::end(ids), -1);
        for (const auto& loop : tab[static_cast<size_t>(cube)]) {
          for (int e : loop) {
            if (ids[e] >= 0) continue;
            const auto [a, b] = kEdges[static_cast<size_t>(e)];
            const int ai = i + (a & 1), aj = j + (a >> 1 & 1), ak = k + (a >> 2 & 1);
            const int axis = e / 4;
            const int64_t key = lattice_id(ai, aj, ak) * 3 + axis;
            auto it = vertex_of_edge.find(key);
            if (it != vertex_of_edge.end()) {
              ids[e] = it->second;
              continue;
            }
            const double t = std::clamp((level - v[a]) / (v[b] - v[a]), 1e-7, 1.0 - 1e-7);
            Vec3 p{origin.x + ai * step, origin.y + aj * step, origin.z + ak * step};
            p[axis] += t * step;
            ids[e] = static_cast<int>(m.vertices.size());
            vertex_of_edge.emplace(key, ids[e]);
            m.vertices.push_back(p);
          }
          for (size_t t = 1; t + 1 < loop.size(); ++t) {
            std::array<int, 3> f{ids[loop[0]], ids[loop[t]], ids[loop[t + 1]]};
            m.faces.push_back(f);
            if (m.face_area(m.faces.size() - 1) <= 0.0) m.faces.pop_back();
          }
        }
      }
    }
  }
  m.compute_normals();
  return m;
}

}  // namespace vpf
