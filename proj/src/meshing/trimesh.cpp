#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "vpf/mesh.hpp"

namespace vpf {

Vec3 TriMesh::face_normal(size_t f) const {
  const auto& t = faces[f];
  const Vec3 a = vertices[static_cast<size_t>(t[0])], b = vertices[static_cast<size_t>(t[1])],
             c = vertices[static_cast<size_t>(t[2])];
  return normalized(cross(b - a, c - a));
}

double TriMesh::face_area(size_t f) const {
  const auto& t = faces[f];
  const Vec3 a = vertices[static_cast<size_t>(t[0])], b = vertices[static_cast<size_t>(t[1])],
             c = vertices[static_cast<size_t>(t[2])];
  return 0.5 * norm(cross(b - a, c - a));
}

void TriMesh::compute_normals() {
  normals.assign(vertices.size(), Vec3{});
  for (const auto& t : faces) {
    const Vec3 a = vertices[static_cast<size_t>(t[0])], b = vertices[static_cast<size_t>(t[1])],
               c = vertices[static_cast<size_t>(t[2])];
    const Vec3 n = cross(b - a, c - a);  // length = 2 * area
    for (int i : t) normals[static_cast<size_t>(i)] = normals[static_cast<size_t>(i)] + n;
  }
  for (auto& n : normals) n = normalized(n);
}

double TriMesh::area() const {
  double s = 0;
  for (size_t f = 0; f < faces.size(); ++f) s += face_area(f);
  return s;
}

double TriMesh::volume() const {
  double s = 0;
  for (const auto& t : faces) {
    s += dot(vertices[static_cast<size_t>(t[0])],
             cross(vertices[static_cast<size_t>(t[1])], vertices[static_cast<size_t>(t[2])]));
  }
  return s / 6.0;
}

void TriMesh::bounds(Vec3& lo, Vec3& hi) const {
  lo = {1e300, 1e300, 1e300};
  hi = {-1e300, -1e300, -1e300};
  for (const auto& v : vertices) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  }
}

void TriMesh::translate(Vec3 t) {
  for (auto& v : vertices) v = v + t;
}

void TriMesh::flip_orientation() {
  for (auto& f : faces) std::swap(f[1], f[2]);
  for (auto& n : normals) n = -1.0 * n;
}

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    for (int i : f) {
      if (i < 0 || i >= n) throw std::invalid_argument("mesh face index " + std::to_string(i) + " out of range");
    }
  }
}

bool is_closed_manifold(const TriMesh& m) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : m.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[static_cast<size_t>(e)], b = f[static_cast<size_t>((e + 1) % 3)];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [e, n] : directed) {
    if (!directed.count({e.second, e.first})) return false;
  }
  return true;
}

void write_obj(const std::string& path, const TriMesh& m, bool with_normals) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(17);
  for (const auto& v : m.vertices) f << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  const bool normals = with_normals && m.normals.size() == m.vertices.size();
  if (normals) {
    for (const auto& n : m.normals) f << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
  }
  for (const auto& t : m.faces) {
    f << 'f';
    for (int i : t) {
      f << ' ' << i + 1;
      if (normals) f << "//" << i + 1;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

TriMesh read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  TriMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x >> v.y >> v.z;
      m.vertices.push_back(v);
    } else if (tag == "vn") {
      Vec3 n;
      ss >> n.x >> n.y >> n.z;
      m.normals.push_back(n);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
      if (idx.size() < 3) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": face with < 3 vertices");
      for (size_t i = 1; i + 1 < idx.size(); ++i) m.faces.push_back({idx[0], idx[i], idx[i + 1]});
    }
  }
  m.validate();
  if (m.normals.size() != m.vertices.size()) m.compute_normals();
  return m;
}

}  // namespace vpf
