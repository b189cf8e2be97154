#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpf/geometry.hpp"

namespace vpf {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec3> normals;  // per vertex, area weighted

  bool empty() const { return faces.empty(); }
  void compute_normals();
  Vec3 face_normal(size_t f) const;  // unit
  double face_area(size_t f) const;
  double area() const;
  /// Signed volume by the divergence theorem (positive for outward winding).
  double volume() const;
  void bounds(Vec3& lo, Vec3& hi) const;
  void translate(Vec3 t);
  void flip_orientation();
  /// Throws std::invalid_argument on out-of-range indices.
  void validate() const;
};

/// Every undirected edge used by exactly two faces with opposite directions.
bool is_closed_manifold(const TriMesh& m);

void write_obj(const std::string& path, const TriMesh& m, bool with_normals = true);
TriMesh read_obj(const std::string& path);

class NonWatertight : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ray-parity inside test over a BVH. Three ray directions must agree;
/// rays grazing an edge or vertex are redrawn. Points on the surface count
/// as inside.
class InsideTester {
 public:
  explicit InsideTester(const TriMesh& mesh, uint64_t seed = 0x5eed);
  ~InsideTester();
  InsideTester(InsideTester&&) noexcept;
  InsideTester& operator=(InsideTester&&) noexcept;
  bool inside(Vec3 p) const;
  /// Mesh bounding box.
  Vec3 lo() const;
  Vec3 hi() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

bool point_in_mesh(const TriMesh& mesh, Vec3 p);

/// Samples on an R^3 lattice of cell centers of `grid` (flat index
/// (i * R + j) * R + k, i along x).
struct OccupancyGrid {
  GridSpec grid;
  std::vector<double> values;
};

struct MarchingCubesOptions {
  /// Pads the lattice with a ring of `pad_value` so surfaces touching the
  /// bounds close up.
  bool close_boundary = false;
  double pad_value = 0.0;
};

/// Isosurface at `level`; values >= level are inside. Triangles wind
/// counter-clockwise seen from outside.
TriMesh marching_cubes(const OccupancyGrid& g, double level, const MarchingCubesOptions& opt = {});

/// Polygon edge loops for one of the 256 corner configurations; corner k
/// sits at (k & 1, k >> 1 & 1, k >> 2 & 1) and edges are numbered as in
/// cube_edge_corners().
const std::vector<std::vector<int>>& mc_case_loops(int cube_index);
std::array<int, 2> cube_edge_corners(int edge);

}  // namespace vpf
