#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "vpf/ops.hpp"

namespace vpf {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return n > 0 ? (1.0 / n) * a : a;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Pinhole camera. Pixel centers sit at integer coordinates.
struct Camera {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int height = 1, width = 1;
  Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};  // world -> camera
  Vec3 translation{};

  Vec3 to_camera(Vec3 X) const;
  Vec3 center() const;
  /// Throws std::invalid_argument if intrinsics or rotation are invalid.
  void validate() const;
};

/// Camera at `eye` looking at `target`; camera y points down the image.
Camera look_at(Vec3 eye, Vec3 target, Vec3 up, int height, int width, double fx, double fy);

inline constexpr double kNearEps = 1e-6;

struct Projection {
  double u = 0, v = 0, depth = 0;
  bool behind = false;
};

Projection project(const Camera& cam, Vec3 X);
Vec3 unproject(const Camera& cam, double u, double v, double depth);

/// Camera for the horizontally flipped image. Pairs with mirror_x on world points.
Camera flip_horizontal(const Camera& cam);
inline Vec3 mirror_x(Vec3 p) { return {-p.x, p.y, p.z}; }

/// Axis-aligned cube split into d^3 cells. Cell (i, j, k) indexes (x, y, z)
/// and has flat index (i * d + j) * d + k.
struct GridSpec {
  int d = 2;
  Vec3 center{};
  double side = 1.0;

  void validate() const;
  Vec3 cell_center(int i, int j, int k) const;
  std::vector<Vec3> cell_centers() const;
  int64_t cells() const { return static_cast<int64_t>(d) * d * d; }
};

/// [sin(2^0 pi d), cos(2^0 pi d), ..., sin(2^(L-1) pi d), cos(2^(L-1) pi d)].
std::vector<double> pos_encode_depth(double d_norm, int bands);
/// Depth scaled by twice the scene side length.
inline double normalize_depth(double depth, double side) { return depth / (2.0 * side); }

/// Bilinear taps on an H x W map for continuous (u, v). Coordinates outside
/// [0, W-1] x [0, H-1] produce an empty row (zero feature).
struct PixelCoord {
  double u = 0, v = 0;
  bool valid = true;
};
std::shared_ptr<SamplePlan> bilinear_plan(int height, int width, const std::vector<PixelCoord>& coords);

/// Image pixel -> feature-map coordinate for an encoder of the given stride.
/// Points inside the image frame are clamped onto the feature lattice.
PixelCoord image_to_feature(const Projection& p, const Camera& cam, int stride, int fh, int fw);

/// Trilinear taps into a d^3 volume, clamping to boundary cell centers.
std::shared_ptr<SamplePlan> trilinear_plan(const GridSpec& grid, const std::vector<Vec3>& points);

/// Direct samplers for tests and tools; map is [H, W, C], vol is [d, d, d, C].
std::vector<double> bilinear_sample(const Tensor& map, double u, double v);
std::vector<double> trilinear_sample(const Tensor& vol, Vec3 X, const GridSpec& grid);

/// One JSON object per line: fx, fy, cx, cy, image_size [H, W],
/// world_to_cam (3x4 row-major).
std::string camera_to_json(const Camera& cam);
Camera camera_from_json(const std::string& line);
void write_cameras(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> read_cameras(const std::string& path);

}  // namespace vpf
