#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpf/geometry.hpp"
#include "vpf/mesh.hpp"

namespace vpf::data {

enum class Family { box, ellipsoid, cylinder, capsule, union2 };
std::string family_name(Family f);
Family parse_family(const std::string& s);

struct ShapeSpec {
  Family family = Family::box;
  /// box: half extents; ellipsoid: radii; cylinder: radius, half height;
  /// capsule: radius, half length of the straight part.
  std::vector<double> params;
  Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 translation{};
  uint64_t seed = 0;
  /// union2 only: the two parts.
  std::vector<ShapeSpec> parts;
  /// Scale the result so its bounding box fits the unit cube, centred.
  bool normalize = true;
};

/// Random spec of the given family drawn from `seed`.
ShapeSpec random_spec(Family f, uint64_t seed);
/// Family chosen uniformly from the five, then random_spec.
ShapeSpec random_spec(uint64_t seed);

/// Deterministic for a fixed spec. Unions are extracted from the implicit
/// minimum of the parts' signed distances; if the parts do not touch, the
/// spec is re-drawn from a derived seed (so the result differs from `spec`).
TriMesh generate_shape(const ShapeSpec& spec);

TriMesh make_box(double hx, double hy, double hz);
TriMesh make_icosphere(int subdivisions);
TriMesh make_ellipsoid(double a, double b, double c, int subdivisions);
TriMesh make_cylinder(double r, double half_h, int segments);
TriMesh make_capsule(double r, double half_len, int segments, int rings);

/// Closed 2-manifold, and ray-parity tests agree on sample points.
bool watertight_self_check(const TriMesh& m, uint64_t seed = 1);

/// Image stored as H x W x 3 floats in [0, 1].
struct Image {
  int height = 0, width = 0;
  std::vector<float> rgb;
  float at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

struct Light {
  double elevation_deg = 30.0;
  double azimuth_deg = 90.0;
  double ambient = 0.25;
  double diffuse = 0.7;
  float background = 1.0f;
};

/// Unit direction pointing towards the light.
Vec3 light_direction(const Light& l);

/// Z-buffered, one sample per pixel, Lambertian.
Image render(const TriMesh& mesh, const Camera& cam, const Light& light = {});

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

struct ViewSetup {
  int views = 24;
  int image_size = 64;
  double distance = 1.2;
  double elevation_min_deg = 15.0;
  double elevation_max_deg = 60.0;
  /// Focal length as a fraction of the image width.
  double focal = 0.6;
};

std::vector<Camera> random_cameras(const ViewSetup& vs, uint64_t seed);

struct ManifestEntry {
  std::string object_id;
  std::string family;
  uint64_t seed = 0;
  std::string split;
};

struct DatasetOptions {
  int objects = 20;
  uint64_t seed = 1;
  ViewSetup views;
  Light light;
  int workers = 1;
  /// Split fractions; the test split takes the remainder.
  double train_fraction = 0.8;
  double val_fraction = 0.1;
};

/// Writes <root>/<object_id>/{mesh.obj, view_XX.ppm, cameras.jsonl} and
/// <root>/manifest.jsonl. Splits are drawn over a seeded shuffle.
std::vector<ManifestEntry> build_dataset(const std::string& root, const DatasetOptions& opt);
std::vector<ManifestEntry> read_manifest(const std::string& root);

/// Objects of a split loaded into memory.
struct Object {
  std::string id;
  TriMesh mesh;
  std::vector<Camera> cams;
  std::vector<Image> images;
};
Object load_object(const std::string& root, const std::string& id);
std::vector<Object> load_split(const std::string& root, const std::string& split);

}  // namespace vpf::data
