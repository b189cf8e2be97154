#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vpf/data.hpp"

namespace vpf::data {
namespace {
constexpr double kNear = 1e-3;
constexpr double kDeg = std::numbers::pi / 180.0;
}  // namespace

Vec3 light_direction(const Light& l) {
  const double e = l.elevation_deg * kDeg, a = l.azimuth_deg * kDeg;
  return {std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
}

Image render(const TriMesh& mesh, const Camera& cam, const Light& light) {
  cam.validate();
  const int H = cam.height, W = cam.width;
  Image img;
  img.height = H;
  img.width = W;
  img.rgb.assign(static_cast<size_t>(H) * W * 3, light.background);
  std::vector<double> inv_depth(static_cast<size_t>(H) * W, 0.0);
  const Vec3 L = light_direction(light);

  std::vector<Vec3> pc(mesh.vertices.size());
  for (size_t i = 0; i < pc.size(); ++i) pc[i] = cam.to_camera(mesh.vertices[i]);

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    double sx[3], sy[3], iz[3];
    bool clipped = false;
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = pc[static_cast<size_t>(tri[k])];
      if (p.z <= kNear) clipped = true;
      iz[k] = 1.0 / p.z;
      sx[k] = cam.fx * p.x * iz[k] + cam.cx;
      sy[k] = cam.fy * p.y * iz[k] + cam.cy;
    }
    if (clipped) continue;
    const double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
    if (std::abs(area) < 1e-12) continue;
    const Vec3 n = mesh.face_normal(f);
    const float shade =
        static_cast<float>(std::clamp(light.ambient + light.diffuse * std::max(0.0, dot(n, L)), 0.0, 1.0));

    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({sx[0], sx[1], sx[2]}))));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(std::max({sx[0], sx[1], sx[2]}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({sy[0], sy[1], sy[2]}))));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(std::max({sy[0], sy[1], sy[2]}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double w[3];
        for (int k = 0; k < 3; ++k) {
          const int a = (k + 1) % 3, b = (k + 2) % 3;
          w[k] = ((sx[b] - sx[a]) * (y - sy[a]) - (x - sx[a]) * (sy[b] - sy[a])) / area;
        }
        if (w[0] < 0 || w[1] < 0 || w[2] < 0) continue;
        const double z = w[0] * iz[0] + w[1] * iz[1] + w[2] * iz[2];
        const size_t pix = static_cast<size_t>(y) * W + x;
        if (z <= inv_depth[pix]) continue;
        inv_depth[pix] = z;
        for (int c = 0; c < 3; ++c) img.rgb[pix * 3 + c] = shade;
      }
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.rgb[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int maxval = 0;
  Image img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || maxval != 255 || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error(path + ": not an 8-bit binary PPM");
  }
  in.get();
  std::vector<unsigned char> bytes(static_cast<size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error(path + ": truncated");
  img.rgb.resize(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

std::vector<Camera> random_cameras(const ViewSetup& vs, uint64_t seed) {
  if (vs.views < 1 || vs.image_size < 1) throw std::invalid_argument("view setup needs views >= 1 and image_size >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> az(0.0, 360.0), el(vs.elevation_min_deg, vs.elevation_max_deg);
  std::vector<Camera> cams;
  const double f = vs.focal * vs.image_size;
  for (int i = 0; i < vs.views; ++i) {
    const double a = az(rng) * kDeg, e = el(rng) * kDeg;
    const Vec3 eye = vs.distance * Vec3{std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
    cams.push_back(look_at(eye, {0, 0, 0}, {0, 0, 1}, vs.image_size, vs.image_size, f, f));
  }
  return cams;
}

}  // namespace vpf::data
