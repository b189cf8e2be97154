#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "vpf/geometry.hpp"

namespace vpf {

Vec3 Camera::to_camera(Vec3 X) const {
  Vec3 r;
  for (int i = 0; i < 3; ++i) {
    const auto& row = rotation[static_cast<size_t>(i)];
    r[i] = row[0] * X.x + row[1] * X.y + row[2] * X.z + translation[i];
  }
  return r;
}

Vec3 Camera::center() const {
  // -R^T t
  Vec3 c;
  for (int j = 0; j < 3; ++j) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += rotation[static_cast<size_t>(i)][static_cast<size_t>(j)] * translation[i];
    c[j] = -s;
  }
  return c;
}

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: focal lengths must be positive");
  if (height < 1 || width < 1) throw std::invalid_argument("camera: image size must be positive");
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (size_t k = 0; k < 3; ++k) s += rotation[i][k] * rotation[j][k];
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-6) throw std::invalid_argument("camera: rotation not orthonormal");
    }
  }
  const Vec3 r0{rotation[0][0], rotation[0][1], rotation[0][2]};
  const Vec3 r1{rotation[1][0], rotation[1][1], rotation[1][2]};
  const Vec3 r2{rotation[2][0], rotation[2][1], rotation[2][2]};
  if (dot(cross(r0, r1), r2) < 0) throw std::invalid_argument("camera: rotation determinant is -1");
}

Camera look_at(Vec3 eye, Vec3 target, Vec3 up, int height, int width, double fx, double fy) {
  const Vec3 f = normalized(target - eye);
  Vec3 r = cross(f, up);
  if (norm(r) < 1e-12) r = cross(f, Vec3{1, 0, 0});
  r = normalized(r);
  const Vec3 d = cross(f, r);  // image down
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = (width - 1) / 2.0;
  c.cy = (height - 1) / 2.0;
  c.height = height;
  c.width = width;
  c.rotation = {{{r.x, r.y, r.z}, {d.x, d.y, d.z}, {f.x, f.y, f.z}}};
  c.translation = {-dot(r, eye), -dot(d, eye), -dot(f, eye)};
  return c;
}

Projection project(const Camera& cam, Vec3 X) {
  const Vec3 p = cam.to_camera(X);
  Projection out;
  out.depth = p.z;
  if (p.z <= kNearEps) {
    out.behind = true;
    return out;
  }
  out.u = cam.fx * p.x / p.z + cam.cx;
  out.v = cam.fy * p.y / p.z + cam.cy;
  return out;
}

Vec3 unproject(const Camera& cam, double u, double v, double depth) {
  const Vec3 p{(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth};
  const Vec3 q = p - cam.translation;
  Vec3 X;
  for (int j = 0; j < 3; ++j) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += cam.rotation[static_cast<size_t>(i)][static_cast<size_t>(j)] * q[i];
    X[j] = s;
  }
  return X;
}

Camera flip_horizontal(const Camera& cam) {
  // R' = S R M, t' = S t with S = M = diag(-1, 1, 1); the principal point
  // mirrors across the image.
  Camera c = cam;
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 3; ++j) {
      const double si = i == 0 ? -1.0 : 1.0, mj = j == 0 ? -1.0 : 1.0;
      c.rotation[i][j] = si * cam.rotation[i][j] * mj;
    }
  }
  c.translation = {-cam.translation.x, cam.translation.y, cam.translation.z};
  c.cx = (cam.width - 1) - cam.cx;
  return c;
}

std::string camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["image_size"] = {cam.height, cam.width};
  std::vector<double> m;
  for (size_t i = 0; i < 3; ++i) {
    for (size_t k = 0; k < 3; ++k) m.push_back(cam.rotation[i][k]);
    m.push_back(cam.translation[static_cast<int>(i)]);
  }
  j["world_to_cam"] = m;
  return j.dump();
}

Camera camera_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  Camera c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  const auto& sz = j.at("image_size");
  c.height = sz.at(0).get<int>();
  c.width = sz.at(1).get<int>();
  const auto m = j.at("world_to_cam").get<std::vector<double>>();
  if (m.size() != 12) throw std::invalid_argument("camera: world_to_cam needs 12 values");
  for (size_t i = 0; i < 3; ++i) {
    for (size_t k = 0; k < 3; ++k) c.rotation[i][k] = m[i * 4 + k];
    c.translation[static_cast<int>(i)] = m[i * 4 + 3];
  }
  c.validate();
  return c;
}

void write_cameras(const std::string& path, const std::vector<Camera>& cams) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& c : cams) f << camera_to_json(c) << '\n';
}

std::vector<Camera> read_cameras(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::vector<Camera> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(camera_from_json(line));
  }
  return out;
}

}  // namespace vpf
