#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "vpf/data.hpp"

namespace fs = std::filesystem;

namespace vpf::data {
namespace {

uint64_t object_seed(uint64_t seed, int index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string view_name(int v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%02d.ppm", v);
  return buf;
}

std::string object_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj_%04d", i);
  return buf;
}

void write_object(const fs::path& dir, const ShapeSpec& spec, const DatasetOptions& opt) {
  fs::create_directories(dir);
  const TriMesh mesh = generate_shape(spec);
  if (!watertight_self_check(mesh, spec.seed)) {
    throw std::runtime_error(dir.string() + ": generated mesh is not watertight");
  }
  write_obj((dir / "mesh.obj").string(), mesh);
  const auto cams = random_cameras(opt.views, spec.seed ^ 0xca3e5ULL);
  write_cameras((dir / "cameras.jsonl").string(), cams);
  for (size_t v = 0; v < cams.size(); ++v) {
    write_ppm((dir / view_name(static_cast<int>(v))).string(), render(mesh, cams[v], opt.light));
  }
}

}  // namespace

std::vector<ManifestEntry> build_dataset(const std::string& root, const DatasetOptions& opt) {
  if (opt.objects < 1) throw std::invalid_argument("dataset needs at least one object");
  if (opt.train_fraction < 0 || opt.val_fraction < 0 || opt.train_fraction + opt.val_fraction > 1) {
    throw std::invalid_argument("split fractions must be non-negative and sum to at most 1");
  }
  fs::create_directories(root);
  const int n = opt.objects;
  std::vector<ManifestEntry> entries(static_cast<size_t>(n));
  std::vector<ShapeSpec> specs(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    specs[static_cast<size_t>(i)] = random_spec(object_seed(opt.seed, i));
    auto& e = entries[static_cast<size_t>(i)];
    e.object_id = object_name(i);
    e.family = family_name(specs[static_cast<size_t>(i)].family);
    e.seed = specs[static_cast<size_t>(i)].seed;
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed ^ 0x5b117ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(std::lround(opt.train_fraction * n));
  const int n_val = std::min(n - n_train, static_cast<int>(std::lround(opt.val_fraction * n)));
  for (int r = 0; r < n; ++r) {
    entries[static_cast<size_t>(order[static_cast<size_t>(r)])].split =
        r < n_train ? "train" : (r < n_train + n_val ? "val" : "test");
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        write_object(fs::path(root) / entries[static_cast<size_t>(i)].object_id, specs[static_cast<size_t>(i)], opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(opt.workers, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ofstream out(fs::path(root) / "manifest.jsonl");
  for (const auto& e : entries) {
    out << nlohmann::json{{"object_id", e.object_id}, {"family", e.family}, {"seed", e.seed}, {"split", e.split}}.dump()
        << "\n";
  }
  if (!out) throw std::runtime_error("cannot write manifest under " + root);
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& root) {
  std::ifstream in(fs::path(root) / "manifest.jsonl");
  if (!in) throw std::runtime_error("no manifest.jsonl under " + root);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    entries.push_back({j.at("object_id").get<std::string>(), j.at("family").get<std::string>(),
                       j.at("seed").get<uint64_t>(), j.at("split").get<std::string>()});
  }
  return entries;
}

Object load_object(const std::string& root, const std::string& id) {
  const fs::path dir = fs::path(root) / id;
  Object o;
  o.id = id;
  o.mesh = read_obj((dir / "mesh.obj").string());
  o.cams = read_cameras((dir / "cameras.jsonl").string());
  for (size_t v = 0; v < o.cams.size(); ++v) o.images.push_back(read_ppm((dir / view_name(static_cast<int>(v))).string()));
  return o;
}

std::vector<Object> load_split(const std::string& root, const std::string& split) {
  std::vector<Object> out;
  for (const auto& e : read_manifest(root)) {
    if (split.empty() || e.split == split) out.push_back(load_object(root, e.object_id));
  }
  return out;
}

}  // namespace vpf::data
