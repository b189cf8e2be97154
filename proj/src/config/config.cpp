#include "vpf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "vpf/parallel.hpp"

namespace vpf::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

uint64_t mix(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + salt * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

using Setter = std::function<void(Experiment&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto i32 = [](auto field) {
      return [field](Experiment& e, const std::string& k, const std::string& v) { field(e) = number<int>(k, v); };
    };
    auto i64 = [](auto field) {
      return [field](Experiment& e, const std::string& k, const std::string& v) {
        field(e) = number<int64_t>(k, v);
      };
    };
    auto f64 = [](auto field) {
      return [field](Experiment& e, const std::string& k, const std::string& v) { field(e) = number<double>(k, v); };
    };
    t["profile"] = [](Experiment& e, const std::string&, const std::string& v) { e.profile = v; };
    t["seed"] = [](Experiment& e, const std::string& k, const std::string& v) { reseed(e, number<uint64_t>(k, v)); };
    t["workers"] = i32([](Experiment& e) -> int& { return e.workers; });

    t["objects"] = i32([](Experiment& e) -> int& { return e.data.objects; });
    t["views_per_object"] = i32([](Experiment& e) -> int& { return e.data.views.views; });
    t["image_size"] = i32([](Experiment& e) -> int& { return e.data.views.image_size; });
    t["camera_distance"] = f64([](Experiment& e) -> double& { return e.data.views.distance; });
    t["elevation_min"] = f64([](Experiment& e) -> double& { return e.data.views.elevation_min_deg; });
    t["elevation_max"] = f64([](Experiment& e) -> double& { return e.data.views.elevation_max_deg; });
    t["focal"] = f64([](Experiment& e) -> double& { return e.data.views.focal; });
    t["train_fraction"] = f64([](Experiment& e) -> double& { return e.data.train_fraction; });
    t["val_fraction"] = f64([](Experiment& e) -> double& { return e.data.val_fraction; });

    t["arch"] = [](Experiment& e, const std::string& k, const std::string& v) {
      try {
        e.model.arch = parse_arch(v);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + k + "': unknown architecture '" + v + "'");
      }
    };
    t["d"] = i32([](Experiment& e) -> int& { return e.model.d; });
    t["c"] = i64([](Experiment& e) -> int64_t& { return e.model.c; });
    t["heads"] = i32([](Experiment& e) -> int& { return e.model.heads; });
    t["ff"] = i64([](Experiment& e) -> int64_t& { return e.model.ff; });
    t["bands"] = i32([](Experiment& e) -> int& { return e.model.bands; });
    t["side"] = [](Experiment& e, const std::string& k, const std::string& v) {
      e.model.side = number<double>(k, v);
      e.train.points.side = e.model.side;
    };
    t["encoder_widths"] = [](Experiment& e, const std::string& k, const std::string& v) {
      e.model.encoder_widths = int_list(k, v);
    };
    t["hidden"] = i64([](Experiment& e) -> int64_t& { return e.model.hidden; });
    t["pixel_layers"] = i32([](Experiment& e) -> int& { return e.model.pixel_layers; });
    t["precision"] = [](Experiment& e, const std::string& k, const std::string& v) {
      if (v == "f32") {
        e.model.dtype = DType::f32;
      } else if (v == "f64") {
        e.model.dtype = DType::f64;
      } else {
        throw ConfigError("config key '" + k + "': expected f32 or f64, got '" + v + "'");
      }
    };

    t["k_max"] = i32([](Experiment& e) -> int& { return e.train.k_max; });
    t["fixed_views"] = i32([](Experiment& e) -> int& { return e.train.fixed_views; });
    t["batch_budget"] = i32([](Experiment& e) -> int& { return e.train.batch_budget; });
    t["points"] = i32([](Experiment& e) -> int& { return e.train.points.count; });
    t["uniform_parts"] = i32([](Experiment& e) -> int& { return e.train.points.uniform_parts; });
    t["surface_parts"] = i32([](Experiment& e) -> int& { return e.train.points.surface_parts; });
    t["sigma"] = f64([](Experiment& e) -> double& { return e.train.points.sigma; });
    t["lr_min"] = f64([](Experiment& e) -> double& { return e.train.schedule.lr_min; });
    t["lr_max"] = f64([](Experiment& e) -> double& { return e.train.schedule.lr_max; });
    t["warmup"] = i64([](Experiment& e) -> int64_t& { return e.train.schedule.warmup; });
    t["decay_end"] = i64([](Experiment& e) -> int64_t& { return e.train.schedule.decay_end; });
    t["beta1"] = f64([](Experiment& e) -> double& { return e.train.adam.beta1; });
    t["beta2"] = f64([](Experiment& e) -> double& { return e.train.adam.beta2; });
    t["eps"] = f64([](Experiment& e) -> double& { return e.train.adam.eps; });
    t["weight_decay"] = f64([](Experiment& e) -> double& { return e.train.adam.weight_decay; });
    t["iterations"] = i64([](Experiment& e) -> int64_t& { return e.train.iterations; });
    t["stage1_fraction"] = f64([](Experiment& e) -> double& { return e.train.stage1_fraction; });
    t["flip"] = [](Experiment& e, const std::string& k, const std::string& v) { e.train.flip = boolean(k, v); };

    t["level"] = f64([](Experiment& e) -> double& { return e.level; });
    t["resolution"] = i32([](Experiment& e) -> int& { return e.resolution; });
    t["eval_samples"] = i32([](Experiment& e) -> int& { return e.eval_samples; });
    t["log_every"] = i32([](Experiment& e) -> int& { return e.log_every; });
    t["checkpoint_every"] = i32([](Experiment& e) -> int& { return e.checkpoint_every; });
    return t;
  }();
  return table;
}

}  // namespace

KeyValues parse(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::map<std::string, std::string>* cur = &out.base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed block header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (out.blocks.count(name)) throw ConfigError(where + ": block [" + name + "] defined twice");
      cur = &out.blocks[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!cur->emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

KeyValues load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

std::map<std::string, std::string> resolve(const KeyValues& kv, const std::string& profile) {
  std::string name = profile;
  if (name.empty()) {
    const auto it = kv.base.find("profile");
    if (it != kv.base.end()) name = it->second;
  }
  auto out = kv.base;
  if (!name.empty() && name != "paper") {
    const auto it = kv.blocks.find(name);
    if (it == kv.blocks.end()) throw ConfigError("config has no [" + name + "] block");
    for (const auto& [k, v] : it->second) out[k] = v;
  }
  out["profile"] = name.empty() ? "paper" : name;
  return out;
}

void reseed(Experiment& e, uint64_t seed) {
  e.seed = seed;
  e.data.seed = seed;
  e.model.seed = mix(seed, 1);
  e.train.seed = mix(seed, 2);
}

Experiment experiment(const std::map<std::string, std::string>& kv) {
  Experiment e;
  reseed(e, e.seed);
  const auto& table = setters();
  // Seed first so later keys are not affected by ordering.
  if (const auto it = kv.find("seed"); it != kv.end()) table.at("seed")(e, it->first, it->second);
  for (const auto& [k, v] : kv) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key '" + k + "'");
    if (k != "seed") it->second(e, k, v);
  }
  if (e.workers < 0) throw ConfigError("config key 'workers' must be non-negative");
  if (e.workers == 0) e.workers = default_workers();
  e.data.workers = e.train.workers = e.workers;
  if (e.level <= 0 || e.level >= 1) throw ConfigError("config key 'level' must lie in (0, 1)");
  if (e.resolution < 2) throw ConfigError("config key 'resolution' must be at least 2");
  if (e.train.k_max < 1) throw ConfigError("config key 'k_max' must be positive");
  if (e.train.iterations < 0) throw ConfigError("config key 'iterations' must be non-negative");
  return e;
}

std::string describe(const Experiment& e) {
  std::ostringstream o;
  o.precision(17);
  auto widths = [&] {
    std::string s;
    for (size_t i = 0; i < e.model.encoder_widths.size(); ++i) {
      s += (i ? "," : "") + std::to_string(e.model.encoder_widths[i]);
    }
    return s;
  };
  o << "profile = " << e.profile << "\n"
    << "seed = " << e.seed << "\n"
    << "workers = " << e.workers << "\n"
    << "objects = " << e.data.objects << "\n"
    << "views_per_object = " << e.data.views.views << "\n"
    << "image_size = " << e.data.views.image_size << "\n"
    << "camera_distance = " << e.data.views.distance << "\n"
    << "elevation_min = " << e.data.views.elevation_min_deg << "\n"
    << "elevation_max = " << e.data.views.elevation_max_deg << "\n"
    << "focal = " << e.data.views.focal << "\n"
    << "train_fraction = " << e.data.train_fraction << "\n"
    << "val_fraction = " << e.data.val_fraction << "\n"
    << "arch = " << static_cast<char>('A' + static_cast<int>(e.model.arch)) << "\n"
    << "d = " << e.model.d << "\n"
    << "c = " << e.model.c << "\n"
    << "heads = " << e.model.heads << "\n"
    << "ff = " << e.model.ff << "\n"
    << "bands = " << e.model.bands << "\n"
    << "side = " << e.model.side << "\n"
    << "encoder_widths = " << widths() << "\n"
    << "hidden = " << e.model.hidden << "\n"
    << "pixel_layers = " << e.model.pixel_layers << "\n"
    << "precision = " << dtype_name(e.model.dtype) << "\n"
    << "k_max = " << e.train.k_max << "\n"
    << "fixed_views = " << e.train.fixed_views << "\n"
    << "batch_budget = " << e.train.batch_budget << "\n"
    << "points = " << e.train.points.count << "\n"
    << "uniform_parts = " << e.train.points.uniform_parts << "\n"
    << "surface_parts = " << e.train.points.surface_parts << "\n"
    << "sigma = " << e.train.points.sigma << "\n"
    << "lr_min = " << e.train.schedule.lr_min << "\n"
    << "lr_max = " << e.train.schedule.lr_max << "\n"
    << "warmup = " << e.train.schedule.warmup << "\n"
    << "decay_end = " << e.train.schedule.decay_end << "\n"
    << "beta1 = " << e.train.adam.beta1 << "\n"
    << "beta2 = " << e.train.adam.beta2 << "\n"
    << "eps = " << e.train.adam.eps << "\n"
    << "weight_decay = " << e.train.adam.weight_decay << "\n"
    << "iterations = " << e.train.iterations << "\n"
    << "stage1_fraction = " << e.train.stage1_fraction << "\n"
    << "flip = " << (e.train.flip ? "true" : "false") << "\n"
    << "level = " << e.level << "\n"
    << "resolution = " << e.resolution << "\n"
    << "eval_samples = " << e.eval_samples << "\n"
    << "log_every = " << e.log_every << "\n"
    << "checkpoint_every = " << e.checkpoint_every << "\n";
  return o.str();
}

}  // namespace vpf::config
