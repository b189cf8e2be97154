// vpf: dataset generation, training, reconstruction and evaluation.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "vpf/config.hpp"
#include "vpf/data.hpp"
#include "vpf/metrics.hpp"
#include "vpf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vpf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string profile;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> arch;
  std::optional<double> level;
  std::optional<int> resolution;
};

std::optional<DType> env_precision() {
  const char* p = std::getenv("VPFK_PRECISION");
  if (!p || !*p) return std::nullopt;
  const std::string s = p;
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw UsageError("VPFK_PRECISION must be f32 or f64, got '" + s + "'");
}

config::Experiment experiment(const Common& c) {
  std::map<std::string, std::string> kv;
  if (!c.config.empty()) {
    kv = config::resolve(config::load(c.config), c.profile);
  } else if (!c.profile.empty()) {
    throw UsageError("--profile needs --config");
  }
  auto e = config::experiment(kv);
  if (c.seed) config::reseed(e, *c.seed);
  if (c.workers) {
    if (*c.workers < 1) throw UsageError("--workers must be positive");
    e.workers = e.data.workers = e.train.workers = *c.workers;
  }
  if (c.arch) {
    try {
      e.model.arch = parse_arch(*c.arch);
    } catch (const std::exception&) {
      throw UsageError("unknown architecture '" + *c.arch + "'");
    }
  }
  if (c.level) {
    if (!(*c.level > 0 && *c.level < 1)) throw UsageError("--level must lie in (0, 1)");
    e.level = *c.level;
  }
  if (c.resolution) {
    if (*c.resolution < 2) throw UsageError("--resolution must be at least 2");
    e.resolution = *c.resolution;
  }
  if (const auto dt = env_precision()) e.model.dtype = *dt;
  return e;
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad view list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty view list");
  return out;
}

pipeline::Checkpoint open_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path);
  try {
    return pipeline::load_checkpoint(path);
  } catch (const std::exception& ex) {
    throw DataError("cannot read checkpoint " + path + ": " + ex.what());
  }
}

void check_precision(const pipeline::Model& m) {
  const auto dt = env_precision();
  if (dt && *dt != m.config().dtype) {
    throw UsageError("VPFK_PRECISION=" + std::string(dtype_name(*dt)) + " but the checkpoint is " +
                     std::string(dtype_name(m.config().dtype)));
  }
}

int gen_data(const Common& c, const std::string& out, std::optional<int> objects) {
  auto e = experiment(c);
  if (objects) {
    if (*objects < 1) throw UsageError("--objects must be positive");
    e.data.objects = *objects;
  }
  if (out.empty()) throw UsageError("gen-data needs --out");
  const auto entries = data::build_dataset(out, e.data);
  std::cout << "objects " << entries.size() << "\n" << (fs::path(out) / "manifest.jsonl").string() << "\n";
  return kOk;
}

int train(const Common& c, const std::string& dataset, const std::string& out, const std::string& log_path,
          std::optional<int64_t> iterations, bool resume) {
  auto e = experiment(c);
  if (iterations) e.train.iterations = *iterations;
  if (dataset.empty() || out.empty()) throw UsageError("train needs --data and --out");
  std::vector<data::Object> objects;
  try {
    objects = data::load_split(dataset, "train");
  } catch (const std::exception& ex) {
    throw DataError(std::string("cannot load training split: ") + ex.what());
  }
  if (objects.empty()) throw DataError("training split of " + dataset + " is empty");

  std::unique_ptr<pipeline::Model> model;
  pipeline::AdamW opt(e.train.adam);
  pipeline::TrainState state;
  if (resume && fs::exists(out)) {
    auto ck = open_checkpoint(out);
    check_precision(*ck.model);
    model = std::move(ck.model);
    opt = std::move(ck.optimizer);
    state = ck.state;
    std::cerr << "resuming " << out << " at iteration " << state.iteration << "\n";
  } else {
    model = std::make_unique<pipeline::Model>(e.model);
  }

  const std::string log_file = log_path.empty() ? out + ".csv" : log_path;
  const bool append = resume && state.iteration > 0 && fs::exists(log_file);
  std::ofstream log(log_file, append ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write log " + log_file);
  if (!append) log << "iteration,loss,lr,views\n";

  pipeline::Trainer trainer(*model, objects, e.train, opt, state);
  const auto t0 = std::chrono::steady_clock::now();
  double loss_sum = 0;
  int loss_n = 0;
  int64_t it = state.iteration;
  while (it < e.train.iterations) {
    const auto info = trainer.step();
    it = info.iteration;
    loss_sum += info.loss;
    ++loss_n;
    const bool last = it == e.train.iterations;
    if (it % e.log_every == 0 || last) {
      char line[128];
      std::snprintf(line, sizeof line, "%lld,%.6g,%.6g,%d\n", static_cast<long long>(it), loss_sum / loss_n, info.lr,
                    info.views);
      log << line << std::flush;
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "it " << it << " loss " << loss_sum / loss_n << " stage " << pipeline::stage_name(info.stage)
                << " " << secs << "s\n";
      loss_sum = 0;
      loss_n = 0;
    }
    if (it % e.checkpoint_every == 0 || last) pipeline::save_checkpoint(out, *model, opt, trainer.state());
  }
  if (!fs::exists(out)) pipeline::save_checkpoint(out, *model, opt, trainer.state());
  std::cout << out << "\n";
  return kOk;
}

struct ReconstructArgs {
  std::string checkpoint, object, cameras, out;
  std::vector<std::string> images;
  std::string views;
};

int reconstruct(const Common& c, const ReconstructArgs& a) {
  auto e = experiment(c);
  if (a.checkpoint.empty() || a.out.empty()) throw UsageError("reconstruct needs --checkpoint and --out");
  std::vector<data::Image> images;
  std::vector<Camera> cams;
  try {
    if (!a.object.empty()) {
      if (!a.images.empty()) throw UsageError("use either --object or --image, not both");
      const auto all = read_cameras((fs::path(a.object) / "cameras.jsonl").string());
      const auto ids = a.views.empty() ? std::vector<int>{0} : parse_list(a.views);
      for (int i : ids) {
        if (i < 0 || i >= static_cast<int>(all.size())) throw UsageError("view index out of range");
        char name[32];
        std::snprintf(name, sizeof name, "view_%02d.ppm", i);
        images.push_back(data::read_ppm((fs::path(a.object) / name).string()));
        cams.push_back(all[static_cast<size_t>(i)]);
      }
    } else {
      if (a.images.empty() || a.cameras.empty()) throw UsageError("reconstruct needs --object or --image/--cameras");
      cams = read_cameras(a.cameras);
      if (cams.size() != a.images.size()) {
        throw UsageError(std::to_string(a.images.size()) + " images but " + std::to_string(cams.size()) +
                         " cameras");
      }
      for (const auto& p : a.images) images.push_back(data::read_ppm(p));
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& ex) {
    throw DataError(ex.what());
  }

  auto ck = open_checkpoint(a.checkpoint);
  check_precision(*ck.model);
  std::vector<const data::Image*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  const auto in = pipeline::canonical_views(ptrs, cams, ck.model->config().dtype);
  std::cout << "# reconstruct views=" << cams.size() << " resolution=" << e.resolution << " level=" << e.level
            << "\n";
  const TriMesh mesh = pipeline::reconstruct(*ck.model, in.images, in.cams, e.resolution, e.level);
  write_obj(a.out, mesh);
  std::cout << "vertices " << mesh.vertices.size() << " faces " << mesh.faces.size() << "\n" << a.out << "\n";
  return kOk;
}

int evaluate(const Common& c, const std::string& checkpoint, const std::string& dataset, const std::string& split,
             const std::string& views, const std::string& out) {
  auto e = experiment(c);
  if (checkpoint.empty() || dataset.empty()) throw UsageError("evaluate needs --checkpoint and --data");
  const auto counts = parse_list(views.empty() ? "1" : views);
  auto ck = open_checkpoint(checkpoint);
  check_precision(*ck.model);
  std::vector<data::Object> objects;
  try {
    objects = data::load_split(dataset, split);
  } catch (const std::exception& ex) {
    throw DataError(std::string("cannot load split: ") + ex.what());
  }
  if (objects.empty()) throw DataError("split '" + split + "' of " + dataset + " is empty");

  pipeline::EvalOptions o;
  o.resolution = e.resolution;
  o.level = e.level;
  o.samples = e.eval_samples;
  o.seed = e.seed;
  o.workers = e.workers;
  std::vector<metrics::MetricReport> rows, means;
  for (int n : counts) {
    if (n < 1) throw UsageError("view counts must be positive");
    for (const auto& obj : objects) {
      if (n > static_cast<int>(obj.images.size())) throw UsageError("object " + obj.id + " has too few views");
    }
    auto r = pipeline::evaluate_objects(*ck.model, objects, n, o);
    means.push_back(pipeline::mean_report(r, split.empty() ? "all" : split));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string table = metrics::report_table(means);
  std::cout << table;
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream t(fs::path(out) / "report.txt");
    t << table << "\n" << metrics::report_table(rows);
    std::ofstream j(fs::path(out) / "report.jsonl");
    for (const auto& r : means) j << metrics::report_json(r) << "\n";
    for (const auto& r : rows) j << metrics::report_json(r) << "\n";
    if (!t || !j) throw DataError("cannot write report to " + out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vpf: multi-view implicit reconstruction"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--config", c.config, "Key-value config file")->check(CLI::ExistingFile);
  app.add_option("--profile", c.profile, "Config block to apply (e.g. desk)");
  app.add_option("--seed", c.seed, "Master seed");
  app.add_option("--workers", c.workers, "Worker threads");
  app.add_option("--arch", c.arch, "Fusion architecture A, B, C or D");
  app.add_option("--level", c.level, "Marching-cubes level");
  app.add_option("--resolution", c.resolution, "Evaluation grid resolution");

  std::string out, dataset, log_path, split = "test", views, checkpoint;
  std::optional<int> objects;
  std::optional<int64_t> iterations;
  bool resume = false;
  ReconstructArgs ra;

  auto* gen = app.add_subcommand("gen-data", "Generate a procedural dataset");
  gen->add_option("--out", out, "Dataset directory")->required();
  gen->add_option("--objects", objects, "Number of objects");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", dataset, "Dataset directory")->required();
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--log", log_path, "CSV log (default <out>.csv)");
  tr->add_option("--iterations", iterations, "Total iterations");
  tr->add_flag("--resume", resume, "Continue from --out if it exists");

  auto* rc = app.add_subcommand("reconstruct", "Reconstruct a mesh from views");
  rc->add_option("--checkpoint", ra.checkpoint, "Checkpoint")->required();
  rc->add_option("--object", ra.object, "Object directory of a dataset");
  rc->add_option("--views", ra.views, "View indices within --object, e.g. 0,3,5");
  rc->add_option("--image", ra.images, "PPM image (repeatable)");
  rc->add_option("--cameras", ra.cameras, "Camera JSON lines, one per --image");
  rc->add_option("--out", ra.out, "Output OBJ")->required();

  auto* ev = app.add_subcommand("evaluate", "Evaluate on a dataset split");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  ev->add_option("--data", dataset, "Dataset directory")->required();
  ev->add_option("--split", split, "Split name (default test)");
  ev->add_option("--views", views, "View counts, e.g. 1,2,4");
  ev->add_option("--out", out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_code = app.exit(e);
    return rc_code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return gen_data(c, out, objects);
    if (*tr) return train(c, dataset, out, log_path, iterations, resume);
    if (*rc) return reconstruct(c, ra);
    if (*ev) return evaluate(c, checkpoint, dataset, split, views, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
