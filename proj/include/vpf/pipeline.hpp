#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vpf/data.hpp"
#include "vpf/fusion.hpp"
#include "vpf/mesh.hpp"
#include "vpf/metrics.hpp"
#include "vpf/nn.hpp"

namespace vpf::pipeline {

enum class Stage { volume_only, full };
std::string stage_name(Stage s);

struct ModelConfig {
  Arch arch = Arch::D;
  int d = 8;
  int64_t c = 64;
  int heads = 8;
  int64_t ff = 128;
  int bands = 11;
  /// Side of the scene cube centred at the origin.
  double side = 1.1;
  std::vector<int> encoder_widths{32, 32, 64, 64};
  int64_t hidden = 128;
  int pixel_layers = 3;
  uint64_t seed = 1;
  DType dtype = DType::f32;
};
std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& s);

/// Per-batch image features and fused volumes, reused across query chunks.
struct Encoded {
  Var maps;   // [B * N, Hf, Wf, Cimg]
  Var fused;  // [B, d, d, d, c]
  std::vector<Camera> cams;
  int64_t batch = 0, views = 0;
};

/// Image encoder -> per-view volumes -> volume fusion, sampled trilinearly
/// at query points; in the full stage the pixel-aligned path is added
/// before the occupancy decoder.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// images [B * N, H, W, 3] object-major; one camera per image.
  Encoded encode(const Tensor& images, const std::vector<Camera>& cams, int64_t batch, int64_t views,
                 FusionTrace* trace = nullptr) const;
  /// points[b] are object b's queries, all of equal count -> logits [B * Q].
  Var query(const Encoded& e, const std::vector<std::vector<Vec3>>& points) const;
  Var forward(const Tensor& images, const std::vector<Camera>& cams, int64_t batch, int64_t views,
              const std::vector<std::vector<Vec3>>& points) const;

  /// Zeroes the pixel path's output projection and switches to the full
  /// stage, so logits are unchanged at the switch.
  void begin_full_stage();
  Stage stage() const { return stage_; }
  void set_stage(Stage s) { stage_ = s; }

  const ModelConfig& config() const { return cfg_; }
  GridSpec grid() const;
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  /// Top-level parameter prefixes: enc, vol, f, pix, dec.
  static std::vector<std::string> parameter_groups();

  nn::ImageEncoder encoder;
  VolumeBuilder builder;
  VolumeFusion fusion;
  PixelFusion pixel;
  nn::OccupancyDecoder decoder;

 private:
  ModelConfig cfg_;
  nn::ParamStore ps_;
  Stage stage_ = Stage::volume_only;
};

/// Stacks images into [n, H, W, 3]; flips[i] mirrors image i left-right.
Tensor images_to_tensor(const std::vector<const data::Image*>& images, const std::vector<bool>& flips, DType dt);

struct PointBatch {
  std::vector<Vec3> points;
  std::vector<double> labels;  // 1 inside, 0 outside
};

struct PointSamplingOptions {
  int count = 2048;
  /// Uniform : near-surface ratio.
  int uniform_parts = 1;
  int surface_parts = 5;
  double sigma = 0.03;
  double side = 1.1;
};

/// Number of uniform samples: ceil(count * u / (u + s)).
int uniform_count(const PointSamplingOptions& o);

/// Labelled training points for one watertight mesh.
class PointSampler {
 public:
  /// Throws NonWatertight if the mesh is not a closed manifold.
  explicit PointSampler(const TriMesh& mesh, uint64_t seed = 0x1abe1);
  PointBatch sample(const PointSamplingOptions& o, std::mt19937_64& rng) const;
  bool inside(Vec3 p) const { return tester_.inside(p); }

 private:
  const TriMesh* mesh_;
  InsideTester tester_;
  std::vector<double> cdf_;
};

PointBatch sample_points(const TriMesh& mesh, const PointSamplingOptions& o, uint64_t seed);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
/// Each parameter keeps its own step count; parameters without a gradient
/// are skipped.
class AdamW {
 public:
  struct Slot {
    Tensor m, v;
    int64_t t = 0;
  };
  explicit AdamW(AdamWOptions o = {}) : opt_(o) {}
  void step(const std::vector<std::pair<std::string, Var>>& params, double lr);
  const AdamWOptions& options() const { return opt_; }
  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

 private:
  AdamWOptions opt_;
  std::map<std::string, Slot> slots_;
};

/// Linear warm-up from lr_min (iteration 1) to lr_max (iteration warmup),
/// linear decay back to lr_min at decay_end, constant after.
struct LrSchedule {
  double lr_min = 1e-4;
  double lr_max = 1e-3;
  int64_t warmup = 10000;
  int64_t decay_end = 100000;
  double operator()(int64_t iteration) const;
  /// Breakpoints rescaled to `total` iterations (warmup at total / 10).
  static LrSchedule scaled(int64_t total, double lr_min = 1e-4, double lr_max = 1e-3);
};

/// Objects per batch for K views: floor(budget / K).
int batch_objects(int views, int budget = 16);

struct TrainConfig {
  int k_max = 8;
  /// When positive, every iteration uses exactly this many views.
  int fixed_views = 0;
  int batch_budget = 16;
  PointSamplingOptions points;
  LrSchedule schedule;
  AdamWOptions adam;
  int64_t iterations = 100000;
  /// Fraction of iterations trained with the volume path only.
  double stage1_fraction = 0.5;
  bool flip = true;
  uint64_t seed = 1;
  int workers = 1;
};

struct TrainState {
  int64_t iteration = 0;
  std::string rng;  // serialized std::mt19937_64
};

/// Objects, views and flips drawn for one iteration.
struct IterationPlan {
  int views = 0;
  std::vector<int> objects;
  std::vector<std::vector<int>> view_ids;
  std::vector<bool> flips;
};

struct StepInfo {
  int64_t iteration = 0;
  double loss = 0;
  double lr = 0;
  int views = 0;
  int batch = 0;
  Stage stage = Stage::volume_only;
};

class Trainer {
 public:
  Trainer(Model& model, const std::vector<data::Object>& objects, const TrainConfig& cfg, AdamW& opt,
          TrainState state = {});
  IterationPlan plan(std::mt19937_64& rng) const;
  /// One optimisation step; throws NumericError on a non-finite loss.
  StepInfo step();
  const TrainState& state();
  const TrainConfig& config() const { return cfg_; }
  int64_t stage1_iterations() const;

 private:
  Model& model_;
  const std::vector<data::Object>& objects_;
  TrainConfig cfg_;
  AdamW& opt_;
  std::vector<PointSampler> samplers_;
  std::mt19937_64 rng_;
  TrainState state_;
};

/// Binary checkpoint ("VPFK"): model config, stage, parameters, optimizer
/// slots and trainer state, stored bit-exact.
void save_checkpoint(const std::string& path, const Model& m, const AdamW& opt, const TrainState& st);
struct Checkpoint {
  std::unique_ptr<Model> model;
  AdamW optimizer;
  TrainState state;
};
Checkpoint load_checkpoint(const std::string& path);

/// Occupancy probabilities at the R^3 cell centres of the scene cube.
OccupancyGrid eval_grid(const Model& m, const Tensor& images, const std::vector<Camera>& cams, int resolution,
                        int chunk = 8192);
/// eval_grid followed by marching cubes (padded so the mesh closes).
TriMesh reconstruct(const Model& m, const Tensor& images, const std::vector<Camera>& cams, int resolution,
                    double level);

/// Images and cameras of the given views of an object, in a canonical
/// order so results do not depend on how views are listed.
struct ViewInput {
  Tensor images;
  std::vector<Camera> cams;
};
ViewInput canonical_views(const std::vector<const data::Image*>& images, const std::vector<Camera>& cams, DType dt);

/// First n entries of a seeded permutation of 0..available-1, so smaller
/// view sets are subsets of larger ones for the same seed.
std::vector<int> pick_views(int available, int n, uint64_t seed);

struct EvalOptions {
  int resolution = 128;
  double level = 0.43;
  int samples = 100000;
  uint64_t seed = 1;
  int workers = 1;
};

/// Reconstructs every object from `views` of its images and scores the
/// mesh against the object's ground truth. One report per object.
std::vector<metrics::MetricReport> evaluate_objects(const Model& m, const std::vector<data::Object>& objects,
                                                    int views, const EvalOptions& o);
/// Mean of the reports, labelled `label`. Chamfer is +inf if any
/// prediction was empty.
metrics::MetricReport mean_report(const std::vector<metrics::MetricReport>& rows, const std::string& label);

}  // namespace vpf::pipeline
