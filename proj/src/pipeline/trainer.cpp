#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vpf/parallel.hpp"
#include "vpf/pipeline.hpp"

namespace vpf::pipeline {

Trainer::Trainer(Model& model, const std::vector<data::Object>& objects, const TrainConfig& cfg, AdamW& opt,
                 TrainState state)
    : model_(model), objects_(objects), cfg_(cfg), opt_(opt), rng_(cfg.seed), state_(std::move(state)) {
  if (objects.empty()) throw std::invalid_argument("training set is empty");
  if (cfg.k_max < 1 || cfg.fixed_views < 0) throw std::invalid_argument("k_max must be at least 1");
  if (!(cfg.stage1_fraction >= 0 && cfg.stage1_fraction <= 1)) {
    throw std::invalid_argument("stage1_fraction must lie in [0, 1]");
  }
  samplers_.reserve(objects.size());
  for (const auto& o : objects) {
    if (o.images.size() != o.cams.size() || o.images.empty()) {
      throw std::invalid_argument(o.id + ": needs one camera per image and at least one view");
    }
    samplers_.emplace_back(o.mesh);
  }
  if (!state_.rng.empty()) {
    std::istringstream in(state_.rng);
    in >> rng_;
  }
}

int64_t Trainer::stage1_iterations() const {
  return static_cast<int64_t>(std::llround(cfg_.stage1_fraction * static_cast<double>(cfg_.iterations)));
}

IterationPlan Trainer::plan(std::mt19937_64& rng) const {
  IterationPlan p;
  p.views = cfg_.fixed_views > 0 ? cfg_.fixed_views : std::uniform_int_distribution<int>(1, cfg_.k_max)(rng);
  const int b = batch_objects(p.views, cfg_.batch_budget);
  const int n = static_cast<int>(objects_.size());
  if (b <= n) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < b; ++i) {
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(std::uniform_int_distribution<int>(i, n - 1)(rng))]);
    }
    p.objects.assign(idx.begin(), idx.begin() + b);
  } else {
    for (int i = 0; i < b; ++i) p.objects.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
  }
  std::bernoulli_distribution coin(0.5);
  for (int o : p.objects) {
    const int nv = static_cast<int>(objects_[static_cast<size_t>(o)].images.size());
    if (p.views > nv) {
      throw std::invalid_argument(objects_[static_cast<size_t>(o)].id + " has " + std::to_string(nv) +
                                  " views, fewer than " + std::to_string(p.views));
    }
    std::vector<int> v(static_cast<size_t>(nv));
    std::iota(v.begin(), v.end(), 0);
    for (int i = 0; i < p.views; ++i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(std::uniform_int_distribution<int>(i, nv - 1)(rng))]);
    }
    v.resize(static_cast<size_t>(p.views));
    p.view_ids.push_back(v);
    p.flips.push_back(cfg_.flip && coin(rng));
  }
  return p;
}

StepInfo Trainer::step() {
  const int64_t it = ++state_.iteration;
  if (model_.stage() == Stage::volume_only && it > stage1_iterations()) model_.begin_full_stage();
  const IterationPlan p = plan(rng_);
  const size_t b = p.objects.size();

  std::vector<const data::Image*> images;
  std::vector<bool> flips;
  std::vector<Camera> cams;
  for (size_t i = 0; i < b; ++i) {
    const data::Object& o = objects_[static_cast<size_t>(p.objects[i])];
    for (int v : p.view_ids[i]) {
      images.push_back(&o.images[static_cast<size_t>(v)]);
      flips.push_back(p.flips[i]);
      cams.push_back(p.flips[i] ? flip_horizontal(o.cams[static_cast<size_t>(v)]) : o.cams[static_cast<size_t>(v)]);
    }
  }

  // Seeds are drawn up front so labels do not depend on the worker count.
  std::vector<uint64_t> seeds(b);
  for (auto& s : seeds) s = rng_();
  std::vector<PointBatch> batches(b);
  parallel_for(b, cfg_.workers, [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      std::mt19937_64 r(seeds[i]);
      batches[i] = samplers_[static_cast<size_t>(p.objects[i])].sample(cfg_.points, r);
    }
  });
  std::vector<std::vector<Vec3>> points(b);
  std::vector<double> labels;
  for (size_t i = 0; i < b; ++i) {
    points[i] = batches[i].points;
    // The flipped images show the mirrored object.
    if (p.flips[i]) {
      for (auto& x : points[i]) x = mirror_x(x);
    }
    labels.insert(labels.end(), batches[i].labels.begin(), batches[i].labels.end());
  }

  const DType dt = model_.config().dtype;
  model_.params().zero_grad();
  const Tensor img = images_to_tensor(images, flips, dt);
  const Var logits = model_.forward(img, cams, static_cast<int64_t>(b), p.views, points);
  const Var loss = bce_with_logits(logits, Tensor::from_values({static_cast<int64_t>(labels.size())}, labels, dt));
  const double lv = loss.value().item();
  if (!std::isfinite(lv)) throw NumericError("non-finite loss at iteration " + std::to_string(it));
  backward(loss);
  const double lr = cfg_.schedule(it);
  opt_.step(model_.params().entries(), lr);

  StepInfo info;
  info.iteration = it;
  info.loss = lv;
  info.lr = lr;
  info.views = p.views;
  info.batch = static_cast<int>(b);
  info.stage = model_.stage();
  return info;
}

const TrainState& Trainer::state() {
  std::ostringstream out;
  out << rng_;
  state_.rng = out.str();
  return state_;
}

}  // namespace vpf::pipeline
