#include <cmath>
#include <stdexcept>

#include "vpf/pipeline.hpp"

namespace vpf::pipeline {

void AdamW::step(const std::vector<std::pair<std::string, Var>>& params, double lr) {
  const double b1 = opt_.beta1, b2 = opt_.beta2;
  for (const auto& [name, p] : params) {
    const Tensor& g = p.grad();
    if (!g.defined()) continue;
    Slot& s = slots_[name];
    if (!s.m.defined()) {
      s.m = Tensor::zeros(p.shape(), p.dtype());
      s.v = Tensor::zeros(p.shape(), p.dtype());
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    Tensor next = p.value().clone();
    visit_dtype(p.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const Tensor gg = g.dtype() == p.dtype() ? g : g.to(p.dtype());
      const T* gp = gg.data<T>();
      T* m = s.m.mutable_data<T>();
      T* v = s.v.mutable_data<T>();
      T* w = next.mutable_data<T>();
      for (int64_t i = 0; i < next.numel(); ++i) {
        const double gi = gp[i];
        const double mi = b1 * m[i] + (1 - b1) * gi;
        const double vi = b2 * v[i] + (1 - b2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / c1, vhat = vi / c2;
        w[i] = static_cast<T>(w[i] - lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * w[i]));
      }
    });
    Var(p).assign(std::move(next));
  }
}

double LrSchedule::operator()(int64_t it) const {
  if (warmup < 1 || decay_end < warmup) throw std::invalid_argument("schedule: need 1 <= warmup <= decay_end");
  if (it <= 1) return lr_min;
  if (it <= warmup) {
    return warmup == 1 ? lr_max
                       : lr_min + (lr_max - lr_min) * static_cast<double>(it - 1) / static_cast<double>(warmup - 1);
  }
  if (it <= decay_end) {
    return lr_max - (lr_max - lr_min) * static_cast<double>(it - warmup) / static_cast<double>(decay_end - warmup);
  }
  return lr_min;
}

LrSchedule LrSchedule::scaled(int64_t total, double lr_min, double lr_max) {
  LrSchedule s;
  s.lr_min = lr_min;
  s.lr_max = lr_max;
  s.decay_end = std::max<int64_t>(1, total);
  s.warmup = std::max<int64_t>(1, total / 10);
  return s;
}

int batch_objects(int views, int budget) {
  if (views < 1) throw std::invalid_argument("views per object must be at least 1");
  if (budget < views) throw std::invalid_argument("batch budget smaller than the view count");
  return budget / views;
}

}  // namespace vpf::pipeline
