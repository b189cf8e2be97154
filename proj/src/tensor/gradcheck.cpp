#include "vpf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace vpf {
namespace {

double rel_error(double fd, double an, double noise) {
  const double excess = std::abs(fd - an) - noise;
  if (excess <= 0) return 0.0;
  return excess / std::max(std::abs(fd), std::abs(an));
}

double eval(const std::function<Var()>& loss) {
  NoGradGuard guard;
  return loss().value().item();
}

}  // namespace

std::vector<GradCheckEntry> gradcheck(const std::function<Var()>& loss,
                                      const std::vector<std::pair<std::string, Var>>& params,
                                      const GradCheckOptions& opt) {
  for (const auto& [name, p] : params) {
    if (p.dtype() != DType::f64) throw std::invalid_argument("gradcheck: parameter " + name + " is not f64");
    if (!p.is_leaf() || !p.requires_grad()) {
      throw std::invalid_argument("gradcheck: parameter " + name + " is not a trainable leaf");
    }
    Var(p).zero_grad();
  }
  backward(loss());

  std::mt19937_64 rng(opt.seed);
  std::vector<GradCheckEntry> out;
  for (const auto& [name, pc] : params) {
    Var p = pc;
    GradCheckEntry e;
    e.name = name;
    const Tensor base = p.value().clone();
    const int64_t n = base.numel();
    std::vector<double> grad(static_cast<size_t>(n), 0.0);
    if (p.grad().defined()) grad = p.grad().to_vector();

    double scale = 0.0;  // largest |L| seen, for the rounding bound
    auto perturbed = [&](const std::vector<double>& dir, double h) {
      Tensor t = base.clone();
      double* d = t.mutable_data<double>();
      for (int64_t i = 0; i < n; ++i) d[i] += h * dir[static_cast<size_t>(i)];
      p.assign(t);
      const double l = eval(loss);
      scale = std::max(scale, std::abs(l));
      return l;
    };
    auto noise = [&] {
      return opt.roundoff_ulps * std::numeric_limits<double>::epsilon() * scale / opt.step;
    };

    std::normal_distribution<double> gauss;
    std::vector<double> dir(static_cast<size_t>(n));
    double norm = 0.0;
    for (auto& v : dir) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    double an = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      dir[static_cast<size_t>(i)] /= norm;
      an += dir[static_cast<size_t>(i)] * grad[static_cast<size_t>(i)];
    }
    const double fd = (perturbed(dir, opt.step) - perturbed(dir, -opt.step)) / (2 * opt.step);
    e.directional_error = rel_error(fd, an, noise());

    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<size_t>(idx.size(), static_cast<size_t>(std::max(opt.spot_entries, 0))));
    std::vector<double> unit(static_cast<size_t>(n), 0.0);
    for (int64_t i : idx) {
      unit[static_cast<size_t>(i)] = 1.0;
      const double f = (perturbed(unit, opt.step) - perturbed(unit, -opt.step)) / (2 * opt.step);
      unit[static_cast<size_t>(i)] = 0.0;
      e.max_entry_error = std::max(e.max_entry_error, rel_error(f, grad[static_cast<size_t>(i)], noise()));
    }
    p.assign(base);
    out.push_back(e);
  }
  return out;
}

double max_gradcheck_error(const std::vector<GradCheckEntry>& entries) {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.error());
  return m;
}

}  // namespace vpf
