#include <numeric>
#include <stdexcept>

#include "vpf/nn.hpp"

namespace vpf::nn {

Var ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
  Var v(std::move(t), true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, v);
  return v;
}

Var ParamStore::kaiming(const std::string& name, const Shape& shape, int64_t fan_in, double gain) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng_);
  return add(name, Tensor::from_values(shape, v, default_dtype()));
}

Var ParamStore::constant(const std::string& name, const Shape& shape, double value) {
  return add(name, Tensor::full(shape, value, default_dtype()));
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return entries_[it->second].second;
}

std::vector<std::pair<std::string, Var>> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<std::pair<std::string, Var>> out;
  for (const auto& e : entries_) {
    if (e.first.compare(0, prefix.size(), prefix) == 0) out.push_back(e);
  }
  return out;
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

Linear::Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, double gain)
    : w(ps.kaiming(name + ".w", {in, out}, in, gain)), b(ps.constant(name + ".b", {out}, 0.0)) {}

Norm::Norm(ParamStore& ps, const std::string& name, int64_t c)
    : gamma(ps.constant(name + ".gamma", {c}, 1.0)), beta(ps.constant(name + ".beta", {c}, 0.0)) {}

int norm_groups(int64_t channels) { return static_cast<int>(std::gcd<int64_t>(8, channels)); }

}  // namespace vpf::nn
