#include <cstring>
#include <fstream>
#include <stdexcept>

#include "vpf/pipeline.hpp"

namespace vpf::pipeline {
namespace {

constexpr char kMagic[4] = {'V', 'P', 'F', 'K'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path);
  }
  template <class T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const Tensor& t) {
    pod(static_cast<uint8_t>(t.dtype() == DType::f64 ? 1 : 0));
    pod(static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) pod(d);
    out_.write(static_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.numel() * dtype_size(t.dtype())));
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("short write to " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot read checkpoint " + path);
  }
  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<uint32_t>();
    if (n > (1u << 30)) corrupt();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }
  Tensor tensor() {
    const DType dt = pod<uint8_t>() ? DType::f64 : DType::f32;
    const auto rank = pod<uint32_t>();
    if (rank > 8) corrupt();
    Shape shape(rank);
    for (auto& d : shape) {
      d = pod<int64_t>();
      if (d < 0) corrupt();
    }
    Tensor t(shape, dt);
    const size_t bytes = static_cast<size_t>(t.numel()) * dtype_size(dt);
    visit_dtype(dt, [&](auto tag) {
      using T = decltype(tag);
      in_.read(reinterpret_cast<char*>(t.mutable_data<T>()), static_cast<std::streamsize>(bytes));
    });
    check();
    return t;
  }
  [[noreturn]] void corrupt() const { throw std::runtime_error(path_ + ": corrupt checkpoint"); }

 private:
  void check() {
    if (!in_) throw std::runtime_error(path_ + ": truncated checkpoint");
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, const AdamW& opt, const TrainState& st) {
  const std::string tmp = path + ".tmp";
  {
    Writer w(tmp);
    for (char c : kMagic) w.pod(c);
    w.pod(kVersion);
    w.str(model_config_to_json(m.config()));
    w.pod(static_cast<uint8_t>(m.stage() == Stage::full));
    w.pod(st.iteration);
    w.str(st.rng);
    const auto& entries = m.params().entries();
    w.pod(static_cast<uint32_t>(entries.size()));
    for (const auto& [name, v] : entries) {
      w.str(name);
      w.tensor(v.value());
    }
    const auto& o = opt.options();
    w.pod(o.beta1);
    w.pod(o.beta2);
    w.pod(o.eps);
    w.pod(o.weight_decay);
    w.pod(static_cast<uint32_t>(opt.slots().size()));
    for (const auto& [name, s] : opt.slots()) {
      w.str(name);
      w.pod(s.t);
      w.tensor(s.m);
      w.tensor(s.v);
    }
    w.finish();
  }
  std::rename(tmp.c_str(), path.c_str());
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  for (char& c : magic) c = r.pod<char>();
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path + ": not a VPFK checkpoint");
  if (r.pod<uint32_t>() != kVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
  Checkpoint ck;
  ck.model = std::make_unique<Model>(model_config_from_json(r.str()));
  ck.model->set_stage(r.pod<uint8_t>() ? Stage::full : Stage::volume_only);
  ck.state.iteration = r.pod<int64_t>();
  ck.state.rng = r.str();
  const auto n = r.pod<uint32_t>();
  if (n != ck.model->params().entries().size()) {
    throw std::runtime_error(path + ": parameter count does not match the stored configuration");
  }
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Tensor t = r.tensor();
    Var p = ck.model->params().get(name);
    if (t.shape() != p.shape() || t.dtype() != p.dtype()) throw std::runtime_error(path + ": mismatched " + name);
    p.assign(std::move(t));
  }
  AdamWOptions o;
  o.beta1 = r.pod<double>();
  o.beta2 = r.pod<double>();
  o.eps = r.pod<double>();
  o.weight_decay = r.pod<double>();
  ck.optimizer = AdamW(o);
  const auto ns = r.pod<uint32_t>();
  for (uint32_t i = 0; i < ns; ++i) {
    const std::string name = r.str();
    AdamW::Slot s;
    s.t = r.pod<int64_t>();
    s.m = r.tensor();
    s.v = r.tensor();
    ck.optimizer.slots()[name] = std::move(s);
  }
  return ck;
}

}  // namespace vpf::pipeline
