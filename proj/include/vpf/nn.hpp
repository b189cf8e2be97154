#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vpf/ops.hpp"

namespace vpf::nn {

/// Named, ordered set of trainable leaves. Names are unique; insertion order
/// is the checkpoint order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : rng_(seed) {}

  /// Uniform in [-bound, bound] with bound = gain * sqrt(3 / fan_in).
  Var kaiming(const std::string& name, const Shape& shape, int64_t fan_in, double gain = std::sqrt(2.0));
  Var constant(const std::string& name, const Shape& shape, double value);

  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  /// Parameters whose name starts with `prefix`.
  std::vector<std::pair<std::string, Var>> with_prefix(const std::string& prefix) const;
  int64_t total_size() const;
  void zero_grad();

 private:
  Var add(const std::string& name, Tensor t);
  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Var>> entries_;
  std::map<std::string, size_t> index_;
};

struct Linear {
  Var w, b;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, double gain = std::sqrt(2.0));
  Var operator()(const Var& x) const { return linear(x, w, b); }
  int64_t in() const { return w.dim(0); }
  int64_t out() const { return w.dim(1); }
};

struct Norm {
  Var gamma, beta;
  Norm() = default;
  Norm(ParamStore& ps, const std::string& name, int64_t c);
};

/// Group count used for a channel width: 8 when it divides, else the gcd.
int norm_groups(int64_t channels);

/// Four conv-norm-relu blocks with strides 2, 1, 2, 1 (total stride 4).
struct ImageEncoderConfig {
  std::vector<int> widths{32, 32, 64, 64};
};

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ParamStore& ps, const std::string& name, const ImageEncoderConfig& cfg);
  /// images [B, H, W, 3] -> [B, H/4, W/4, widths.back()].
  Var operator()(const Var& images) const;
  static constexpr int kStride = 4;
  int64_t out_channels() const { return convs_.back().w.dim(3); }

 private:
  struct Block {
    Var w, b;
    Norm norm;
    int stride = 1;
  };
  std::vector<Block> convs_;
  friend struct ImageEncoderAccess;
};

/// Pre-norm transformer layer on [G, L, c]: x += MHA(LN(x)); x += FF(LN(x)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(ParamStore& ps, const std::string& name, int64_t c, int heads, int64_t ff);
  Var operator()(const Var& x) const;

  Norm ln1, ln2;
  Linear q, k, v, o, ff1, ff2;
  int heads = 8;
};

/// Transformer layer over ordered tokens: concatenates a sinusoidal code of
/// position p / L (7 bands) and projects back to c before attending.
class SequenceAttention {
 public:
  SequenceAttention() = default;
  SequenceAttention(ParamStore& ps, const std::string& name, int64_t c, int heads, int64_t ff, int bands = 7);
  Var operator()(const Var& x) const;
  /// [L, 2 * bands] position features.
  static Tensor position_codes(int64_t len, int bands, DType dt);

  Linear proj;
  TransformerLayer layer;
  int bands = 7;
};

/// Attention-weighted sum over a set axis. x [G, N, c] -> [G, c].
/// Scores come from residual FC blocks applied to each element
/// independently, normalized across N per channel.
class AttSets {
 public:
  AttSets() = default;
  AttSets(ParamStore& ps, const std::string& name, int64_t c, int blocks = 3);
  Var operator()(const Var& x) const;

  std::vector<std::pair<Linear, Linear>> blocks;
  Linear score;
};

/// relu(x + GN(conv(relu(GN(conv(x)))))) with 3x3x3 kernels.
class ResBlock3d {
 public:
  ResBlock3d() = default;
  ResBlock3d(ParamStore& ps, const std::string& name, int64_t c);
  Var operator()(const Var& x) const;

  Var w1, b1, w2, b2;
  Norm n1, n2;
};

/// Eight fully connected layers of width `hidden`; the input feature is
/// concatenated back in after the fourth layer; one logit per row.
class OccupancyDecoder {
 public:
  OccupancyDecoder() = default;
  OccupancyDecoder(ParamStore& ps, const std::string& name, int64_t c, int64_t hidden = 128);
  /// feat [Q, c] -> logits [Q].
  Var operator()(const Var& feat) const;
  void zero_last_layer();

  std::vector<Linear> layers;
  static constexpr int kSkipAfter = 4;
};

}  // namespace vpf::nn
