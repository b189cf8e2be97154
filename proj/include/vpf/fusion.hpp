#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vpf/geometry.hpp"
#include "vpf/nn.hpp"

namespace vpf {

enum class Arch { A, B, C, D };
Arch parse_arch(const std::string& s);
char arch_char(Arch a);

/// Rows of (view, world point) pairs sampled from per-view feature maps.
/// maps are [V, Hf, Wf, C]; row r reads view views[r].
struct ViewSampling {
  std::shared_ptr<SamplePlan> plan;
  Tensor depth_code;  // [rows, 2 * bands]
};
ViewSampling make_view_sampling(const std::vector<Camera>& cams, const std::vector<int64_t>& views,
                                const std::vector<Vec3>& points, int64_t fh, int64_t fw, int bands,
                                double side, DType dt);

/// Image features plus encoded depth -> Linear -> relu -> Linear. Shared by
/// the volume and pixel paths.
class TokenMlp {
 public:
  TokenMlp() = default;
  TokenMlp(nn::ParamStore& ps, const std::string& name, int64_t img_c, int bands, int64_t c);
  /// maps [V, Hf, Wf, Cimg] -> [rows, c].
  Var operator()(const Var& maps, const ViewSampling& s) const;

  nn::Linear fc1, fc2;
};

/// Per-view d^3 x c volumes from image feature maps.
class VolumeBuilder {
 public:
  VolumeBuilder() = default;
  VolumeBuilder(nn::ParamStore& ps, const std::string& name, const GridSpec& grid, int64_t img_c, int bands,
                int64_t c);
  /// maps [V, Hf, Wf, Cimg], one camera per view -> [V, d, d, d, c].
  Var operator()(const Var& maps, const std::vector<Camera>& cams) const;

  GridSpec grid;
  int bands = 11;
  TokenMlp mlp;
};

/// Number of resolution levels: log2(d) - 1, at least 1.
int unet_levels(int d);

/// Shared-weight 3D U-Net applied to each view: widths c * 2^level.
class UNet3d {
 public:
  using Hook = std::function<Var(const Var&, int level)>;
  UNet3d() = default;
  UNet3d(nn::ParamStore& ps, const std::string& name, int d, int64_t c);
  /// x [V, d, d, d, c]. `after_encoder` (optional) rewrites each encoder
  /// level's output before it is used for the skip and the next level.
  Var operator()(const Var& x, const Hook& after_encoder = {}) const;
  int levels() const { return static_cast<int>(enc_.size()); }

 private:
  std::vector<nn::ResBlock3d> enc_, dec_;
  std::vector<std::pair<Var, Var>> down_, up_;
  std::vector<nn::Linear> merge_;
};

struct FeatureStats {
  int level = 0;
  double mean = 0, stddev = 0;
};

/// Optional instrumentation filled by VolumeFusion.
struct FusionTrace {
  int attention_blocks = 0;
  std::vector<FeatureStats> stats;
};

struct FusionConfig {
  Arch arch = Arch::D;
  int d = 8;
  int64_t c = 64;
  int heads = 8;
  int64_t ff = 128;
};

/// Fuses V = B * N per-view volumes (object-major) into B volumes.
class VolumeFusion {
 public:
  VolumeFusion() = default;
  VolumeFusion(nn::ParamStore& ps, const std::string& name, const FusionConfig& cfg);
  /// vols [B * N, d, d, d, c] -> [B, d, d, d, c].
  Var operator()(const Var& vols, int64_t batch, int64_t views, FusionTrace* trace = nullptr) const;
  const FusionConfig& config() const { return cfg_; }

 private:
  Var fuse_a(const Var& x, int64_t b, int64_t n) const;
  Var fuse_b(const Var& x, int64_t b, int64_t n) const;
  Var fuse_c(const Var& x, int64_t b, int64_t n) const;
  Var fuse_d(const Var& x, int64_t b, int64_t n, FusionTrace* trace) const;

  FusionConfig cfg_;
  UNet3d unet_;
  nn::AttSets attsets_;
  std::vector<nn::TransformerLayer> set_layers_;
  struct Axial {
    nn::TransformerLayer views;
    nn::SequenceAttention axes[3];
  };
  std::vector<Axial> axial_;
  std::vector<std::vector<nn::TransformerLayer>> scale_attn_;
};

/// [B * N, S..., c] (object-major views) -> [B * prod(S), N, c] token sets.
Var to_view_sets(const Var& x, int64_t batch, int64_t views);
/// Inverse of to_view_sets; `spatial` lists the S extents.
Var from_view_sets(const Var& sets, int64_t batch, int64_t views, const Shape& spatial);

/// Pixel-aligned fusion of per-view tokens for each query point.
class PixelFusion {
 public:
  PixelFusion() = default;
  PixelFusion(nn::ParamStore& ps, const std::string& name, int64_t img_c, int bands, int64_t c, int heads,
              int64_t ff, int layers = 3);
  /// maps [B * N, Hf, Wf, Cimg]; points[b] are object b's queries (all the
  /// same count Q) -> [B * Q, c].
  Var operator()(const Var& maps, const std::vector<Camera>& cams, const std::vector<std::vector<Vec3>>& points,
                 int64_t views, double side) const;
  /// tokens [G, N, c] -> [G, c] before the output projection.
  Var fuse_tokens(const Var& tokens) const;
  void zero_output();

  int bands = 11;
  bool mean_only = false;
  TokenMlp mlp;
  std::vector<nn::TransformerLayer> layers;
  nn::Linear out;
};

}  // namespace vpf
