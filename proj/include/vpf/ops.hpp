#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vpf/autodiff.hpp"

// Differentiable tensor operations. Layouts are channels-last throughout:
// images are [B, H, W, C], volumes [B, D, H, W, C].
namespace vpf {

// Elementwise with trailing-dimension broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);

/// Result shape of broadcasting a against b (trailing alignment).
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Reductions. sum/mean return shape [1].
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_over_axis(const Var& a, int axis);
Var mean_over_axis(const Var& a, int axis);

/// Batched matrix product a[..., m, k] x b[..., k, n] with broadcast batch dims.
Var matmul(const Var& a, const Var& b);
/// x[..., in] * w[in, out] + bias[out]; bias may be undefined.
Var linear(const Var& x, const Var& w, const Var& bias);

Var reshape(const Var& a, Shape shape);
Var permute(const Var& a, const std::vector<int>& perm);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, int64_t start, int64_t length);
Var softmax(const Var& a, int axis);

/// 3D cross-correlation. x [B, D, H, W, Cin], w [KD, KH, KW, Cin, Cout].
Var conv3d(const Var& x, const Var& w, const Var& bias, std::array<int, 3> stride,
           std::array<int, 3> padding);
/// 2D cross-correlation. x [B, H, W, Cin], w [KH, KW, Cin, Cout].
Var conv2d(const Var& x, const Var& w, const Var& bias, std::array<int, 2> stride,
           std::array<int, 2> padding);
/// Fractionally strided convolution with 2x2x2 kernel and stride 2.
/// x [B, D, H, W, Cin], w [Cin, 2, 2, 2, Cout] -> [B, 2D, 2H, 2W, Cout].
Var conv_transpose3d_k2s2(const Var& x, const Var& w, const Var& bias);

/// Group normalization over channels-last input [B, ..., C]: statistics per
/// (batch item, channel group) across all spatial positions.
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Normalization over the last axis.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Scaled dot-product multi-head attention core on [G, L, C] tensors:
/// G independent sets/sequences of L tokens each.
Var attention(const Var& q, const Var& k, const Var& v, int heads);

using AttentionObserver = std::function<void(int64_t groups, int64_t seq_len)>;
/// Installs an observer notified on every attention() call on this thread.
class ScopedAttentionObserver {
 public:
  explicit ScopedAttentionObserver(AttentionObserver fn);
  ~ScopedAttentionObserver();
  ScopedAttentionObserver(const ScopedAttentionObserver&) = delete;
  ScopedAttentionObserver& operator=(const ScopedAttentionObserver&) = delete;

 private:
  AttentionObserver saved_;
};

/// Sparse weighted gather: row r of the output is sum_t weight[r*taps+t] *
/// src_row(index[r*taps+t]); index -1 contributes nothing.
struct SamplePlan {
  int64_t rows = 0;
  int taps = 0;
  std::vector<int64_t> index;
  std::vector<double> weight;
};
/// src is viewed as [M, C] with C its last extent. Returns [plan.rows, C].
Var gather_weighted(const Var& src, std::shared_ptr<const SamplePlan> plan);

/// Mean binary cross-entropy from logits in the log-sum-exp form.
Var bce_with_logits(const Var& logits, const Tensor& labels);

/// Wraps a constant tensor.
inline Var constant(Tensor t) { return Var(std::move(t), false); }

}  // namespace vpf
