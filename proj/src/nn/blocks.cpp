#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vpf/nn.hpp"

namespace vpf::nn {

ImageEncoder::ImageEncoder(ParamStore& ps, const std::string& name, const ImageEncoderConfig& cfg) {
  if (cfg.widths.size() != 4) throw std::invalid_argument("image encoder needs 4 widths");
  const int strides[4] = {2, 1, 2, 1};
  int64_t in = 3;
  for (size_t i = 0; i < 4; ++i) {
    const std::string p = name + ".conv" + std::to_string(i);
    Block b;
    const int64_t out = cfg.widths[i];
    b.w = ps.kaiming(p + ".w", {3, 3, in, out}, 9 * in);
    b.b = ps.constant(p + ".b", {out}, 0.0);
    b.norm = Norm(ps, p + ".gn", out);
    b.stride = strides[i];
    convs_.push_back(b);
    in = out;
  }
}

Var ImageEncoder::operator()(const Var& images) const {
  if (images.rank() != 4 || images.dim(3) != 3) {
    throw ShapeError("image encoder expects [B, H, W, 3], got " + shape_str(images.shape()));
  }
  const int64_t h = images.dim(1), w = images.dim(2);
  if (h % kStride != 0 || w % kStride != 0) {
    const int64_t ph = (kStride - h % kStride) % kStride, pw = (kStride - w % kStride) % kStride;
    throw ShapeError("image size " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by " +
                     std::to_string(kStride) + "; pad by " + std::to_string(ph) + " rows and " +
                     std::to_string(pw) + " columns");
  }
  Var x = images;
  for (const auto& b : convs_) {
    x = conv2d(x, b.w, b.b, {b.stride, b.stride}, {1, 1});
    x = relu(group_norm(x, norm_groups(x.dim(-1)), b.norm.gamma, b.norm.beta));
  }
  return x;
}

TransformerLayer::TransformerLayer(ParamStore& ps, const std::string& name, int64_t c, int heads_,
                                   int64_t ff)
    : ln1(ps, name + ".ln1", c),
      ln2(ps, name + ".ln2", c),
      q(ps, name + ".q", c, c, 1.0),
      k(ps, name + ".k", c, c, 1.0),
      v(ps, name + ".v", c, c, 1.0),
      o(ps, name + ".o", c, c, 1.0),
      ff1(ps, name + ".ff1", c, ff),
      ff2(ps, name + ".ff2", ff, c, 1.0),
      heads(heads_) {
  if (c % heads != 0) {
    throw std::invalid_argument("transformer width " + std::to_string(c) + " not divisible by " +
                                std::to_string(heads) + " heads");
  }
}

Var TransformerLayer::operator()(const Var& x) const {
  const Var h = layer_norm(x, ln1.gamma, ln1.beta);
  Var y = add(x, o(attention(q(h), k(h), v(h), heads)));
  const Var h2 = layer_norm(y, ln2.gamma, ln2.beta);
  return add(y, ff2(relu(ff1(h2))));
}

SequenceAttention::SequenceAttention(ParamStore& ps, const std::string& name, int64_t c, int heads, int64_t ff,
                                     int bands_)
    : proj(ps, name + ".proj", c + 2 * bands_, c, 1.0), layer(ps, name + ".tf", c, heads, ff), bands(bands_) {}

Tensor SequenceAttention::position_codes(int64_t len, int bands, DType dt) {
  std::vector<double> v;
  v.reserve(static_cast<size_t>(len * 2 * bands));
  for (int64_t p = 0; p < len; ++p) {
    const double t = static_cast<double>(p) / static_cast<double>(len);
    double f = std::numbers::pi;
    for (int l = 0; l < bands; ++l, f *= 2) {
      v.push_back(std::sin(f * t));
      v.push_back(std::cos(f * t));
    }
  }
  return Tensor::from_values({len, 2 * bands}, v, dt);
}

Var SequenceAttention::operator()(const Var& x) const {
  // proj(x ++ pe) = x * W[:c] + pe * W[c:] + b; the position term is shared by all groups.
  const int64_t c = x.dim(-1), len = x.dim(1);
  const Var wx = slice(proj.w, 0, 0, c);
  const Var wp = slice(proj.w, 0, c, 2 * bands);
  const Var pos = linear(constant(position_codes(len, bands, x.dtype())), wp, proj.b);
  return layer(add(linear(x, wx, Var()), pos));
}

AttSets::AttSets(ParamStore& ps, const std::string& name, int64_t c, int n_blocks)
    : score(ps, name + ".score", c, c, 1.0) {
  for (int i = 0; i < n_blocks; ++i) {
    const std::string p = name + ".block" + std::to_string(i);
    blocks.emplace_back(Linear(ps, p + ".fc1", c, c), Linear(ps, p + ".fc2", c, c, 1.0));
  }
}

Var AttSets::operator()(const Var& x) const {
  if (x.rank() != 3) throw ShapeError("attsets expects [G, N, c], got " + shape_str(x.shape()));
  Var h = x;
  for (const auto& [fc1, fc2] : blocks) h = add(h, fc2(relu(fc1(h))));
  const Var w = softmax(score(h), 1);
  return sum_over_axis(mul(w, x), 1);
}

ResBlock3d::ResBlock3d(ParamStore& ps, const std::string& name, int64_t c)
    : w1(ps.kaiming(name + ".conv1.w", {3, 3, 3, c, c}, 27 * c)),
      b1(ps.constant(name + ".conv1.b", {c}, 0.0)),
      w2(ps.kaiming(name + ".conv2.w", {3, 3, 3, c, c}, 27 * c)),
      b2(ps.constant(name + ".conv2.b", {c}, 0.0)),
      n1(ps, name + ".gn1", c),
      n2(ps, name + ".gn2", c) {}

Var ResBlock3d::operator()(const Var& x) const {
  const int g = norm_groups(x.dim(-1));
  Var h = relu(group_norm(conv3d(x, w1, b1, {1, 1, 1}, {1, 1, 1}), g, n1.gamma, n1.beta));
  h = group_norm(conv3d(h, w2, b2, {1, 1, 1}, {1, 1, 1}), g, n2.gamma, n2.beta);
  return relu(add(x, h));
}

OccupancyDecoder::OccupancyDecoder(ParamStore& ps, const std::string& name, int64_t c, int64_t hidden) {
  const int64_t pre_skip = c < hidden ? hidden - c : hidden;
  int64_t in = c;
  for (int i = 0; i < 8; ++i) {
    int64_t out = hidden;
    if (i == kSkipAfter - 1) out = pre_skip;
    if (i == 7) out = 1;
    if (i == kSkipAfter) in += c;
    layers.emplace_back(ps, name + ".fc" + std::to_string(i), in, out, i == 7 ? 1.0 : std::sqrt(2.0));
    in = out;
  }
}

Var OccupancyDecoder::operator()(const Var& feat) const {
  Var h = feat;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (static_cast<int>(i) == kSkipAfter) h = concat({h, feat}, -1);
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return reshape(h, {h.dim(0)});
}

void OccupancyDecoder::zero_last_layer() {
  auto& last = layers.back();
  last.w.assign(Tensor(last.w.shape(), last.w.dtype()));
  last.b.assign(Tensor(last.b.shape(), last.b.dtype()));
}

}  // namespace vpf::nn
