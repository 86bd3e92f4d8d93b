// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/encoder.hpp"

#include <memory>

namespace sgtn {
namespace {

IndexMap make_index(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

Shape to_nhwc(const Shape& s, const char* what) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return s;
  throw InvalidShape(std::string(what) + ": expected HWC or NHWC input, got " + shape_str(s));
}

template <typename T>
bool frozen_zero(const Parameter<T>* p) {
  return p && !p->trainable && p->value[0] == T{0};
}

}  // namespace

const char* variant_name(EncoderVariant v) noexcept {
  switch (v) {
    case EncoderVariant::kLswin: return "lswin";
    case EncoderVariant::kSwinOnly: return "swin_only";
    case EncoderVariant::kLrcOnly: return "lrc_only";
  }
  return "?";
}

EncoderVariant parse_variant(const std::string& name) {
  if (name == "lswin") return EncoderVariant::kLswin;
  if (name == "swin_only") return EncoderVariant::kSwinOnly;
  if (name == "lrc_only") return EncoderVariant::kLrcOnly;
  throw InvalidArgument("unknown encoder variant '" + name + "' (expected lswin, swin_only or lrc_only)");
}

void EncoderConfig::validate() const {
  if (embed_dim < 1 || window < 1 || mlp_ratio < 1) throw InvalidArgument("encoder: embed_dim, window and mlp_ratio must be positive");
  for (int s = 0; s < 4; ++s) {
    if (depths[static_cast<std::size_t>(s)] < 1) throw InvalidArgument("encoder: every stage needs at least one block");
    AttentionConfig{stage_dim(s), heads[static_cast<std::size_t>(s)], window, window / 2}.validate();
  }
}

template <typename T>
Mlp<T> Mlp<T>::create(ParameterStore<T>& store, const std::string& name, int dim, int ratio, Initializer& init) {
  return {Linear<T>::create(store, name + ".fc1", dim, dim * ratio, init),
          Linear<T>::create(store, name + ".fc2", dim * ratio, dim, init)};
}

template <typename T>
Var<T> Mlp<T>::operator()(Graph<T>& g, Var<T> x) const {
  return fc2(g, gelu(fc1(g, x)));
}

template <typename T>
SwinPairParams<T> SwinPairParams<T>::create(ParameterStore<T>& store, const std::string& name, int dim, int heads,
                                            int window, int mlp_ratio, bool scale_qk, Initializer& init) {
  SwinPairParams p;
  p.wcfg = AttentionConfig{dim, heads, window, 0, scale_qk};
  p.swcfg = AttentionConfig{dim, heads, window, window / 2, scale_qk};
  p.norm1 = LayerNorm<T>::create(store, name + ".norm1", dim);
  p.wmsa = AttentionParams<T>::create(store, name + ".wmsa", p.wcfg, init, true);
  p.norm2 = LayerNorm<T>::create(store, name + ".norm2", dim);
  p.mlp1 = Mlp<T>::create(store, name + ".mlp1", dim, mlp_ratio, init);
  p.norm3 = LayerNorm<T>::create(store, name + ".norm3", dim);
  p.swmsa = AttentionParams<T>::create(store, name + ".swmsa", p.swcfg, init, true);
  p.norm4 = LayerNorm<T>::create(store, name + ".norm4", dim);
  p.mlp2 = Mlp<T>::create(store, name + ".mlp2", dim, mlp_ratio, init);
  return p;
}

template <typename T>
LrcPairParams<T> LrcPairParams<T>::create(ParameterStore<T>& store, const std::string& name, int dim, int heads,
                                          int mlp_ratio, bool scale_qk, Initializer& init) {
  LrcPairParams p;
  p.vcfg = AttentionConfig{dim, heads, 0, 0, scale_qk, Axis::kColumn};
  p.hcfg = AttentionConfig{dim, heads, 0, 0, scale_qk, Axis::kRow};
  p.vmsa = AttentionParams<T>::create(store, name + ".vmsa", p.vcfg, init, false);
  p.norm1 = LayerNorm<T>::create(store, name + ".norm1", dim);
  p.mlp1 = Mlp<T>::create(store, name + ".mlp1", dim, mlp_ratio, init);
  p.hmsa = AttentionParams<T>::create(store, name + ".hmsa", p.hcfg, init, false);
  p.norm2 = LayerNorm<T>::create(store, name + ".norm2", dim);
  p.mlp2 = Mlp<T>::create(store, name + ".mlp2", dim, mlp_ratio, init);
  return p;
}

template <typename T>
LswinBlockParams<T> LswinBlockParams<T>::create(ParameterStore<T>& store, const std::string& name, int dim, int heads,
                                                int window, int mlp_ratio, bool scale_qk, EncoderVariant variant,
                                                Initializer& init) {
  LswinBlockParams p;
  p.variant = variant;
  if (variant != EncoderVariant::kLrcOnly) {
    p.swin = SwinPairParams<T>::create(store, name + ".swin", dim, heads, window, mlp_ratio, scale_qk, init);
  }
  if (variant != EncoderVariant::kSwinOnly) {
    p.lrc = LrcPairParams<T>::create(store, name + ".lrc", dim, heads, mlp_ratio, scale_qk, init);
  }
  const bool lrc_only = variant == EncoderVariant::kLrcOnly;
  p.gate.alpha = &store.create(name + ".alpha", Tensor<T>({1}, lrc_only ? T{0} : T{1}), !lrc_only);
  // With alpha frozen at zero the block would start as the zero map, so the
  // LRC-only encoder begins from beta = 1.
  p.gate.beta = &store.create(name + ".beta", Tensor<T>({1}, lrc_only ? T{1} : T{0}),
                              variant != EncoderVariant::kSwinOnly);
  return p;
}

template <typename T>
PatchMergeParams<T> PatchMergeParams<T>::create(ParameterStore<T>& store, const std::string& name, int dim,
                                                Initializer& init) {
  return {LayerNorm<T>::create(store, name + ".norm", 4 * dim),
          Linear<T>::create(store, name + ".reduce", 4 * dim, 2 * dim, init, false)};
}

template <typename T>
FeatureFusionParams<T> FeatureFusionParams<T>::create(ParameterStore<T>& store, const std::string& name, int deep_dim,
                                                      int lateral_dim, Initializer& init) {
  FeatureFusionParams p;
  p.up_kernel = &store.create(name + ".up.kernel", init.kaiming<T>(name + ".up.kernel", {deep_dim, lateral_dim, 2, 2}, deep_dim));
  p.up_bias = &store.create(name + ".up.bias", Tensor<T>({lateral_dim}));
  p.conv1 = ConvBnRelu<T>::create(store, name + ".conv1", 2 * lateral_dim, lateral_dim, 3, init);
  p.conv2 = ConvBnRelu<T>::create(store, name + ".conv2", lateral_dim, lateral_dim, 3, init);
  return p;
}

template <typename T>
Var<T> patch_embed(Graph<T>& g, Var<T> image, const Linear<T>& proj) {
  const Shape s = to_nhwc(image.shape(), "patch_embed");
  const int n = s[0], h = s[1], w = s[2], c = s[3];
  if (h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0) {
    throw InvalidShape("patch_embed: image extents " + shape_str(image.shape()) + " are not divisible by 4");
  }
  const int ph = h / 4, pw = w / 4, pd = 16 * c;
  std::vector<int> idx(static_cast<std::size_t>(n) * ph * pw * pd);
  std::size_t o = 0;
  for (int b = 0; b < n; ++b)
    for (int py = 0; py < ph; ++py)
      for (int px = 0; px < pw; ++px)
        for (int dy = 0; dy < 4; ++dy)
          for (int dx = 0; dx < 4; ++dx)
            for (int ch = 0; ch < c; ++ch) idx[o++] = ((b * h + py * 4 + dy) * w + px * 4 + dx) * c + ch;
  Var<T> patches = gather(image, make_index(std::move(idx)), {n, ph, pw, pd});
  return proj(g, patches);
}

template <typename T>
Var<T> swin_pair(Graph<T>& g, Var<T> x, const SwinPairParams<T>& p) {
  Var<T> z = add(wmsa(p.norm1(g, x), p.wcfg, p.wmsa), x);
  z = add(p.mlp1(g, p.norm2(g, z)), z);
  Var<T> zs = add(swmsa(p.norm3(g, z), p.swcfg, p.swmsa), z);
  return add(p.mlp2(g, p.norm4(g, zs)), zs);
}

template <typename T>
Var<T> lrc_pair(Graph<T>& g, Var<T> x, const LrcPairParams<T>& p) {
  const T eps = static_cast<T>(1e-5);
  Var<T> z = add(axial_msa(axial_instance_norm(x, Axis::kColumn, eps), p.vcfg, p.vmsa), x);
  z = add(p.mlp1(g, p.norm1(g, z)), z);
  Var<T> zh = add(axial_msa(axial_instance_norm(z, Axis::kRow, eps), p.hcfg, p.hmsa), z);
  return add(p.mlp2(g, p.norm2(g, zh)), zh);
}

template <typename T>
Var<T> lswin_block(Graph<T>& g, Var<T> x, const LswinBlockParams<T>& p) {
  const bool use_swin = p.variant != EncoderVariant::kLrcOnly && !frozen_zero(p.gate.alpha);
  const bool use_lrc = p.variant != EncoderVariant::kSwinOnly && !frozen_zero(p.gate.beta);
  Var<T> out;
  if (use_swin) out = mul_scalar(g.param(*p.gate.alpha), swin_pair(g, x, p.swin));
  if (use_lrc) {
    Var<T> l = mul_scalar(g.param(*p.gate.beta), lrc_pair(g, x, p.lrc));
    out = out.valid() ? add(out, l) : l;
  }
  if (!out.valid()) throw InvalidArgument("lswin_block: both paths are frozen at zero");
  return out;
}

template <typename T>
Var<T> patch_merge(Graph<T>& g, Var<T> x, const PatchMergeParams<T>& p) {
  const Shape s = to_nhwc(x.shape(), "patch_merge");
  const int n = s[0], h = s[1], w = s[2], c = s[3];
  if (h % 2 != 0 || w % 2 != 0) throw InvalidShape("patch_merge: odd extents " + shape_str(x.shape()));
  const int oh = h / 2, ow = w / 2;
  static constexpr int kOffsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<int> idx(static_cast<std::size_t>(n) * oh * ow * 4 * c);
  std::size_t o = 0;
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        for (const auto& off : kOffsets)
          for (int ch = 0; ch < c; ++ch) idx[o++] = ((b * h + 2 * y + off[0]) * w + 2 * xx + off[1]) * c + ch;
  Shape out_shape = x.shape().size() == 3 ? Shape{oh, ow, 4 * c} : Shape{n, oh, ow, 4 * c};
  Var<T> merged = gather(x, make_index(std::move(idx)), out_shape);
  return p.reduce(g, p.norm(g, merged));
}

template <typename T>
Var<T> feature_fusion_layer(Graph<T>& g, Var<T> deep, Var<T> lateral, const FeatureFusionParams<T>& p) {
  const Shape d = to_nhwc(deep.shape(), "feature_fusion_layer");
  const Shape l = to_nhwc(lateral.shape(), "feature_fusion_layer");
  if (l[0] != d[0] || l[1] != 2 * d[1] || l[2] != 2 * d[2]) {
    throw InvalidShape("feature_fusion_layer: lateral " + shape_str(lateral.shape()) + " is not twice deep " +
                       shape_str(deep.shape()));
  }
  Var<T> up = deconv2d_s2(reshape(deep, d), g.param(*p.up_kernel), g.param(*p.up_bias));
  Var<T> cat = concat_lastdim<T>({up, reshape(lateral, l)});
  Var<T> out = p.conv2(g, p.conv1(g, cat));
  return lateral.shape().size() == 3 ? reshape(out, lateral.shape()) : out;
}

template <typename T>
Encoder<T> Encoder<T>::create(ParameterStore<T>& store, const std::string& name, const EncoderConfig& cfg,
                              Initializer& init) {
  cfg.validate();
  Encoder e;
  e.cfg_ = cfg;
  e.embed_ = Linear<T>::create(store, name + ".patch_embed", 48, cfg.embed_dim, init);
  for (int s = 0; s < 4; ++s) {
    const std::string stage = name + ".stage" + std::to_string(s + 1);
    if (s > 0) e.merges_[static_cast<std::size_t>(s - 1)] = PatchMergeParams<T>::create(store, stage + ".merge", cfg.stage_dim(s - 1), init);
    for (int b = 0; b < cfg.depths[static_cast<std::size_t>(s)]; ++b) {
      e.blocks_[static_cast<std::size_t>(s)].push_back(LswinBlockParams<T>::create(
          store, stage + ".block" + std::to_string(b), cfg.stage_dim(s), cfg.heads[static_cast<std::size_t>(s)],
          cfg.window, cfg.mlp_ratio, cfg.scale_qk, cfg.variant, init));
    }
  }
  for (int f = 0; f < 3; ++f) {
    const int deep = 3 - f;
    e.fusions_[static_cast<std::size_t>(f)] = FeatureFusionParams<T>::create(
        store, name + ".ffl" + std::to_string(f + 1), cfg.stage_dim(deep), cfg.stage_dim(deep - 1), init);
  }
  return e;
}

template <typename T>
EncoderOutput<T> Encoder<T>::forward(Graph<T>& g, Var<T> image) const {
  const Shape s = to_nhwc(image.shape(), "encoder");
  if (s[1] % 32 != 0 || s[2] % 32 != 0 || s[1] == 0 || s[2] == 0 || s[3] != 3) {
    throw InvalidShape("encoder: image " + shape_str(image.shape()) + " must be RGB with extents divisible by 32");
  }
  EncoderOutput<T> out;
  Var<T> x = patch_embed(g, reshape(image, s), embed_);
  for (int st = 0; st < 4; ++st) {
    if (st > 0) x = patch_merge(g, x, merges_[static_cast<std::size_t>(st - 1)]);
    for (const auto& blk : blocks_[static_cast<std::size_t>(st)]) x = lswin_block(g, x, blk);
    out.stages[static_cast<std::size_t>(st)] = x;
  }
  Var<T> f = out.stages[3];
  for (int i = 0; i < 3; ++i) f = feature_fusion_layer(g, f, out.stages[static_cast<std::size_t>(2 - i)], fusions_[static_cast<std::size_t>(i)]);
  out.feature = f;
  return out;
}

template <typename T>
std::vector<FusionGate<T>> Encoder<T>::gates() const {
  std::vector<FusionGate<T>> v;
  for (const auto& stage : blocks_)
    for (const auto& b : stage) v.push_back(b.gate);
  return v;
}

#define SGTN_INSTANTIATE(T)                                                                               \
  template struct Mlp<T>;                                                                                 \
  template struct SwinPairParams<T>;                                                                      \
  template struct LrcPairParams<T>;                                                                       \
  template struct LswinBlockParams<T>;                                                                    \
  template struct PatchMergeParams<T>;                                                                    \
  template struct FeatureFusionParams<T>;                                                                 \
  template class Encoder<T>;                                                                              \
  template Var<T> patch_embed(Graph<T>&, Var<T>, const Linear<T>&);                                       \
  template Var<T> swin_pair(Graph<T>&, Var<T>, const SwinPairParams<T>&);                                 \
  template Var<T> lrc_pair(Graph<T>&, Var<T>, const LrcPairParams<T>&);                                   \
  template Var<T> lswin_block(Graph<T>&, Var<T>, const LswinBlockParams<T>&);                             \
  template Var<T> patch_merge(Graph<T>&, Var<T>, const PatchMergeParams<T>&);                             \
  template Var<T> feature_fusion_layer(Graph<T>&, Var<T>, Var<T>, const FeatureFusionParams<T>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
