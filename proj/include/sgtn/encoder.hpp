// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "sgtn/attention.hpp"

namespace sgtn {

enum class EncoderVariant { kLswin, kSwinOnly, kLrcOnly };

const char* variant_name(EncoderVariant v) noexcept;
EncoderVariant parse_variant(const std::string& name);

struct EncoderConfig {
  int embed_dim = 24;
  std::array<int, 4> depths{1, 1, 2, 1};  // LSwin blocks (each a Swin pair plus an LRC pair) per stage
  std::array<int, 4> heads{2, 2, 4, 8};
  int window = 4;
  int mlp_ratio = 4;
  bool scale_qk = true;
  EncoderVariant variant = EncoderVariant::kLswin;

  int stage_dim(int stage) const { return embed_dim << stage; }  // stage in [0, 4)
  void validate() const;

  static EncoderConfig desk() { return {}; }
  static EncoderConfig paper_scale() { return {96, {1, 1, 9, 1}, {3, 6, 12, 24}, 7, 4, true, EncoderVariant::kLswin}; }
};

template <typename T>
struct Mlp {
  Linear<T> fc1, fc2;

  static Mlp create(ParameterStore<T>& store, const std::string& name, int dim, int ratio, Initializer& init);
  Var<T> operator()(Graph<T>& g, Var<T> x) const;
};

/// W-MSA block followed by SW-MSA block, each pre-LN attention + residual and pre-LN MLP + residual.
template <typename T>
struct SwinPairParams {
  AttentionConfig wcfg, swcfg;
  LayerNorm<T> norm1, norm2, norm3, norm4;
  AttentionParams<T> wmsa, swmsa;
  Mlp<T> mlp1, mlp2;

  static SwinPairParams create(ParameterStore<T>& store, const std::string& name, int dim, int heads, int window,
                               int mlp_ratio, bool scale_qk, Initializer& init);
};

/// V-MSA block then H-MSA block; axial instance norm before attention, LN before MLP.
template <typename T>
struct LrcPairParams {
  AttentionConfig vcfg, hcfg;
  AttentionParams<T> vmsa, hmsa;
  LayerNorm<T> norm1, norm2;
  Mlp<T> mlp1, mlp2;

  static LrcPairParams create(ParameterStore<T>& store, const std::string& name, int dim, int heads, int mlp_ratio,
                              bool scale_qk, Initializer& init);
};

/// Learnable per-block scalars mixing the two paths.
template <typename T>
struct FusionGate {
  Parameter<T>* alpha = nullptr;  // [1]
  Parameter<T>* beta = nullptr;   // [1]
};

template <typename T>
struct LswinBlockParams {
  EncoderVariant variant = EncoderVariant::kLswin;
  SwinPairParams<T> swin;  // unused by kLrcOnly
  LrcPairParams<T> lrc;    // unused by kSwinOnly
  FusionGate<T> gate;

  static LswinBlockParams create(ParameterStore<T>& store, const std::string& name, int dim, int heads, int window,
                                 int mlp_ratio, bool scale_qk, EncoderVariant variant, Initializer& init);
};

template <typename T>
struct PatchMergeParams {
  LayerNorm<T> norm;   // over 4c
  Linear<T> reduce;    // 4c -> 2c, no bias

  static PatchMergeParams create(ParameterStore<T>& store, const std::string& name, int dim, Initializer& init);
};

template <typename T>
struct FeatureFusionParams {
  Parameter<T>* up_kernel = nullptr;  // (c_deep, c_lateral, 2, 2)
  Parameter<T>* up_bias = nullptr;
  ConvBnRelu<T> conv1, conv2;

  static FeatureFusionParams create(ParameterStore<T>& store, const std::string& name, int deep_dim, int lateral_dim,
                                    Initializer& init);
};

/// 4x4x3 patches flattened to 48 values (row, column, channel order) and projected.
template <typename T>
Var<T> patch_embed(Graph<T>& g, Var<T> image, const Linear<T>& proj);

template <typename T>
Var<T> swin_pair(Graph<T>& g, Var<T> x, const SwinPairParams<T>& p);

template <typename T>
Var<T> lrc_pair(Graph<T>& g, Var<T> x, const LrcPairParams<T>& p);

/// alpha * swin_pair(x) + beta * lrc_pair(x); a frozen zero path is skipped.
template <typename T>
Var<T> lswin_block(Graph<T>& g, Var<T> x, const LswinBlockParams<T>& p);

/// 2x2 neighborhoods concatenated as (0,0), (1,0), (0,1), (1,1), normalized and reduced to 2c.
template <typename T>
Var<T> patch_merge(Graph<T>& g, Var<T> x, const PatchMergeParams<T>& p);

template <typename T>
Var<T> feature_fusion_layer(Graph<T>& g, Var<T> deep, Var<T> lateral, const FeatureFusionParams<T>& p);

template <typename T>
struct EncoderOutput {
  Var<T> feature;                // stride 4, embed_dim channels
  std::array<Var<T>, 4> stages;  // strides 4, 8, 16, 32
};

template <typename T>
class Encoder {
 public:
  static Encoder create(ParameterStore<T>& store, const std::string& name, const EncoderConfig& cfg, Initializer& init);

  /// image [N, H, W, 3] or [H, W, 3] with H, W divisible by 32.
  EncoderOutput<T> forward(Graph<T>& g, Var<T> image) const;

  const EncoderConfig& config() const noexcept { return cfg_; }
  std::vector<FusionGate<T>> gates() const;

 private:
  EncoderConfig cfg_;
  Linear<T> embed_;
  std::array<std::vector<LswinBlockParams<T>>, 4> blocks_;
  std::array<PatchMergeParams<T>, 3> merges_;
  std::array<FeatureFusionParams<T>, 3> fusions_;  // stride 32->16, 16->8, 8->4
};

}  // namespace sgtn
