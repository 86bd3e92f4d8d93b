// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <type_traits>

#include "sgtn/layers.hpp"

namespace sgtn {

struct AttentionConfig {
  int dim = 0;      // channels c
  int heads = 1;    // n_h, must divide dim
  int window = 0;   // window side M (window variants only)
  int shift = 0;    // cyclic shift, 0 <= shift < M (shifted variant only)
  bool scale_qk = true;  // multiply logits by 1/sqrt(dim/heads)
  Axis axis = Axis::kRow;  // axial variant only

  void validate() const;
};

template <typename T>
struct AttentionParams {
  Linear<T> qkv;   // c -> 3c, column blocks [Q | K | V], heads contiguous in each
  Linear<T> proj;  // c -> c
  Parameter<T>* relative_bias = nullptr;  // [(2M-1)^2, heads] for window variants

  static AttentionParams create(ParameterStore<T>& store, const std::string& name, const AttentionConfig& cfg,
                                Initializer& init, bool with_relative_bias);
};

/// Optional capture of post-softmax weights S [groups, heads, n, n].
template <typename T>
struct AttentionTrace {
  Tensor<T> weights;
};

/// Dense multi-head attention over `groups` independent token sets:
/// tokens [G, n, c] -> [G, n, c]. `bias` [heads, n, n] and `mask` [Gm, n, n]
/// are added to the logits before the softmax.
template <typename T>
Var<T> multi_head_qkv_attention(Var<T> tokens, const AttentionConfig& cfg, const AttentionParams<T>& params,
                                const std::type_identity_t<Tensor<T>>* mask = nullptr, Var<T> bias = {}, AttentionTrace<T>* trace = nullptr);

/// Regular window attention (W-MSA) over [N,h,w,c] or [h,w,c].
template <typename T>
Var<T> wmsa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, AttentionTrace<T>* trace = nullptr);

/// Shifted window attention (SW-MSA) with cyclic shift cfg.shift and cross-segment masking.
template <typename T>
Var<T> swmsa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, AttentionTrace<T>* trace = nullptr);

/// 1-D axial attention: kRow attends within each row (H-MSA), kColumn within each column (V-MSA).
template <typename T>
Var<T> axial_msa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params,
                 AttentionTrace<T>* trace = nullptr);

/// Relative-position index table for an M x M window, [M^2 * M^2] entries in [0, (2M-1)^2).
std::vector<int> relative_position_index(int window);

/// Additive SW-MSA mask [windows, M^2, M^2] for a padded Hp x Wp map (0 or -1e9).
Tensor<double> shifted_window_mask(int padded_h, int padded_w, int window, int shift);

/// Running count of multiply-adds spent in attention score and apply products
/// (QK^T and SV) on this thread.
std::uint64_t attention_macs() noexcept;
/// The QK^T part of attention_macs() alone.
std::uint64_t attention_score_macs() noexcept;
void reset_attention_macs() noexcept;

}  // namespace sgtn
