// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/attention.hpp"

#include <cmath>
#include <memory>

namespace sgtn {
namespace {

thread_local std::uint64_t g_attention_macs = 0;
thread_local std::uint64_t g_score_macs = 0;

constexpr double kMaskedLogit = -1e9;

struct Nhwc {
  int n, h, w, c;
};

Nhwc as_nhwc(const Shape& s) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  throw InvalidShape("attention: expected HWC or NHWC input, got " + shape_str(s));
}

IndexMap make_index(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

// Window partition with zero padding and cyclic shift, plus its inverse.
template <typename T>
Var<T> window_attention(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, int shift,
                        AttentionTrace<T>* trace) {
  cfg.validate();
  if (cfg.window < 1) throw InvalidArgument("window attention: window must be positive");
  if (shift < 0 || shift >= cfg.window) throw InvalidArgument("window attention: shift must lie in [0, window)");
  const Nhwc d = as_nhwc(x.shape());
  if (d.c != cfg.dim) throw InvalidShape("window attention: input channels " + std::to_string(d.c) + " != dim " + std::to_string(cfg.dim));
  const int M = cfg.window;
  const int hp = (d.h + M - 1) / M * M;
  const int wp = (d.w + M - 1) / M * M;
  const int nwh = hp / M, nww = wp / M;
  const int windows = nwh * nww;
  const int n = M * M;
  const int groups = d.n * windows;

  std::vector<int> part(static_cast<std::size_t>(groups) * n * d.c);
  for (int b = 0; b < d.n; ++b) {
    for (int wy = 0; wy < nwh; ++wy) {
      for (int wx = 0; wx < nww; ++wx) {
        const int gidx = (b * nwh + wy) * nww + wx;
        for (int ty = 0; ty < M; ++ty) {
          for (int tx = 0; tx < M; ++tx) {
            const int oy = (wy * M + ty + shift) % hp;
            const int ox = (wx * M + tx + shift) % wp;
            const std::size_t dst = (static_cast<std::size_t>(gidx) * n + ty * M + tx) * d.c;
            for (int ch = 0; ch < d.c; ++ch) {
              part[dst + ch] = (oy < d.h && ox < d.w) ? ((b * d.h + oy) * d.w + ox) * d.c + ch : -1;
            }
          }
        }
      }
    }
  }
  Var<T> tokens = gather(x, make_index(std::move(part)), {groups, n, d.c});

  Var<T> bias;
  if (params.relative_bias) {
    const auto rel = relative_position_index(M);
    const int heads = cfg.heads;
    std::vector<int> idx(static_cast<std::size_t>(heads) * n * n);
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < n * n; ++i) idx[static_cast<std::size_t>(h) * n * n + i] = rel[static_cast<std::size_t>(i)] * heads + h;
    }
    bias = gather(x.graph().param(*params.relative_bias), make_index(std::move(idx)), {heads, n, n});
  }
  Tensor<T> mask;
  if (shift > 0) mask = shifted_window_mask(hp, wp, M, shift).template cast<T>();

  Var<T> out = multi_head_qkv_attention<T>(tokens, cfg, params, shift > 0 ? &mask : nullptr, bias, trace);

  std::vector<int> back(static_cast<std::size_t>(d.n) * d.h * d.w * d.c);
  for (int b = 0; b < d.n; ++b) {
    for (int oy = 0; oy < d.h; ++oy) {
      for (int ox = 0; ox < d.w; ++ox) {
        const int py = ((oy - shift) % hp + hp) % hp;
        const int px = ((ox - shift) % wp + wp) % wp;
        const int gidx = (b * nwh + py / M) * nww + px / M;
        const int t = (py % M) * M + px % M;
        const std::size_t dst = ((static_cast<std::size_t>(b) * d.h + oy) * d.w + ox) * d.c;
        for (int ch = 0; ch < d.c; ++ch) back[dst + ch] = (gidx * n + t) * d.c + ch;
      }
    }
  }
  return gather(out, make_index(std::move(back)), x.shape());
}

}  // namespace

void AttentionConfig::validate() const {
  if (dim < 1 || heads < 1 || dim % heads != 0) {
    throw InvalidArgument("attention: dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  }
  if (window > 0 && (shift < 0 || shift >= window)) throw InvalidArgument("attention: shift must lie in [0, window)");
}

template <typename T>
AttentionParams<T> AttentionParams<T>::create(ParameterStore<T>& store, const std::string& name,
                                              const AttentionConfig& cfg, Initializer& init, bool with_relative_bias) {
  cfg.validate();
  AttentionParams p;
  p.qkv = Linear<T>::create(store, name + ".qkv", cfg.dim, 3 * cfg.dim, init);
  p.proj = Linear<T>::create(store, name + ".proj", cfg.dim, cfg.dim, init);
  if (with_relative_bias) {
    const int side = 2 * cfg.window - 1;
    p.relative_bias = &store.create(name + ".relative_bias", init.trunc_normal<T>(name + ".relative_bias", {side * side, cfg.heads}, 0.02));
  }
  return p;
}

std::vector<int> relative_position_index(int window) {
  const int n = window * window;
  const int side = 2 * window - 1;
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int dy = i / window - j / window + window - 1;
      const int dx = i % window - j % window + window - 1;
      idx[static_cast<std::size_t>(i) * n + j] = dy * side + dx;
    }
  }
  return idx;
}

Tensor<double> shifted_window_mask(int padded_h, int padded_w, int window, int shift) {
  const int M = window;
  const int n = M * M;
  const int nwh = padded_h / M, nww = padded_w / M;
  auto region = [&](int v, int extent) { return v < extent - M ? 0 : (v < extent - shift ? 1 : 2); };
  Tensor<double> mask({nwh * nww, n, n});
  for (int wy = 0; wy < nwh; ++wy) {
    for (int wx = 0; wx < nww; ++wx) {
      std::vector<int> label(static_cast<std::size_t>(n));
      for (int t = 0; t < n; ++t) {
        label[static_cast<std::size_t>(t)] = region(wy * M + t / M, padded_h) * 3 + region(wx * M + t % M, padded_w);
      }
      double* dst = mask.data() + static_cast<std::size_t>(wy * nww + wx) * n * n;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dst[i * n + j] = label[static_cast<std::size_t>(i)] == label[static_cast<std::size_t>(j)] ? 0.0 : kMaskedLogit;
      }
    }
  }
  return mask;
}

template <typename T>
Var<T> multi_head_qkv_attention(Var<T> tokens, const AttentionConfig& cfg, const AttentionParams<T>& params,
                                const std::type_identity_t<Tensor<T>>* mask, Var<T> bias, AttentionTrace<T>* trace) {
  cfg.validate();
  const auto& tv = tokens.value();
  if (tv.rank() != 3 || tv.dim(2) != cfg.dim || tv.dim(1) < 1) {
    throw InvalidShape("attention: tokens must be [G, n>=1, " + std::to_string(cfg.dim) + "], got " + shape_str(tv.shape()));
  }
  Graph<T>& g = tokens.graph();
  const int groups = tv.dim(0), n = tv.dim(1), c = cfg.dim, heads = cfg.heads, hd = c / heads;
  if (mask && (mask->rank() != 3 || mask->dim(1) != n || mask->dim(2) != n)) {
    throw InvalidShape("attention: mask " + shape_str(mask->shape()) + " does not match " + std::to_string(n) + " tokens");
  }

  Var<T> qkv = params.qkv(g, tokens);  // [G, n, 3c]
  auto split = [&](int which) {
    std::vector<int> idx(static_cast<std::size_t>(groups) * heads * n * hd);
    std::size_t o = 0;
    for (int gi = 0; gi < groups; ++gi) {
      for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i) {
          const int base = (gi * n + i) * 3 * c + which * c + h * hd;
          for (int e = 0; e < hd; ++e) idx[o++] = base + e;
        }
      }
    }
    return gather(qkv, make_index(std::move(idx)), {groups * heads, n, hd});
  };
  Var<T> q = split(0), k = split(1), v = split(2);
  if (cfg.scale_qk) q = scale(q, T{1} / std::sqrt(static_cast<T>(hd)));

  Var<T> logits = reshape(bmm(q, k, true), {groups, heads, n, n});
  if (bias.valid() || mask) logits = add_attention_bias(logits, bias, mask);
  Var<T> weights = softmax_lastdim(logits);
  if (trace) trace->weights = weights.value();
  Var<T> mixed = bmm(reshape(weights, {groups * heads, n, n}), v, false);  // [G*H, n, hd]
  const std::uint64_t product = static_cast<std::uint64_t>(groups) * heads * n * n * hd;
  g_score_macs += product;
  g_attention_macs += 2 * product;

  std::vector<int> merge(static_cast<std::size_t>(groups) * n * c);
  for (int gi = 0; gi < groups; ++gi) {
    for (int i = 0; i < n; ++i) {
      for (int h = 0; h < heads; ++h) {
        for (int e = 0; e < hd; ++e) {
          merge[(static_cast<std::size_t>(gi) * n + i) * c + h * hd + e] = ((gi * heads + h) * n + i) * hd + e;
        }
      }
    }
  }
  Var<T> concat = gather(mixed, make_index(std::move(merge)), {groups, n, c});
  return params.proj(g, concat);
}

template <typename T>
Var<T> wmsa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, AttentionTrace<T>* trace) {
  return window_attention(x, cfg, params, 0, trace);
}

template <typename T>
Var<T> swmsa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, AttentionTrace<T>* trace) {
  return window_attention(x, cfg, params, cfg.shift, trace);
}

template <typename T>
Var<T> axial_msa(Var<T> x, const AttentionConfig& cfg, const AttentionParams<T>& params, AttentionTrace<T>* trace) {
  const Nhwc d = as_nhwc(x.shape());
  if (d.c != cfg.dim) throw InvalidShape("axial_msa: input channels " + std::to_string(d.c) + " != dim " + std::to_string(cfg.dim));
  if (cfg.axis == Axis::kRow) {
    Var<T> rows = reshape(x, {d.n * d.h, d.w, d.c});
    return reshape(multi_head_qkv_attention<T>(rows, cfg, params, nullptr, Var<T>(), trace), x.shape());
  }
  // columns: [N*w, h, c]
  std::vector<int> to_cols(static_cast<std::size_t>(d.n) * d.w * d.h * d.c);
  std::vector<int> from_cols(to_cols.size());
  for (int b = 0; b < d.n; ++b) {
    for (int r = 0; r < d.h; ++r) {
      for (int col = 0; col < d.w; ++col) {
        const std::size_t src = ((static_cast<std::size_t>(b) * d.h + r) * d.w + col) * d.c;
        const std::size_t dst = ((static_cast<std::size_t>(b) * d.w + col) * d.h + r) * d.c;
        for (int ch = 0; ch < d.c; ++ch) {
          to_cols[dst + ch] = static_cast<int>(src + ch);
          from_cols[src + ch] = static_cast<int>(dst + ch);
        }
      }
    }
  }
  Var<T> cols = gather(x, make_index(std::move(to_cols)), {d.n * d.w, d.h, d.c});
  Var<T> out = multi_head_qkv_attention<T>(cols, cfg, params, nullptr, Var<T>(), trace);
  return gather(out, make_index(std::move(from_cols)), x.shape());
}

std::uint64_t attention_macs() noexcept { return g_attention_macs; }
std::uint64_t attention_score_macs() noexcept { return g_score_macs; }
void reset_attention_macs() noexcept { g_attention_macs = g_score_macs = 0; }

#define SGTN_INSTANTIATE(T)                                                                                     \
  template struct AttentionParams<T>;                                                                           \
  template Var<T> multi_head_qkv_attention(Var<T>, const AttentionConfig&, const AttentionParams<T>&,           \
                                           const Tensor<T>*, Var<T>, AttentionTrace<T>*);                       \
  template Var<T> wmsa(Var<T>, const AttentionConfig&, const AttentionParams<T>&, AttentionTrace<T>*);          \
  template Var<T> swmsa(Var<T>, const AttentionConfig&, const AttentionParams<T>&, AttentionTrace<T>*);         \
  template Var<T> axial_msa(Var<T>, const AttentionConfig&, const AttentionParams<T>&, AttentionTrace<T>*);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
