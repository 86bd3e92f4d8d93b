// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <memory>

#include "sgtn/kernels.hpp"
#include "sgtn/ops.hpp"

namespace sgtn {
namespace {

struct Nhwc {
  int n, h, w, c;
};

Nhwc as_nhwc(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  throw InvalidShape(std::string(op) + ": expected HWC or NHWC input, got " + shape_str(s));
}

Shape like_input(const Shape& in, int h, int w, int c) {
  if (in.size() == 3) return {h, w, c};
  return {in[0], h, w, c};
}

// Column layout per output position: (ky, kx, ci), ci fastest.
template <typename T>
void im2col(const T* x, const Nhwc& d, int k, const Conv2dOptions& o, int oh, int ow, T* cols) {
  const std::size_t kk = static_cast<std::size_t>(k) * k * d.c;
  for (int n = 0; n < d.n; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* dst = cols + ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * kk;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * o.stride - o.pad + ky * o.dilation;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * o.stride - o.pad + kx * o.dilation;
            T* cell = dst + (static_cast<std::size_t>(ky) * k + kx) * d.c;
            if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) {
              std::fill_n(cell, d.c, T{0});
            } else {
              std::copy_n(x + ((static_cast<std::size_t>(n) * d.h + iy) * d.w + ix) * d.c, d.c, cell);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const Nhwc& d, int k, const Conv2dOptions& o, int oh, int ow, T* dx) {
  const std::size_t kk = static_cast<std::size_t>(k) * k * d.c;
  for (int n = 0; n < d.n; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* src = cols + ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * kk;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * o.stride - o.pad + ky * o.dilation;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * o.stride - o.pad + kx * o.dilation;
            if (ix < 0 || ix >= d.w) continue;
            const T* cell = src + (static_cast<std::size_t>(ky) * k + kx) * d.c;
            T* dst = dx + ((static_cast<std::size_t>(n) * d.h + iy) * d.w + ix) * d.c;
            for (int ci = 0; ci < d.c; ++ci) dst[ci] += cell[ci];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Conv2dOptions opts) {
  const Nhwc d = as_nhwc(x.shape(), "conv2d");
  const auto& kv = kernel.value();
  if (kv.rank() != 4 || kv.dim(2) != kv.dim(3)) throw InvalidShape("conv2d: kernel must be (c_out, c_in, k, k), got " + shape_str(kv.shape()));
  if (kv.dim(1) != d.c) {
    throw InvalidShape("conv2d: kernel expects " + std::to_string(kv.dim(1)) + " input channels, input " +
                       shape_str(x.shape()) + " has " + std::to_string(d.c));
  }
  if (opts.stride < 1 || opts.dilation < 1 || opts.pad < 0) throw InvalidArgument("conv2d: invalid stride/dilation/pad");
  const int co = kv.dim(0), k = kv.dim(2);
  const int span = (k - 1) * opts.dilation + 1;
  const int oh = (d.h + 2 * opts.pad - span) / opts.stride + 1;
  const int ow = (d.w + 2 * opts.pad - span) / opts.stride + 1;
  if (oh <= 0 || ow <= 0) throw InvalidShape("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  if (bias.valid() && bias.size() != static_cast<std::size_t>(co)) throw InvalidShape("conv2d: bias does not match c_out");

  const int K = k * k * d.c;
  const int P = d.n * oh * ow;
  // permuted kernel [co, ky, kx, ci] to match the column layout
  auto wp = std::make_shared<std::vector<T>>(static_cast<std::size_t>(co) * K);
  for (int o = 0; o < co; ++o) {
    for (int ci = 0; ci < d.c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          (*wp)[static_cast<std::size_t>(o) * K + (static_cast<std::size_t>(ky) * k + kx) * d.c + ci] =
              kv[((static_cast<std::size_t>(o) * d.c + ci) * k + ky) * k + kx];
        }
      }
    }
  }
  auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(P) * K);
  im2col(x.value().data(), d, k, opts, oh, ow, cols->data());

  Tensor<T> out(like_input(x.shape(), oh, ow, co));
  kernels::gemm(false, true, P, co, K, cols->data(), wp->data(), out.data(), false);
  if (bias.valid()) {
    const auto& bv = bias.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % co];
  }
  std::vector<Var<T>> parents{x, kernel};
  if (bias.valid()) parents.push_back(bias);
  return x.graph().record(
      "conv2d", std::move(out), parents,
      [x, kernel, bias, opts, d, co, k, K, P, oh, ow, wp, cols](Graph<T>& g, const Tensor<T>& go) {
        if (g.requires_grad(kernel)) {
          std::vector<T> dwp(static_cast<std::size_t>(co) * K);
          kernels::gemm(true, false, co, K, P, go.data(), cols->data(), dwp.data(), false);
          auto& gk = g.grad_slot(kernel);
          for (int o = 0; o < co; ++o) {
            for (int ci = 0; ci < d.c; ++ci) {
              for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                  gk[((static_cast<std::size_t>(o) * d.c + ci) * k + ky) * k + kx] +=
                      dwp[static_cast<std::size_t>(o) * K + (static_cast<std::size_t>(ky) * k + kx) * d.c + ci];
                }
              }
            }
          }
        }
        if (bias.valid() && g.requires_grad(bias)) {
          auto& gb = g.grad_slot(bias);
          for (std::size_t i = 0; i < go.size(); ++i) gb[i % co] += go[i];
        }
        if (g.requires_grad(x)) {
          std::vector<T> dcols(static_cast<std::size_t>(P) * K);
          kernels::gemm(false, false, P, K, co, go.data(), wp->data(), dcols.data(), false);
          col2im(dcols.data(), d, k, opts, oh, ow, g.grad_slot(x).data());
        }
      });
}

template <typename T>
Var<T> deconv2d_s2(Var<T> x, Var<T> kernel, Var<T> bias) {
  const Nhwc d = as_nhwc(x.shape(), "deconv2d_s2");
  const auto& kv = kernel.value();
  if (kv.rank() != 4 || kv.dim(0) != d.c || kv.dim(2) != 2 || kv.dim(3) != 2) {
    throw InvalidShape("deconv2d_s2: kernel " + shape_str(kv.shape()) + " incompatible with input " + shape_str(x.shape()));
  }
  const int co = kv.dim(1);
  if (bias.valid() && bias.size() != static_cast<std::size_t>(co)) throw InvalidShape("deconv2d_s2: bias does not match c_out");
  const int P = d.n * d.h * d.w;
  const int cols = co * 4;
  std::vector<T> y(static_cast<std::size_t>(P) * cols);
  // kernel memory is already [ci, (co, dy, dx)]
  kernels::gemm(false, false, P, cols, d.c, x.value().data(), kv.data(), y.data(), false);

  const int oh = 2 * d.h, ow = 2 * d.w;
  Tensor<T> out(like_input(x.shape(), oh, ow, co));
  auto out_index = [=](int p, int o, int dy, int dx) {
    const int n = p / (d.h * d.w);
    const int rem = p % (d.h * d.w);
    const int i = rem / d.w, j = rem % d.w;
    return ((static_cast<std::size_t>(n) * oh + 2 * i + dy) * ow + 2 * j + dx) * co + o;
  };
  for (int p = 0; p < P; ++p) {
    for (int o = 0; o < co; ++o) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          out[out_index(p, o, dy, dx)] = y[static_cast<std::size_t>(p) * cols + (o * 2 + dy) * 2 + dx];
        }
      }
    }
  }
  if (bias.valid()) {
    const auto& bv = bias.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % co];
  }
  std::vector<Var<T>> parents{x, kernel};
  if (bias.valid()) parents.push_back(bias);
  return x.graph().record("deconv2d_s2", std::move(out), parents,
                          [x, kernel, bias, d, co, P, cols, out_index](Graph<T>& g, const Tensor<T>& go) {
                            std::vector<T> dy_cols(static_cast<std::size_t>(P) * cols);
                            for (int p = 0; p < P; ++p) {
                              for (int o = 0; o < co; ++o) {
                                for (int dy = 0; dy < 2; ++dy) {
                                  for (int dx = 0; dx < 2; ++dx) {
                                    dy_cols[static_cast<std::size_t>(p) * cols + (o * 2 + dy) * 2 + dx] = go[out_index(p, o, dy, dx)];
                                  }
                                }
                              }
                            }
                            if (g.requires_grad(x)) {
                              kernels::gemm(false, true, P, d.c, cols, dy_cols.data(), kernel.value().data(),
                                            g.grad_slot(x).data(), true);
                            }
                            if (g.requires_grad(kernel)) {
                              kernels::gemm(true, false, d.c, cols, P, x.value().data(), dy_cols.data(),
                                            g.grad_slot(kernel).data(), true);
                            }
                            if (bias.valid() && g.requires_grad(bias)) {
                              auto& gb = g.grad_slot(bias);
                              for (std::size_t i = 0; i < go.size(); ++i) gb[i % co] += go[i];
                            }
                          });
}

namespace {

struct BilinearTap {
  int bin;
  std::size_t offsets[4];  // pixel offsets (times c) into the batch slice
  double weights[4];
};

// Samples of every bin of one RoI; a sample outside [-1, extent] contributes zero.
std::vector<BilinearTap> roi_taps(const RoiBox& box, int fh, int fw, int out, double scale, int sampling) {
  std::vector<BilinearTap> taps;
  const double x0 = box.x * scale - 0.5;
  const double y0 = box.y * scale - 0.5;
  const double bw = box.w * scale / out;
  const double bh = box.h * scale / out;
  for (int py = 0; py < out; ++py) {
    for (int px = 0; px < out; ++px) {
      for (int iy = 0; iy < sampling; ++iy) {
        double y = y0 + py * bh + (iy + 0.5) * bh / sampling;
        for (int ix = 0; ix < sampling; ++ix) {
          double x = x0 + px * bw + (ix + 0.5) * bw / sampling;
          if (y < -1.0 || y > fh || x < -1.0 || x > fw) continue;
          double yy = std::max(y, 0.0), xx = std::max(x, 0.0);
          int yl = static_cast<int>(yy), xl = static_cast<int>(xx);
          int yh, xh;
          if (yl >= fh - 1) {
            yl = yh = fh - 1;
            yy = yl;
          } else {
            yh = yl + 1;
          }
          if (xl >= fw - 1) {
            xl = xh = fw - 1;
            xx = xl;
          } else {
            xh = xl + 1;
          }
          const double ly = yy - yl, lx = xx - xl, hy = 1.0 - ly, hx = 1.0 - lx;
          BilinearTap t{py * out + px,
                        {static_cast<std::size_t>(yl) * fw + xl, static_cast<std::size_t>(yl) * fw + xh,
                         static_cast<std::size_t>(yh) * fw + xl, static_cast<std::size_t>(yh) * fw + xh},
                        {hy * hx, hy * lx, ly * hx, ly * lx}};
          taps.push_back(t);
        }
      }
    }
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> roi_align(Var<T> feat, const std::vector<RoiBox>& boxes, int out, double spatial_scale, int sampling) {
  const Nhwc d = as_nhwc(feat.shape(), "roi_align");
  if (out < 1 || sampling < 1) throw InvalidArgument("roi_align: out and sampling must be positive");
  const int R = static_cast<int>(boxes.size());
  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w * d.c;
  const std::size_t roi_size = static_cast<std::size_t>(out) * out * d.c;
  Tensor<T> result({R, out, out, d.c});
  auto taps = std::make_shared<std::vector<std::vector<BilinearTap>>>();
  const T inv_count = T{1} / static_cast<T>(sampling * sampling);
  const auto& fv = feat.value();
  for (int r = 0; r < R; ++r) {
    const RoiBox& b = boxes[static_cast<std::size_t>(r)];
    if (b.batch < 0 || b.batch >= d.n) throw InvalidArgument("roi_align: batch index out of range");
    taps->push_back(roi_taps(b, d.h, d.w, out, spatial_scale, sampling));
    const T* src = fv.data() + static_cast<std::size_t>(b.batch) * plane;
    T* dst = result.data() + static_cast<std::size_t>(r) * roi_size;
    for (const auto& t : taps->back()) {
      T* cell = dst + static_cast<std::size_t>(t.bin) * d.c;
      for (int q = 0; q < 4; ++q) {
        const T wq = static_cast<T>(t.weights[q]) * inv_count;
        const T* px = src + t.offsets[q] * d.c;
        for (int ch = 0; ch < d.c; ++ch) cell[ch] += wq * px[ch];
      }
    }
  }
  std::vector<int> batch_of;
  for (const auto& b : boxes) batch_of.push_back(b.batch);
  return feat.graph().record("roi_align", std::move(result), {feat},
                             [feat, taps, batch_of, d, plane, roi_size, inv_count](Graph<T>& g, const Tensor<T>& go) {
                               if (!g.requires_grad(feat)) return;
                               auto& gf = g.grad_slot(feat);
                               for (std::size_t r = 0; r < taps->size(); ++r) {
                                 T* dst = gf.data() + static_cast<std::size_t>(batch_of[r]) * plane;
                                 const T* src = go.data() + r * roi_size;
                                 for (const auto& t : (*taps)[r]) {
                                   const T* cell = src + static_cast<std::size_t>(t.bin) * d.c;
                                   for (int q = 0; q < 4; ++q) {
                                     const T wq = static_cast<T>(t.weights[q]) * inv_count;
                                     T* px = dst + t.offsets[q] * d.c;
                                     for (int ch = 0; ch < d.c; ++ch) px[ch] += wq * cell[ch];
                                   }
                                 }
                               }
                             });
}

#define SGTN_INSTANTIATE(T)                                                              \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, Conv2dOptions);                         \
  template Var<T> deconv2d_s2(Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> roi_align(Var<T>, const std::vector<RoiBox>&, int, double, int);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
