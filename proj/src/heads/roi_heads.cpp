// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <memory>

#include "sgtn/heads.hpp"

namespace sgtn {

template <typename T>
BoxHeadParams<T> BoxHeadParams<T>::create(ParameterStore<T>& store, const std::string& name, const HeadsConfig& cfg,
                                          Initializer& init) {
  const int in = kBoxRoi * kBoxRoi * cfg.roi_dim;
  return {Linear<T>::create(store, name + ".fc1", in, cfg.fc_dim, init, true, std::sqrt(2.0 / in)),
          Linear<T>::create(store, name + ".fc2", cfg.fc_dim, cfg.fc_dim, init, true, std::sqrt(2.0 / cfg.fc_dim)),
          Linear<T>::create(store, name + ".cls", cfg.fc_dim, cfg.num_classes + 1, init, true, 0.01),
          Linear<T>::create(store, name + ".delta", cfg.fc_dim, 4, init, true, 0.001)};
}

template <typename T>
BoxHeadOutput<T> bbox_head(Graph<T>& g, Var<T> feat, const std::vector<RoiBox>& rois, const BoxHeadParams<T>& p) {
  Var<T> x = roi_align(feat, rois, kBoxRoi, 1.0 / kFeatureStride, 2);
  const int r = x.dim(0);
  x = reshape(x, {r, int(x.size()) / std::max(r, 1)});
  x = relu(p.fc2(g, relu(p.fc1(g, x))));
  return {p.cls(g, x), p.delta(g, x)};
}

template <typename T>
MaskHeadParams<T> MaskHeadParams<T>::create(ParameterStore<T>& store, const std::string& name, const HeadsConfig& cfg,
                                            Initializer& init) {
  MaskHeadParams p;
  int cin = cfg.roi_dim;
  for (int i = 0; i < 4; ++i) {
    p.convs[std::size_t(i)] = Conv<T>::create(store, name + ".conv" + std::to_string(i), cin, cfg.mask_dim, 3, init);
    cin = cfg.mask_dim;
  }
  p.up_kernel = &store.create(name + ".up.kernel", init.kaiming<T>(name + ".up.kernel",
                                                                   {cfg.mask_dim, cfg.mask_dim, 2, 2}, cfg.mask_dim));
  p.up_bias = &store.create(name + ".up.bias", Tensor<T>({cfg.mask_dim}));
  p.out = Conv<T>::create(store, name + ".out", cfg.mask_dim, cfg.num_classes, 1, init);
  return p;
}

template <typename T>
Var<T> mask_head(Graph<T>& g, Var<T> feat, const std::vector<RoiBox>& rois, const MaskHeadParams<T>& p) {
  Var<T> x = roi_align(feat, rois, kMaskRoi, 1.0 / kFeatureStride, 2);
  for (const auto& c : p.convs) x = relu(c(g, x));
  x = relu(deconv2d_s2(x, g.param(*p.up_kernel), g.param(*p.up_bias)));
  return sigmoid(p.out(g, x));
}

Tensor<float> mask_target(const Mask& mask, const Box& box) {
  if (!(box.w > 0 && box.h > 0)) throw InvalidArgument("mask_target: empty box");
  Tensor<float> t({kMaskSize, kMaskSize});
  auto px = [&](int y, int x) -> double { return mask.get(y, x); };
  for (int i = 0; i < kMaskSize; ++i) {
    // pixel (y, x) covers [y, y+1); its value sits at y + 0.5
    const double fy = box.y + (i + 0.5) * box.h / kMaskSize - 0.5;
    const int y0 = int(std::floor(fy));
    const double ty = fy - y0;
    for (int j = 0; j < kMaskSize; ++j) {
      const double fx = box.x + (j + 0.5) * box.w / kMaskSize - 0.5;
      const int x0 = int(std::floor(fx));
      const double tx = fx - x0;
      const double v = (px(y0, x0) * (1 - tx) + px(y0, x0 + 1) * tx) * (1 - ty) +
                       (px(y0 + 1, x0) * (1 - tx) + px(y0 + 1, x0 + 1) * tx) * ty;
      t.at(i, j) = v >= 0.5 ? 1.0f : 0.0f;
    }
  }
  return t;
}

template <typename T>
LossValue<T> mask_losses(Var<T> probs, const std::vector<int>& classes, const std::vector<Tensor<float>>& targets) {
  const Shape& s = probs.shape();
  const int r = int(classes.size());
  if (s.size() != 4 || s[0] != r || int(targets.size()) != r || s[1] != kMaskSize || s[2] != kMaskSize) {
    throw InvalidShape("mask_losses: expected [R,28,28,C] with R classes and targets");
  }
  const int c = s[3];
  const std::size_t plane = std::size_t(kMaskSize) * kMaskSize;
  std::vector<int> idx(std::size_t(r) * plane);
  Tensor<T> tgt({r, kMaskSize, kMaskSize});
  for (int i = 0; i < r; ++i) {
    if (classes[std::size_t(i)] < 0 || classes[std::size_t(i)] >= c) throw InvalidArgument("mask_losses: class out of range");
    for (std::size_t k = 0; k < plane; ++k) {
      idx[i * plane + k] = int((i * plane + k) * c + classes[std::size_t(i)]);
      tgt[i * plane + k] = T(targets[std::size_t(i)][k]);
    }
  }
  Var<T> sel = gather(probs, std::make_shared<const std::vector<int>>(std::move(idx)), Shape{r, kMaskSize, kMaskSize});
  return merge_losses<T>({weighted_bce(sel, tgt, Tensor<T>(tgt.shape(), T{1}), Reduction::kWeightedMean, "mask_bce"),
                          dice_loss(sel, tgt, T{1}, "mask_dice")});
}

Mask MaskTriplet::full(int height, int width) const {
  Mask out(height, width);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y0 + y, x0 + x) = mi.at(y, x);
  return out;
}

MaskTriplet paste_and_fuse(const std::vector<float>& mask28, const Box& box, const std::vector<float>& fg, int fg_h,
                           int fg_w, int height, int width) {
  if (mask28.size() != std::size_t(kMaskSize) * kMaskSize) throw InvalidShape("paste_and_fuse: mask must be 28x28");
  if (!fg.empty() && fg.size() != std::size_t(fg_h) * fg_w) throw InvalidShape("paste_and_fuse: foreground map extents");
  MaskTriplet t;
  const Box c = clip_box(box, width, height);
  t.x0 = int(std::floor(c.x));
  t.y0 = int(std::floor(c.y));
  t.w = std::max(0, int(std::ceil(c.x2())) - t.x0);
  t.h = std::max(0, int(std::ceil(c.y2())) - t.y0);
  if (box.w <= 0 || box.h <= 0 || c.w <= 0 || c.h <= 0) t.w = t.h = 0;
  t.ms.assign(std::size_t(t.w) * t.h, 0.0f);
  t.mc = Mask(t.h, t.w);
  t.mi = Mask(t.h, t.w);
  for (int y = 0; y < t.h; ++y) {
    const double py = t.y0 + y + 0.5;
    for (int x = 0; x < t.w; ++x) {
      const double px = t.x0 + x + 0.5;
      const double ms = sample_bilinear(mask28, kMaskSize, kMaskSize, (py - box.y) / box.h * kMaskSize - 0.5,
                                        (px - box.x) / box.w * kMaskSize - 0.5);
      const bool mc = fg.empty() ||
                      sample_bilinear(fg, fg_h, fg_w, py * fg_h / height - 0.5, px * fg_w / width - 0.5) >= 0.5;
      t.ms[std::size_t(y) * t.w + x] = float(ms);
      t.mc.at(y, x) = mc;
      t.mi.at(y, x) = mc && ms >= 0.5;
    }
  }
  return t;
}

#define SGTN_INSTANTIATE(T)                                                                              \
  template struct BoxHeadParams<T>;                                                                      \
  template struct MaskHeadParams<T>;                                                                     \
  template BoxHeadOutput<T> bbox_head(Graph<T>&, Var<T>, const std::vector<RoiBox>&, const BoxHeadParams<T>&); \
  template Var<T> mask_head(Graph<T>&, Var<T>, const std::vector<RoiBox>&, const MaskHeadParams<T>&);    \
  template LossValue<T> mask_losses(Var<T>, const std::vector<int>&, const std::vector<Tensor<float>>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
