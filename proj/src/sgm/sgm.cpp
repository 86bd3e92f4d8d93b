// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/sgm.hpp"

#include <memory>

namespace sgtn {

template <typename T>
ArfemParams<T> ArfemParams<T>::create(ParameterStore<T>& store, const std::string& name, int out_dim,
                                      Initializer& init) {
  ArfemParams p;
  const int dilations[3] = {1, 2, 4};
  int cin = 3;
  for (int i = 0; i < 3; ++i) {
    p.branches[std::size_t(i)] =
        ConvBnRelu<T>::create(store, name + ".dil" + std::to_string(dilations[i]), cin, out_dim, 3, init, dilations[i]);
    cin = out_dim;
  }
  p.fuse = ConvBnRelu<T>::create(store, name + ".fuse", 3 * out_dim, out_dim, 1, init);
  return p;
}

template <typename T>
SgmParams<T> SgmParams<T>::create(ParameterStore<T>& store, const std::string& name, const SgmConfig& cfg,
                                  Initializer& init) {
  SgmParams p;
  p.cfg = cfg;
  p.arfem = ArfemParams<T>::create(store, name + ".arfem", cfg.detail_dim, init);
  int cin = cfg.encoder_dim + cfg.detail_dim;
  for (int i = 0; i < 4; ++i) {
    p.refine[std::size_t(i)] = ConvBnRelu<T>::create(store, name + ".refine" + std::to_string(i), cin, cfg.dim, 3, init);
    cin = cfg.dim;
  }
  p.head1 = ConvBnRelu<T>::create(store, name + ".head1", cfg.dim, cfg.dim, 3, init);
  p.head2 = ConvBnRelu<T>::create(store, name + ".head2", cfg.dim, cfg.dim, 3, init);
  p.out = Conv<T>::create(store, name + ".out", cfg.dim, 3, 1, init);
  return p;
}

template <typename T>
Tensor<T> downsample_image4(const Tensor<T>& image) {
  Shape s = image.shape();
  if (s.size() == 3) s.insert(s.begin(), 1);
  if (s.size() != 4 || s[1] % 4 || s[2] % 4) {
    throw InvalidShape("downsample_image4: expected [N,H,W,C] with H, W divisible by 4, got " + shape_str(s));
  }
  const int n = s[0], h = s[1], w = s[2], c = s[3], oh = h / 4, ow = w / 4;
  Tensor<T> out({n, oh, ow, c});
  // sample point 4i + 1.5 sits halfway between source pixels 4i+1 and 4i+2
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int k = 0; k < c; ++k) {
          T acc{0};
          for (int dy = 1; dy <= 2; ++dy)
            for (int dx = 1; dx <= 2; ++dx) acc += image[((std::size_t(b) * h + 4 * y + dy) * w + 4 * x + dx) * c + k];
          out.at(b, y, x, k) = acc / T{4};
        }
  if (image.rank() == 3) return std::move(out).reshape({oh, ow, c});
  return out;
}

template <typename T>
Var<T> arfem(Graph<T>& g, Var<T> image_down4, const ArfemParams<T>& p) {
  std::vector<Var<T>> outs;
  Var<T> x = image_down4;
  for (const auto& b : p.branches) {
    x = b(g, x);
    outs.push_back(x);
  }
  return p.fuse(g, concat_lastdim(outs));
}

template <typename T>
ShapeGuidanceOutput<T> sgm_forward(Graph<T>& g, Var<T> encoder_feat, Var<T> detail_feat, const SgmParams<T>& p) {
  const Shape& a = encoder_feat.shape();
  const Shape& b = detail_feat.shape();
  if (a.size() != b.size() || a.size() < 3 || !std::equal(a.begin(), a.end() - 1, b.begin())) {
    throw InvalidShape("sgm_forward: encoder feature " + shape_str(a) + " and detail feature " + shape_str(b) +
                       " differ in resolution");
  }
  Var<T> x = concat_lastdim(std::vector<Var<T>>{encoder_feat, detail_feat});
  for (const auto& c : p.refine) x = c(g, x);
  ShapeGuidanceOutput<T> out;
  out.guided = x;
  out.logits = p.out(g, p.head2(g, p.head1(g, x)));
  out.probs = sigmoid(out.logits);
  return out;
}

ShapeTargets derive_shape_targets(const InstanceList& instances, int height, int width) {
  const int h = (height + 3) / 4, w = (width + 3) / 4;
  ShapeTargets t{Mask(h, w), Mask(h, w), Mask(h, w), Mask(h, w)};
  for (const auto& inst : instances) {
    if (inst.mask.h != height || inst.mask.w != width) {
      throw InvalidShape("derive_shape_targets: instance mask does not match the image extents");
    }
    const Mask m = downsample_max(inst.mask, 4);
    t.fg = mask_union(t.fg, m);
    t.edge = mask_union(t.edge, inner_boundary(m));
    for (const auto& contour : outer_contours(m)) {
      for (const Point& v : simplify_closed(contour, kCornerTolerance)) t.corner_vertices.at(v.y, v.x) = 1;
    }
  }
  t.corner = dilate3x3(t.corner_vertices);
  return t;
}

template <typename T>
Tensor<T> shape_weight_map(const ShapeTargets& t) {
  Tensor<T> wmap({t.fg.h, t.fg.w}, T{1});
  for (std::size_t i = 0; i < wmap.size(); ++i) {
    if (t.corner.data[i]) wmap[i] = T{4};
    else if (t.edge.data[i]) wmap[i] = T{2};
  }
  return wmap;
}

template <typename T>
LossValue<T> sgm_loss(const ShapeGuidanceOutput<T>& out, const std::vector<ShapeTargets>& targets) {
  const Shape& s = out.probs.shape();
  const int n = s.size() == 4 ? s[0] : 1;
  const int h = s[s.size() - 3], w = s[s.size() - 2];
  if (s.back() != 3 || static_cast<int>(targets.size()) != n) {
    throw InvalidShape("sgm_loss: expected 3 channels and one target per image");
  }
  const std::size_t plane = std::size_t(h) * w;
  Tensor<T> weight({n, h, w});
  std::array<Tensor<T>, 3> tgt{Tensor<T>({n, h, w}), Tensor<T>({n, h, w}), Tensor<T>({n, h, w})};
  for (int b = 0; b < n; ++b) {
    const ShapeTargets& t = targets[std::size_t(b)];
    if (t.fg.h != h || t.fg.w != w) throw InvalidShape("sgm_loss: target resolution mismatch");
    const Tensor<T> wb = shape_weight_map<T>(t);
    const Mask* maps[3] = {&t.fg, &t.edge, &t.corner};
    for (std::size_t i = 0; i < plane; ++i) {
      weight[b * plane + i] = wb[i];
      for (int k = 0; k < 3; ++k) tgt[std::size_t(k)][b * plane + i] = T(maps[k]->data[i]);
    }
  }
  const char* names[3] = {"sgm_fg", "sgm_edge", "sgm_corner"};
  std::vector<LossValue<T>> parts;
  for (int k = 0; k < 3; ++k) {
    std::vector<int> idx(n * plane);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i * 3 + k);
    Var<T> ch = gather(out.probs, std::make_shared<const std::vector<int>>(std::move(idx)), Shape{n, h, w});
    parts.push_back(weighted_bce(ch, tgt[std::size_t(k)], weight, Reduction::kWeightedMean, names[k]));
  }
  return merge_losses(parts);
}

#define SGTN_INSTANTIATE(T)                                                                              \
  template struct ArfemParams<T>;                                                                        \
  template struct SgmParams<T>;                                                                          \
  template Tensor<T> downsample_image4(const Tensor<T>&);                                                \
  template Var<T> arfem(Graph<T>&, Var<T>, const ArfemParams<T>&);                                       \
  template ShapeGuidanceOutput<T> sgm_forward(Graph<T>&, Var<T>, Var<T>, const SgmParams<T>&);           \
  template Tensor<T> shape_weight_map<T>(const ShapeTargets&);                                           \
  template LossValue<T> sgm_loss(const ShapeGuidanceOutput<T>&, const std::vector<ShapeTargets>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
