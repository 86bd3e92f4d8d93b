// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <memory>

#include "sgtn/heads.hpp"

namespace sgtn {

template <typename T>
CenterHeadParams<T> CenterHeadParams<T>::create(ParameterStore<T>& store, const std::string& name,
                                                const HeadsConfig& cfg, Initializer& init) {
  CenterHeadParams p;
  p.heat1 = Conv<T>::create(store, name + ".heat1", cfg.feat_dim, cfg.head_dim, 3, init);
  p.heat2 = Conv<T>::create(store, name + ".heat2", cfg.head_dim, cfg.num_classes, 1, init, -2.19);  // prior 0.1
  p.size1 = Conv<T>::create(store, name + ".size1", cfg.feat_dim, cfg.head_dim, 3, init);
  p.size2 = Conv<T>::create(store, name + ".size2", cfg.head_dim, 2, 1, init, 16.0);  // typical extent in pixels
  p.offset1 = Conv<T>::create(store, name + ".offset1", cfg.feat_dim, cfg.head_dim, 3, init);
  p.offset2 = Conv<T>::create(store, name + ".offset2", cfg.head_dim, 2, 1, init, 2.0);
  return p;
}

template <typename T>
CenterOutput<T> cbgm_forward(Graph<T>& g, Var<T> feat, const CenterHeadParams<T>& p) {
  return {sigmoid(p.heat2(g, relu(p.heat1(g, feat)))), p.size2(g, relu(p.size1(g, feat))),
          p.offset2(g, relu(p.offset1(g, feat)))};
}

template <typename T>
ProposalSet cbgm_decode(const Tensor<T>& heat, const Tensor<T>& size, const Tensor<T>& offset, int image_h,
                        int image_w, int k_max, double score_thresh) {
  if (k_max <= 0) throw InvalidArgument("cbgm_decode: k_max must be positive");
  if (heat.rank() != 3 || size.rank() != 3 || offset.rank() != 3 || size.dim(2) != 2 || offset.dim(2) != 2 ||
      size.dim(0) != heat.dim(0) || size.dim(1) != heat.dim(1) || offset.dim(0) != heat.dim(0) ||
      offset.dim(1) != heat.dim(1)) {
    throw InvalidShape("cbgm_decode: expected [h,w,C], [h,w,2], [h,w,2]");
  }
  const int h = heat.dim(0), w = heat.dim(1), c = heat.dim(2);
  struct Peak {
    double score;
    int index;
  };
  std::vector<Peak> peaks;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        const int idx = (y * w + x) * c + k;
        const double s = heat[std::size_t(idx)];
        if (s < score_thresh) continue;
        bool keep = true;
        for (int dy = -1; dy <= 1 && keep; ++dy)
          for (int dx = -1; dx <= 1 && keep; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if ((dy == 0 && dx == 0) || ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
            const int nidx = (ny * w + nx) * c + k;
            const double ns = heat[std::size_t(nidx)];
            if (ns > s || (ns == s && nidx < idx)) keep = false;
          }
        if (keep) peaks.push_back({s, idx});
      }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.score != b.score ? a.score > b.score : a.index < b.index; });
  if (peaks.size() > std::size_t(k_max)) peaks.resize(std::size_t(k_max));

  ProposalSet out;
  for (const Peak& pk : peaks) {
    const int cell = pk.index / c, k = pk.index % c, y = cell / w, x = cell % w;
    const double cx = kFeatureStride * x + double(offset[std::size_t(cell) * 2]);
    const double cy = kFeatureStride * y + double(offset[std::size_t(cell) * 2 + 1]);
    const double bw = size[std::size_t(cell) * 2], bh = size[std::size_t(cell) * 2 + 1];
    const Box b = clip_box({cx - 0.5 * bw, cy - 0.5 * bh, bw, bh}, image_w, image_h);
    if (b.w < 1.0 || b.h < 1.0) continue;
    out.boxes.push_back(b);
    out.scores.push_back(pk.score);
    out.classes.push_back(k);
  }
  return out;
}

double gaussian_radius(double h, double w, double min_overlap) {
  const double a1 = 1, b1 = h + w, c1 = w * h * (1 - min_overlap) / (1 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * a1 * c1)) / 2;
  const double a2 = 4, b2 = 2 * (h + w), c2 = (1 - min_overlap) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4 * a2 * c2)) / 2;
  const double a3 = 4 * min_overlap, b3 = -2 * min_overlap * (h + w), c3 = (min_overlap - 1) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

namespace {

struct CenterCell {
  int x, y;
};

CenterCell center_cell(const Box& b, int feat_h, int feat_w) {
  return {std::clamp(int(std::floor(b.cx() / kFeatureStride)), 0, feat_w - 1),
          std::clamp(int(std::floor(b.cy() / kFeatureStride)), 0, feat_h - 1)};
}

}  // namespace

Tensor<float> center_heatmap(const InstanceList& instances, int feat_h, int feat_w, int num_classes) {
  Tensor<float> heat({feat_h, feat_w, num_classes});
  for (const auto& inst : instances) {
    if (inst.category < 0 || inst.category >= num_classes) throw InvalidArgument("center_heatmap: category out of range");
    const int r = std::max(
        0, int(gaussian_radius(inst.box.h / kFeatureStride, inst.box.w / kFeatureStride)));
    const double sigma = (2 * r + 1) / 6.0;
    const CenterCell cc = center_cell(inst.box, feat_h, feat_w);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int y = cc.y + dy, x = cc.x + dx;
        if (y < 0 || x < 0 || y >= feat_h || x >= feat_w) continue;
        float& v = heat.at(y, x, inst.category);
        v = std::max(v, float(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))));
      }
  }
  return heat;
}

template <typename T>
LossValue<T> cbgm_loss(const CenterOutput<T>& out, const std::vector<InstanceList>& gts) {
  const Shape& s = out.heat.shape();
  if (s.size() != 4 || int(gts.size()) != s[0]) throw InvalidShape("cbgm_loss: expected [N,h,w,C] and N scenes");
  const int n = s[0], h = s[1], w = s[2], c = s[3];
  Tensor<T> target({n, h, w, c});
  std::vector<int> idx;
  std::vector<T> size_tgt, off_t;
  const std::size_t plane = std::size_t(h) * w * c;
  for (int b = 0; b < n; ++b) {
    const Tensor<float> hm = center_heatmap(gts[std::size_t(b)], h, w, c);
    for (std::size_t i = 0; i < plane; ++i) target[b * plane + i] = T(hm[i]);
    for (const auto& inst : gts[std::size_t(b)]) {
      const CenterCell cc = center_cell(inst.box, h, w);
      const int cell = (b * h + cc.y) * w + cc.x;
      idx.push_back(cell * 2);
      idx.push_back(cell * 2 + 1);
      size_tgt.push_back(T(inst.box.w));
      size_tgt.push_back(T(inst.box.h));
      off_t.push_back(T(inst.box.cx() - kFeatureStride * cc.x));
      off_t.push_back(T(inst.box.cy() - kFeatureStride * cc.y));
    }
  }
  const int m = int(idx.size() / 2);
  Var<T> heat_term = focal_loss(out.heat, target);
  Var<T> size_term, off_term;
  if (m == 0) {
    size_term = scale(sum(out.size), T{0});
    off_term = scale(sum(out.offset), T{0});
  } else {
    auto map = std::make_shared<const std::vector<int>>(std::move(idx));
    const T inv = T{1} / T(m);
    size_term = scale(l1_loss(gather(out.size, map, Shape{m, 2}), Tensor<T>({m, 2}, std::move(size_tgt))), inv);
    off_term = scale(l1_loss(gather(out.offset, map, Shape{m, 2}), Tensor<T>({m, 2}, std::move(off_t))), inv);
  }
  return sum_terms<T>({{"cbgm_heat", heat_term}, {"cbgm_size", size_term}, {"cbgm_offset", off_term}});
}

#define SGTN_INSTANTIATE(T)                                                                              \
  template struct CenterHeadParams<T>;                                                                   \
  template CenterOutput<T> cbgm_forward(Graph<T>&, Var<T>, const CenterHeadParams<T>&);                  \
  template ProposalSet cbgm_decode(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int, int, double); \
  template LossValue<T> cbgm_loss(const CenterOutput<T>&, const std::vector<InstanceList>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
