// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

namespace sgtn {

void ModelConfig::validate() const {
  encoder.validate();
  if (num_classes < 1) throw InvalidArgument("model: num_classes must be >= 1");
  if (sgm_dim < 1 || head_dim < 1 || fc_dim < 1 || mask_dim < 1) throw InvalidArgument("model: head widths must be positive");
  if (k_max < 1) throw InvalidArgument("model: k_max must be positive");
  if (train_proposals < 0 || jitter_per_gt < 0) throw InvalidArgument("model: RoI sampling counts must be >= 0");
}

HeadsConfig ModelConfig::heads() const {
  HeadsConfig h;
  h.num_classes = num_classes;
  h.feat_dim = encoder.embed_dim;
  h.roi_dim = sgm_enabled ? sgm_dim : encoder.embed_dim;
  h.head_dim = head_dim;
  h.fc_dim = fc_dim;
  h.mask_dim = mask_dim;
  return h;
}

SgmConfig ModelConfig::sgm() const { return {encoder.embed_dim, sgm_dim, sgm_dim}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.encoder = EncoderConfig::paper_scale();
  c.sgm_dim = 64;
  c.head_dim = 64;
  c.fc_dim = 1024;
  c.mask_dim = 256;
  return c;
}

const std::vector<std::string>& loss_term_names() {
  static const std::vector<std::string> names = {"cbgm_heat", "cbgm_size", "cbgm_offset", "cls",
                                                 "smooth_l1", "ciou",      "mask_bce",    "mask_dice",
                                                 "sgm_fg",    "sgm_edge",  "sgm_corner"};
  return names;
}

std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                             const std::vector<int>& classes, double iou_thresh) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool ok = true;
    for (std::size_t k : kept) {
      if (classes[k] == classes[i] && box_iou(boxes[k], boxes[i]) > iou_thresh) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  return kept;
}

namespace {

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int b) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = static_cast<std::size_t>(numel(s));
  return Tensor<T>(s, std::vector<T>(t.vec().begin() + b * n, t.vec().begin() + (b + 1) * n));
}

template <typename T>
std::vector<float> channel_plane(const Tensor<T>& t, int b, int channel) {
  const int h = t.dim(1), w = t.dim(2), c = t.dim(3);
  std::vector<float> out(std::size_t(h) * w);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = float(t[(std::size_t(b) * h * w + i) * c + channel]);
  return out;
}

}  // namespace

template <typename T>
SgtnModel<T> SgtnModel<T>::create(ParameterStore<T>& store, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Initializer init(seed);
  SgtnModel m;
  m.cfg_ = cfg;
  m.encoder_ = Encoder<T>::create(store, "enc", cfg.encoder, init);
  if (cfg.sgm_enabled) m.sgm_ = SgmParams<T>::create(store, "sgm", cfg.sgm(), init);
  const HeadsConfig hc = cfg.heads();
  m.center_ = CenterHeadParams<T>::create(store, "cbgm", hc, init);
  m.box_ = BoxHeadParams<T>::create(store, "box", hc, init);
  m.mask_ = MaskHeadParams<T>::create(store, "mask", hc, init);
  return m;
}

template <typename T>
ModelForward<T> SgtnModel<T>::forward(Graph<T>& g, const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(3) != 3) throw InvalidShape("model: expected [N,H,W,3] images");
  ModelForward<T> f;
  f.enc = encoder_.forward(g, g.constant(images));
  f.center = cbgm_forward(g, f.enc.feature, center_);
  f.roi_feat = f.enc.feature;
  if (sgm_) {
    Var<T> detail = arfem(g, g.constant(downsample_image4(images)), sgm_->arfem);
    f.sgm = sgm_forward(g, f.enc.feature, detail, *sgm_);
    f.roi_feat = f.sgm->guided;
  }
  return f;
}

template <typename T>
LossValue<T> SgtnModel<T>::loss(Graph<T>& g, const Tensor<T>& images, const std::vector<InstanceList>& gts,
                                std::uint64_t step_seed) const {
  const int n = images.dim(0), H = images.dim(1), W = images.dim(2);
  if (int(gts.size()) != n) throw InvalidArgument("model loss: one instance list per image required");
  const ModelForward<T> f = forward(g, images);
  std::vector<LossValue<T>> parts = {cbgm_loss(f.center, gts)};
  if (f.sgm) {
    std::vector<ShapeTargets> targets;
    for (const auto& gt : gts) targets.push_back(derive_shape_targets(gt, H, W));
    parts.push_back(sgm_loss(*f.sgm, targets));
  }

  // RoIs: ground-truth boxes, jittered copies, and the current top proposals.
  std::mt19937_64 rng(step_seed);
  std::uniform_real_distribution<double> shift(-0.15, 0.15), logscale(-0.2, 0.2);
  std::vector<RoiBox> rois, fg_rois;
  std::vector<int> labels, fg_classes;
  std::vector<Box> fg_props, fg_gts;
  std::vector<int> fg_rows;
  std::vector<Tensor<float>> fg_masks;
  for (int b = 0; b < n; ++b) {
    const InstanceList& gt = gts[std::size_t(b)];
    std::vector<Box> cand;
    for (const auto& inst : gt) {
      cand.push_back(inst.box);
      for (int j = 0; j < cfg_.jitter_per_gt; ++j) {
        const Box& bx = inst.box;
        const double w = bx.w * std::exp(logscale(rng)), h = bx.h * std::exp(logscale(rng));
        const double cx = bx.cx() + shift(rng) * bx.w, cy = bx.cy() + shift(rng) * bx.h;
        cand.push_back(clip_box({cx - 0.5 * w, cy - 0.5 * h, w, h}, W, H));
      }
    }
    if (cfg_.train_proposals > 0) {
      const ProposalSet ps = cbgm_decode(slice_batch(f.center.heat.value(), b), slice_batch(f.center.size.value(), b),
                                         slice_batch(f.center.offset.value(), b), H, W, cfg_.train_proposals,
                                         cfg_.score_thresh);
      cand.insert(cand.end(), ps.boxes.begin(), ps.boxes.end());
    }
    for (const Box& c : cand) {
      if (c.w < 1.0 || c.h < 1.0) continue;
      int best = -1;
      double best_iou = 0;
      for (std::size_t k = 0; k < gt.size(); ++k) {
        const double iou = box_iou(c, gt[k].box);
        if (iou > best_iou) best_iou = iou, best = int(k);
      }
      const RoiBox rb{b, c.x, c.y, c.w, c.h};
      const bool fg = best >= 0 && best_iou >= cfg_.fg_iou;
      labels.push_back(fg ? gt[std::size_t(best)].category + 1 : 0);
      if (fg) {
        fg_rows.push_back(int(rois.size()));
        fg_rois.push_back(rb);
        fg_classes.push_back(gt[std::size_t(best)].category);
        fg_props.push_back(c);
        fg_gts.push_back(gt[std::size_t(best)].box);
        fg_masks.push_back(mask_target(gt[std::size_t(best)].mask, c));
      }
      rois.push_back(rb);
    }
  }
  if (!rois.empty()) {
    const BoxHeadOutput<T> bo = bbox_head(g, f.roi_feat, rois, box_);
    const T inv = T{1} / T(rois.size());
    parts.push_back(sum_terms<T>({{"cls", scale(softmax_cross_entropy(bo.class_logits, labels), inv)}}));
    if (!fg_rows.empty()) {
      std::vector<int> idx;
      for (int r : fg_rows)
        for (int k = 0; k < 4; ++k) idx.push_back(r * 4 + k);
      Var<T> d = gather(bo.deltas, std::make_shared<const std::vector<int>>(std::move(idx)),
                        Shape{int(fg_rows.size()), 4});
      parts.push_back(box_losses(d, fg_props, fg_gts));
      parts.push_back(mask_losses(mask_head(g, f.roi_feat, fg_rois, mask_), fg_classes, fg_masks));
    }
  }
  return merge_losses(parts);
}

template <typename T>
std::vector<std::vector<Prediction>> SgtnModel<T>::predict(const Tensor<T>& images) const {
  Graph<T> g(Phase::kEval, false);
  const ModelForward<T> f = forward(g, images);
  const int n = images.dim(0), H = images.dim(1), W = images.dim(2);
  const Tensor<T>& heat = f.center.heat.value();
  const int fh = heat.dim(1), fw = heat.dim(2);

  std::vector<std::vector<Prediction>> out(static_cast<std::size_t>(n));
  std::vector<RoiBox> rois;
  std::vector<ProposalSet> props;
  for (int b = 0; b < n; ++b) {
    props.push_back(cbgm_decode(slice_batch(heat, b), slice_batch(f.center.size.value(), b),
                                slice_batch(f.center.offset.value(), b), H, W, cfg_.k_max, cfg_.score_thresh));
    for (const Box& bx : props.back().boxes) rois.push_back({b, bx.x, bx.y, bx.w, bx.h});
  }
  if (rois.empty()) return out;

  const BoxHeadOutput<T> bo = bbox_head(g, f.roi_feat, rois, box_);
  const Tensor<T>& logits = bo.class_logits.value();
  const Tensor<T>& deltas = bo.deltas.value();
  const int nc = cfg_.num_classes;

  struct Cand {
    int batch;
    Box box;
    double score;
    int cls;
  };
  std::vector<Cand> cands;
  std::size_t r = 0;
  for (int b = 0; b < n; ++b) {
    const ProposalSet& ps = props[std::size_t(b)];
    for (std::size_t i = 0; i < ps.size(); ++i, ++r) {
      const T* row = logits.data() + r * std::size_t(nc + 1);
      const double mx = *std::max_element(row, row + nc + 1);
      double z = 0;
      for (int k = 0; k <= nc; ++k) z += std::exp(double(row[k]) - mx);
      int best = 1;
      for (int k = 2; k <= nc; ++k)
        if (row[k] > row[best]) best = k;
      const double p = std::exp(double(row[best]) - mx) / z;
      const std::array<double, 4> d = {double(deltas[r * 4]), double(deltas[r * 4 + 1]), double(deltas[r * 4 + 2]),
                                       double(deltas[r * 4 + 3])};
      const Box refined = clip_box(decode_deltas(ps.boxes[i], d), W, H);
      if (refined.w < 1.0 || refined.h < 1.0) continue;
      cands.push_back({b, refined, std::sqrt(ps.scores[i] * p), best - 1});
    }
  }

  std::vector<Cand> kept;
  for (int b = 0; b < n; ++b) {
    std::vector<Box> boxes;
    std::vector<double> scores;
    std::vector<int> classes;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].batch != b) continue;
      boxes.push_back(cands[i].box);
      scores.push_back(cands[i].score);
      classes.push_back(cands[i].cls);
      ids.push_back(i);
    }
    for (std::size_t k : nms(boxes, scores, classes, cfg_.nms_iou)) kept.push_back(cands[ids[k]]);
  }
  if (kept.empty()) return out;

  std::vector<RoiBox> mrois;
  for (const Cand& c : kept) mrois.push_back({c.batch, c.box.x, c.box.y, c.box.w, c.box.h});
  const Tensor<T> masks = mask_head(g, f.roi_feat, mrois, mask_).value();
  std::vector<std::vector<float>> fg(static_cast<std::size_t>(n));
  if (f.sgm) {
    for (int b = 0; b < n; ++b) fg[std::size_t(b)] = channel_plane(f.sgm->probs.value(), b, 0);
  }
  const std::size_t plane = std::size_t(kMaskSize) * kMaskSize;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Cand& c = kept[i];
    std::vector<float> m28(plane);
    for (std::size_t k = 0; k < plane; ++k) m28[k] = float(masks[(i * plane + k) * std::size_t(nc) + std::size_t(c.cls)]);
    const MaskTriplet t = paste_and_fuse(m28, c.box, fg[std::size_t(c.batch)], fh, fw, H, W);
    if (t.mi.empty()) continue;
    out[std::size_t(c.batch)].push_back({c.cls, c.score, c.box, t.full(H, W)});
  }
  return out;
}

template class SgtnModel<float>;
template class SgtnModel<double>;

}  // namespace sgtn
