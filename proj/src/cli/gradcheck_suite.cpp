// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/gradcheck_suite.hpp"

#include <random>

#include "sgtn/attention.hpp"
#include "sgtn/encoder.hpp"
#include "sgtn/heads.hpp"
#include "sgtn/losses.hpp"
#include "sgtn/ops.hpp"
#include "sgtn/sgm.hpp"

namespace sgtn {

namespace {

using TD = Tensor<double>;
using V = Var<double>;
using G = Graph<double>;

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  TD rand(Shape s, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    TD t(std::move(s));
    for (auto& v : t.vec()) v = u(rng_);
    return t;
  }

  // Reduce any output to a scalar with random weights that stay fixed within one case.
  V weighted(V y) {
    std::mt19937_64 r(weight_seed_);
    std::uniform_real_distribution<double> u(-1, 1);
    TD w(y.shape());
    for (auto& v : w.vec()) v = u(r);
    return sum(mul(y, y.graph().constant(std::move(w))));
  }

  void input(const std::string& name, const ScalarFn& f, const TD& x, double h = 1e-5) {
    weight_seed_ = rng_();
    cases.push_back({name, finite_diff_gradcheck(f, x, h)});
  }
  void params(const std::string& name, const ModelFn& f, ParameterStore<double>& store, std::size_t per_param) {
    cases.push_back({name, gradcheck_parameters(f, store, per_param, rng_())});
  }

  void randomize(ParameterStore<double>& store, double scale) {
    for (auto& p : store.all())
      if (p.trainable) p.value = rand(p.value.shape(), -scale, scale);
  }

  std::vector<GradcheckCase> cases;
  std::mt19937_64 rng_;
  std::uint64_t weight_seed_ = 0;
};

void elementwise(Suite& s) {
  const TD x = s.rand({3, 4}), other = s.rand({3, 4}), bias = s.rand({4});
  TD away = x;  // keep relu off its kink
  for (auto& v : away.vec()) v += v > 0 ? 0.1 : -0.1;
  s.input("add", [&](G& g, V v) { return s.weighted(add(v, g.constant(other))); }, x);
  s.input("sub", [&](G& g, V v) { return s.weighted(sub(g.constant(other), v)); }, x);
  s.input("mul", [&](G&, V v) { return s.weighted(mul(v, v)); }, x);
  s.input("scale", [&](G&, V v) { return s.weighted(scale(v, 2.5)); }, x);
  s.input("add_bias", [&](G& g, V v) { return s.weighted(add_bias(g.constant(other), v)); }, bias);
  s.input("gelu", [&](G&, V v) { return s.weighted(gelu(v)); }, x);
  s.input("sigmoid", [&](G&, V v) { return s.weighted(sigmoid(v)); }, x);
  s.input("relu", [&](G&, V v) { return s.weighted(relu(v)); }, away);
  s.input("mean", [&](G&, V v) { return mean(mul(v, v)); }, x);
  s.input("mul_scalar", [&](G& g, V v) { return s.weighted(mul_scalar(reshape(sum(v), {1}), g.constant(other))); }, x);
  auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{3, -1, 3, 11, 0, 5});
  s.input("gather", [&](G&, V v) { return s.weighted(gather(v, idx, {2, 3})); }, x);
  s.input("concat_lastdim", [&](G& g, V v) { return s.weighted(concat_lastdim<double>({v, g.constant(other), v})); }, x);
}

void linalg(Suite& s) {
  const TD w = s.rand({4, 3}), b = s.rand({3}), other = s.rand({2, 5, 4}), left = s.rand({2, 3, 5});
  s.input("matmul", [&](G& g, V v) { return s.weighted(matmul(v, g.constant(w))); }, s.rand({5, 4}));
  s.input("linear", [&](G& g, V v) { return s.weighted(linear(v, g.constant(w), g.constant(b))); }, s.rand({2, 5, 4}));
  s.input("linear.weight", [&](G& g, V v) { return s.weighted(linear(g.constant(other), v, V())); }, w);
  s.input("bmm_nt", [&](G& g, V v) { return s.weighted(bmm(v, g.constant(other), true)); }, s.rand({2, 3, 4}));
  s.input("bmm_nn", [&](G& g, V v) { return s.weighted(bmm(g.constant(left), v, false)); }, s.rand({2, 5, 4}));
  TD mask({1, 3, 3}, 0.0);
  mask.at(0, 0, 2) = -1e9;
  const TD bias = s.rand({2, 3, 3});
  s.input("softmax+attention_bias",
          [&](G& g, V v) { return s.weighted(softmax_lastdim(add_attention_bias(v, g.constant(bias), &mask))); },
          s.rand({2, 2, 3, 3}));
}

void norms(Suite& s) {
  const TD gam = s.rand({3}, 0.5, 1.5), bet = s.rand({3});
  s.input("layer_norm", [&](G& g, V v) { return s.weighted(layer_norm(v, g.constant(gam), g.constant(bet), 1e-5)); },
          s.rand({4, 3}));
  for (Axis axis : {Axis::kRow, Axis::kColumn})
    s.input(axis == Axis::kRow ? "axial_instance_norm.row" : "axial_instance_norm.column",
            [&](G&, V v) { return s.weighted(axial_instance_norm(v, axis, 1e-5)); }, s.rand({2, 4, 3, 2}));
  ParameterStore<double> store;
  auto& rm = store.create("rm", TD({3}), false);
  auto& rv = store.create("rv", TD({3}, 1.0), false);
  s.input("batch_norm",
          [&](G& g, V v) { return s.weighted(batch_norm(v, g.constant(gam), g.constant(bet), rm, rv)); },
          s.rand({2, 3, 2, 3}));
}

void convs(Suite& s) {
  const TD k = s.rand({2, 3, 3, 3}), b = s.rand({2}), x = s.rand({1, 5, 4, 3}), dk = s.rand({3, 2, 2, 2});
  s.input("conv2d.dilated", [&](G& g, V v) { return s.weighted(conv2d(v, g.constant(k), g.constant(b), {1, 2, 2})); },
          x);
  s.input("conv2d.kernel", [&](G& g, V v) { return s.weighted(conv2d(g.constant(x), v, V(), {2, 1, 1})); }, k);
  s.input("deconv2d_s2", [&](G& g, V v) { return s.weighted(deconv2d_s2(v, g.constant(dk), g.constant(b))); }, x);
  const std::vector<RoiBox> boxes = {{0, 1.3, 2.1, 9.7, 7.4}, {0, -2.0, 5.0, 6.0, 30.0}};
  s.input("roi_align", [&](G&, V v) { return s.weighted(roi_align(v, boxes, 3, 0.5, 2)); }, x);
}

void losses(Suite& s) {
  TD t = s.rand({2, 3, 2}, 0, 1);
  for (auto& v : t.vec()) v = v > 0.5;
  const TD w = s.rand({2, 3, 2}, 0.5, 4), p = s.rand({2, 3, 2}, 0.05, 0.95);
  s.input("weighted_bce", [&](G&, V v) { return weighted_bce(v, t, w).total; }, p);
  s.input("dice_loss", [&](G&, V v) { return dice_loss(v, t).total; }, p);
  TD heat = s.rand({2, 3, 2}, 0, 0.9);
  heat.at(0, 1, 1) = 1.0;
  s.input("focal_loss", [&](G&, V v) { return focal_loss(v, heat); }, p);
  const TD reg = s.rand({3, 4});
  TD shifted = reg;
  for (auto& v : shifted.vec()) v += 0.3;  // away from the |x| kink
  s.input("smooth_l1", [&](G&, V v) { return smooth_l1(v, reg); }, shifted);
  s.input("l1_loss", [&](G&, V v) { return l1_loss(v, reg); }, shifted);
  s.input("softmax_cross_entropy", [&](G&, V v) { return softmax_cross_entropy(v, {0, 2, 1}); }, s.rand({3, 4}));
  const std::vector<Box> props = {{2, 3, 10, 12}, {20, 18, 8, 6}}, gts = {{3, 2, 11, 10}, {19, 20, 9, 7}};
  s.input("box_losses", [&](G&, V v) { return box_losses(v, props, gts).total; }, s.rand({2, 4}, -0.2, 0.2));
}

void attention(Suite& s) {
  struct Case {
    const char* name;
    AttentionConfig cfg;
    bool bias;
    int kind;
  };
  AttentionConfig wcfg{4, 2, 4, 2}, rcfg{4, 2, 0, 0};
  AttentionConfig ccfg = rcfg;
  ccfg.axis = Axis::kColumn;
  for (const Case& c : {Case{"wmsa", wcfg, true, 0}, Case{"swmsa", wcfg, true, 1}, Case{"axial_msa.row", rcfg, false, 2},
                        Case{"axial_msa.column", ccfg, false, 2}}) {
    ParameterStore<double> store;
    Initializer init(s.rng_());
    const auto p = AttentionParams<double>::create(store, "a", c.cfg, init, c.bias);
    s.randomize(store, 0.5);
    const TD x = s.rand({6, 5, 4}), up = s.rand({6, 5, 4});
    auto apply = [&](V v) {
      if (c.kind == 0) return wmsa(v, c.cfg, p);
      if (c.kind == 1) return swmsa(v, c.cfg, p);
      return axial_msa(v, c.cfg, p);
    };
    s.input(std::string(c.name) + " (input)", [&](G& g, V v) { return sum(mul(apply(v), g.constant(up))); }, x);
    s.params(std::string(c.name) + " (params)",
             [&](G& g) { return sum(mul(apply(g.constant(x)), g.constant(up))); }, store, 0);
  }
}

void lswin(Suite& s) {
  ParameterStore<double> store;
  Initializer init(s.rng_());
  auto p = LswinBlockParams<double>::create(store, "blk", 4, 2, 2, 2, true, EncoderVariant::kLswin, init);
  s.randomize(store, 0.3);
  p.gate.alpha->value[0] = 0.8;
  p.gate.beta->value[0] = 0.6;
  const TD x = s.rand({1, 4, 3, 4}), up = s.rand({1, 4, 3, 4});
  auto f = [&](G& g, V v) { return sum(mul(lswin_block(g, v, p), g.constant(up))); };
  s.input("lswin_block (input)", f, x);
  s.params("lswin_block (params)", [&](G& g) { return f(g, g.constant(x)); }, store, 0);
}

Instance rect_instance(int h, int w, int x0, int y0, int bw, int bh, int category) {
  Instance inst;
  inst.category = category;
  inst.mask = Mask(h, w);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) inst.mask.at(y, x) = 1;
  inst.box = tight_box(inst.mask);
  return inst;
}

void sgm(Suite& s) {
  ParameterStore<double> store;
  Initializer init(s.rng_());
  const auto p = SgmParams<double>::create(store, "sgm", SgmConfig{3, 2, 3}, init);
  const TD enc = s.rand({2, 8, 8, 3}), img = s.rand({2, 8, 8, 3}, 0, 1);
  const std::vector<ShapeTargets> t = {
      derive_shape_targets({rect_instance(32, 32, 3, 4, 10, 12, 0), rect_instance(32, 32, 18, 16, 9, 11, 1)}, 32, 32),
      derive_shape_targets({rect_instance(32, 32, 6, 20, 20, 8, 2)}, 32, 32)};
  auto f = [&](G& g, V e) { return sgm_loss(sgm_forward(g, e, arfem(g, g.constant(img), p.arfem), p), t).total; };
  s.input("sgm_forward+sgm_loss (input)", f, enc);
  s.params("sgm_forward+sgm_loss (params)", [&](G& g) { return f(g, g.constant(enc)); }, store, 4);
}

void heads(Suite& s) {
  HeadsConfig cfg;
  cfg.num_classes = 2;
  cfg.feat_dim = 3;
  cfg.roi_dim = 2;
  cfg.head_dim = 3;
  cfg.fc_dim = 6;
  cfg.mask_dim = 2;
  ParameterStore<double> store;
  Initializer init(s.rng_());
  const auto cp = CenterHeadParams<double>::create(store, "cbgm", cfg, init);
  const auto bp = BoxHeadParams<double>::create(store, "box", cfg, init);
  const auto mp = MaskHeadParams<double>::create(store, "mask", cfg, init);
  // zero biases behind a dead channel sit exactly on the ReLU kink
  for (auto& prm : store.all())
    if (prm.trainable && prm.name.ends_with(".bias")) prm.value = s.rand(prm.value.shape(), -0.3, 0.3);
  const TD feat = s.rand({1, 6, 6, 3}), roi_feat = s.rand({1, 6, 6, 2});
  const InstanceList scene = {rect_instance(24, 24, 2, 3, 8, 10, 0), rect_instance(24, 24, 12, 10, 9, 7, 1)};
  const std::vector<RoiBox> rois = {{0, 1.5, 2.5, 9.0, 11.0}, {0, 11.0, 9.5, 10.0, 8.0}};
  const std::vector<Box> props = {{1.5, 2.5, 9.0, 11.0}, {11.0, 9.5, 10.0, 8.0}};
  const std::vector<Box> gts = {scene[0].box, scene[1].box};
  const std::vector<Tensor<float>> mt = {mask_target(scene[0].mask, props[0]), mask_target(scene[1].mask, props[1])};
  auto loss = [&](G& g, V f, V rf) {
    const auto bo = bbox_head(g, rf, rois, bp);
    std::vector<LossValue<double>> parts = {cbgm_loss(cbgm_forward(g, f, cp), {scene}), box_losses(bo.deltas, props, gts),
                                            mask_losses(mask_head(g, rf, rois, mp), {0, 1}, mt)};
    parts.push_back(sum_terms<double>({{"cls", softmax_cross_entropy(bo.class_logits, {1, 2})}}));
    return merge_losses(parts).total;
  };
  s.input("heads+losses (roi feature)", [&](G& g, V rf) { return loss(g, g.constant(feat), rf); }, roi_feat);
  s.params("heads+losses (params)", [&](G& g) { return loss(g, g.constant(feat), g.constant(roi_feat)); }, store, 4);
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed) {
  Suite s(seed);
  elementwise(s);
  linalg(s);
  norms(s);
  convs(s);
  losses(s);
  attention(s);
  lswin(s);
  sgm(s);
  heads(s);
  return std::move(s.cases);
}

}  // namespace sgtn
