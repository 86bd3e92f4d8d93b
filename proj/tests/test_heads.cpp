// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "sgtn/gradcheck.hpp"
#include "sgtn/heads.hpp"
#include "test_util.hpp"

using namespace sgtn;
using sgtn::testing::max_abs_diff;
using sgtn::testing::random_instances;
using sgtn::testing::random_tensor;

namespace {

using TD = Tensor<double>;

struct DecodeInputs {
  TD heat, size, offset;
  DecodeInputs(int h, int w, int c) : heat({h, w, c}), size({h, w, 2}), offset({h, w, 2}) {}
};

Instance box_instance(int h, int w, int x0, int y0, int bw, int bh, int category) {
  Instance inst;
  inst.category = category;
  inst.mask = Mask(h, w);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) inst.mask.at(y, x) = 1;
  inst.box = tight_box(inst.mask);
  return inst;
}

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-20, 80), ext(1, 40);
  return {pos(rng), pos(rng), ext(rng), ext(rng)};
}

HeadsConfig tiny_heads() {
  HeadsConfig cfg;
  cfg.num_classes = 2;
  cfg.feat_dim = 3;
  cfg.roi_dim = 2;
  cfg.head_dim = 3;
  cfg.fc_dim = 6;
  cfg.mask_dim = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("heads") {
  TEST_CASE("decode of a single synthetic peak") {
    DecodeInputs d(8, 10, 3);
    d.heat.at(5, 7, 1) = 1.0;
    d.size.at(5, 7, 0) = 10.0;
    d.size.at(5, 7, 1) = 6.0;
    const ProposalSet p = cbgm_decode(d.heat, d.size, d.offset, 32, 40, 100, 0.05);
    REQUIRE(p.size() == 1);
    CHECK(p.boxes[0].cx() == 4.0 * 7);
    CHECK(p.boxes[0].cy() == 4.0 * 5);
    CHECK(p.boxes[0].w == 10.0);
    CHECK(p.boxes[0].h == 6.0);
    CHECK(p.classes[0] == 1);
    CHECK(p.scores[0] == 1.0);
  }

  TEST_CASE("decode thresholds, caps and orders") {
    DecodeInputs d(8, 8, 2);
    d.size.fill(4.0);
    d.heat.fill(0.01);
    CHECK(cbgm_decode(d.heat, d.size, d.offset, 32, 32, 100, 0.05).size() == 0);
    CHECK_THROWS_AS(cbgm_decode(d.heat, d.size, d.offset, 32, 32, 0, 0.05), InvalidArgument);
    d.heat.at(1, 1, 0) = 0.5;
    d.heat.at(6, 6, 0) = 0.9;
    d.heat.at(1, 6, 1) = 0.5;
    d.heat.at(4, 1, 1) = 0.7;
    const ProposalSet p = cbgm_decode(d.heat, d.size, d.offset, 32, 32, 100, 0.05);
    REQUIRE(p.size() == 4);
    CHECK(p.scores == std::vector<double>{0.9, 0.7, 0.5, 0.5});
    CHECK(p.boxes[2].cx() == 4.0);  // equal scores keep decode order
    CHECK(p.boxes[3].cx() == 24.0);
    CHECK(cbgm_decode(d.heat, d.size, d.offset, 32, 32, 2, 0.05).size() == 2);
  }

  TEST_CASE("a 2x2 plateau yields one detection at its first index") {
    DecodeInputs d(6, 6, 1);
    d.size.fill(8.0);
    for (int y = 2; y < 4; ++y)
      for (int x = 2; x < 4; ++x) d.heat.at(y, x, 0) = 0.8;
    const ProposalSet p = cbgm_decode(d.heat, d.size, d.offset, 24, 24, 100, 0.05);
    REQUIRE(p.size() == 1);
    CHECK(p.boxes[0].cx() == 8.0);
    CHECK(p.boxes[0].cy() == 8.0);
  }

  TEST_CASE("decoded boxes are clipped to the image") {
    DecodeInputs d(4, 4, 1);
    d.heat.at(0, 0, 0) = 0.9;
    d.size.at(0, 0, 0) = 10;
    d.size.at(0, 0, 1) = 10;
    const ProposalSet p = cbgm_decode(d.heat, d.size, d.offset, 16, 16, 10, 0.05);
    REQUIRE(p.size() == 1);
    CHECK(p.boxes[0] == Box{0, 0, 5, 5});
  }

  TEST_CASE("center heatmap splats") {
    const Instance a = box_instance(64, 64, 10, 10, 24, 24, 1);
    const Tensor<float> hm = center_heatmap({a}, 16, 16, 2);
    // center pixel 22 lies in cell 5
    CHECK(hm.at(5, 5, 1) == 1.0f);
    float mx = 0;
    int ones = 0;
    for (float v : hm.vec()) {
      CHECK(v >= 0.0f);
      mx = std::max(mx, v);
      ones += v == 1.0f;
    }
    CHECK(ones == 1);
    CHECK(hm.at(5, 5, 0) == 0.0f);
    CHECK(gaussian_radius(1, 1) < 1.0);
    CHECK(gaussian_radius(6, 6) > 1.0);
  }

  TEST_CASE("cbgm loss examples") {
    // 4x4-px objects get a radius-0 splat
    const InstanceList scene = {box_instance(32, 32, 4, 4, 4, 4, 0), box_instance(32, 32, 20, 12, 4, 4, 1)};
    const Tensor<float> hm = center_heatmap(scene, 8, 8, 2);
    TD size({1, 8, 8, 2}), offset({1, 8, 8, 2});
    for (const auto& inst : scene) {
      const int cx = int(inst.box.cx() / 4), cy = int(inst.box.cy() / 4);
      size.at(0, cy, cx, 0) = inst.box.w;
      size.at(0, cy, cx, 1) = inst.box.h;
      offset.at(0, cy, cx, 0) = inst.box.cx() - 4 * cx;
      offset.at(0, cy, cx, 1) = inst.box.cy() - 4 * cy;
    }
    Graph<double> g;
    CenterOutput<double> out{g.constant(hm.cast<double>().reshape({1, 8, 8, 2})), g.constant(size), g.constant(offset)};
    const auto l = cbgm_loss(out, {scene});
    CHECK(l.terms.at("cbgm_heat") <= 1e-6);
    CHECK(l.terms.at("cbgm_size") == 0.0);
    CHECK(l.terms.at("cbgm_offset") == 0.0);

    CenterOutput<double> zero{g.constant(TD({1, 8, 8, 2})), g.constant(size), g.constant(offset)};
    CHECK(cbgm_loss(zero, {InstanceList{}}).scalar <= 1e-6);
  }

  TEST_CASE("cbgm loss decreases over 50 gradient steps on a fixed scene") {
    ParameterStore<double> store;
    HeadsConfig cfg = tiny_heads();
    cfg.feat_dim = 4;
    cfg.head_dim = 8;
    Initializer init(2);
    const auto p = CenterHeadParams<double>::create(store, "cbgm", cfg, init);
    std::mt19937_64 rng(3);
    const TD feat = random_tensor<double>({1, 8, 8, 4}, rng);
    const InstanceList scene = {box_instance(32, 32, 2, 3, 12, 10, 0), box_instance(32, 32, 16, 18, 9, 11, 1)};
    double prev = INFINITY;
    int drops = 0;
    for (int step = 0; step < 50; ++step) {
      store.zero_grad();
      Graph<double> g;
      const auto l = cbgm_loss(cbgm_forward(g, g.constant(feat), p), {scene});
      g.backward(l.total);
      CHECK(l.scalar <= prev);
      drops += l.scalar < prev;
      prev = l.scalar;
      for (auto& prm : store.all())
        if (prm.trainable && !prm.grad.empty())
          for (std::size_t i = 0; i < prm.value.size(); ++i) prm.value[i] -= 2e-3 * prm.grad[i];
    }
    CHECK(drops == 50);
  }

  TEST_CASE("roi_align is exact on constants and linear in the feature") {
    std::mt19937_64 rng(4);
    Graph<double> g;
    const std::vector<RoiBox> rois = {{0, 3.5, 2.0, 17.0, 9.0}, {1, 0, 0, 32, 32}, {0, 20.2, 11.7, 5.3, 13.9}};
    const TD c({2, 8, 8, 3}, 0.37);
    for (double v : roi_align(g.constant(c), rois, kBoxRoi, 0.25).value().vec()) CHECK(v == doctest::Approx(0.37));
    CHECK(roi_align(g.constant(c), rois, kBoxRoi, 0.25).shape() == Shape{3, 7, 7, 3});
    for (int trial = 0; trial < 10; ++trial) {
      const TD f = random_tensor<double>({2, 8, 8, 3}, rng), h = random_tensor<double>({2, 8, 8, 3}, rng);
      const double a = 1.7, b = -0.6;
      TD mix(f.shape());
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f[i] + b * h[i];
      const TD lhs = roi_align(g.constant(mix), rois, kMaskRoi, 0.25).value();
      const TD rf = roi_align(g.constant(f), rois, kMaskRoi, 0.25).value();
      const TD rh = roi_align(g.constant(h), rois, kMaskRoi, 0.25).value();
      double err = 0;
      for (std::size_t i = 0; i < lhs.size(); ++i) err = std::max(err, std::abs(lhs[i] - (a * rf[i] + b * rh[i])));
      CHECK(err < 1e-12);
    }
  }

  TEST_CASE("box delta encode and decode are inverse") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
      const Box p = random_box(rng), t = random_box(rng);
      const Box r = decode_deltas(p, encode_deltas(p, t));
      CHECK(std::abs(r.x - t.x) <= 1e-6);
      CHECK(std::abs(r.y - t.y) <= 1e-6);
      CHECK(std::abs(r.w - t.w) <= 1e-6);
      CHECK(std::abs(r.h - t.h) <= 1e-6);
    }
    const Box p{3, 4, 10, 20};
    CHECK(decode_deltas(p, {0, 0, 0, 0}) == p);
  }

  TEST_CASE("CIoU range and the concentric same-aspect case") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
      const Box a = random_box(rng), b = random_box(rng);
      const double l = ciou_loss_value(a, b);
      CHECK(l >= 0.0);
      CHECK(l < 2.5);
      const double s = 0.2 + 3.0 * double(rng() % 1000) / 1000;
      const Box c{b.cx() - 0.5 * s * b.w, b.cy() - 0.5 * s * b.h, s * b.w, s * b.h};
      CHECK(ciou_loss_value(c, b) == doctest::Approx(1.0 - box_iou(c, b)).epsilon(1e-9));
    }
  }

  TEST_CASE("bbox head contract") {
    ParameterStore<double> store;
    HeadsConfig cfg = tiny_heads();
    Initializer init(8);
    const auto p = BoxHeadParams<double>::create(store, "box", cfg, init);
    std::mt19937_64 rng(9);
    Graph<double> g;
    const auto out = bbox_head(g, g.constant(random_tensor<double>({1, 8, 8, 2}, rng)),
                               {{0, 1, 1, 10, 12}, {0, 5, 6, 20, 9}}, p);
    CHECK(out.class_logits.shape() == Shape{2, 3});
    CHECK(out.deltas.shape() == Shape{2, 4});
  }

  TEST_CASE("mask head contract and perfect predictions") {
    ParameterStore<double> store;
    const HeadsConfig cfg = tiny_heads();
    Initializer init(10);
    const auto p = MaskHeadParams<double>::create(store, "mask", cfg, init);
    std::mt19937_64 rng(11);
    Graph<double> g;
    const Var<double> m = mask_head(g, g.constant(random_tensor<double>({1, 8, 8, 2}, rng)), {{0, 2, 2, 12, 12}}, p);
    CHECK(m.shape() == Shape{1, 28, 28, 2});
    for (double v : m.value().vec()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }

    const Instance inst = box_instance(32, 32, 4, 6, 10, 14, 1);
    const Tensor<float> tgt = mask_target(inst.mask, Box{2, 2, 20, 24});
    TD probs({1, 28, 28, 2}, 0.5);
    for (int i = 0; i < 28 * 28; ++i) probs[std::size_t(i) * 2 + 1] = 1.0 / (1.0 + std::exp(tgt[i] > 0.5 ? -20.0 : 20.0));
    const auto l = mask_losses(g.constant(probs), {1}, {tgt});
    CHECK(l.scalar <= 1e-3);
    CHECK(l.terms.count("mask_bce") == 1);
    CHECK(l.terms.count("mask_dice") == 1);
  }

  TEST_CASE("mask targets") {
    const Instance inst = box_instance(32, 32, 4, 6, 10, 14, 0);
    const Tensor<float> full = mask_target(inst.mask, inst.box);
    for (float v : full.vec()) CHECK(v == 1.0f);
    const Tensor<float> half = mask_target(inst.mask, Box{4, 6, 20, 14});
    for (int i = 0; i < 28; ++i) {
      CHECK(half.at(i, 0) == 1.0f);
      CHECK(half.at(i, 27) == 0.0f);
    }
    CHECK_THROWS_AS(mask_target(inst.mask, Box{0, 0, 0, 4}), InvalidArgument);
  }

  TEST_CASE("fusion with constant foreground maps") {
    std::mt19937_64 rng(12);
    std::vector<float> m28(28 * 28);
    for (auto& v : m28) v = float(rng() % 1000) / 1000.0f;
    const Box box{5.3, 7.8, 20.4, 11.1};
    const MaskTriplet one = paste_and_fuse(m28, box, std::vector<float>(64, 1.0f), 8, 8, 32, 32);
    const MaskTriplet none = paste_and_fuse(m28, box, std::vector<float>(64, 0.0f), 8, 8, 32, 32);
    const MaskTriplet veto_free = paste_and_fuse(m28, box, {}, 0, 0, 32, 32);
    CHECK(one.w == 21);
    CHECK(one.h == 12);
    CHECK(none.mi.area() == 0);
    CHECK(one.mi == veto_free.mi);
    for (std::size_t i = 0; i < one.ms.size(); ++i) CHECK(one.mi.data[i] == (one.ms[i] >= 0.5f));

    const MaskTriplet out = paste_and_fuse(m28, Box{40, 40, 5, 5}, {}, 0, 0, 32, 32);
    CHECK(out.w * out.h == 0);
    const MaskTriplet part = paste_and_fuse(m28, Box{-4, 28, 10, 10}, {}, 0, 0, 32, 32);
    CHECK(part.x0 == 0);
    CHECK(part.w == 6);
    CHECK(part.h == 4);
    CHECK(part.full(32, 32).area() == part.mi.area());
  }

  TEST_CASE("fusion never adds pixels") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<float> m28(28 * 28), fg(16 * 16);
      for (auto& v : m28) v = float(u(rng));
      for (auto& v : fg) v = float(u(rng));
      const Box box{u(rng) * 60 - 10, u(rng) * 60 - 10, 1 + u(rng) * 40, 1 + u(rng) * 40};
      const MaskTriplet t = paste_and_fuse(m28, box, fg, 16, 16, 64, 64);
      REQUIRE(t.ms.size() == t.mi.data.size());
      long long ms_area = 0;
      for (std::size_t i = 0; i < t.ms.size(); ++i) {
        if (t.mi.data[i]) {
          CHECK(t.ms[i] >= 0.5f);
          CHECK(t.mc.data[i] == 1);
        }
        ms_area += t.ms[i] >= 0.5f;
      }
      CHECK(t.mi.area() <= std::min(ms_area, t.mc.area()));
    }
  }

  TEST_CASE("gradcheck through center, box and mask heads") {
    ParameterStore<double> store;
    const HeadsConfig cfg = tiny_heads();
    Initializer init(14);
    const auto cp = CenterHeadParams<double>::create(store, "cbgm", cfg, init);
    const auto bp = BoxHeadParams<double>::create(store, "box", cfg, init);
    const auto mp = MaskHeadParams<double>::create(store, "mask", cfg, init);
    std::mt19937_64 rng(15);
    // zero biases behind a dead channel sit exactly on the ReLU kink
    for (auto& prm : store.all())
      if (prm.trainable && prm.name.ends_with(".bias")) prm.value = random_tensor<double>(prm.value.shape(), rng, -0.3, 0.3);
    const TD feat = random_tensor<double>({1, 6, 6, 3}, rng);
    const TD roi_feat = random_tensor<double>({1, 6, 6, 2}, rng);
    const InstanceList scene = {box_instance(24, 24, 2, 3, 8, 10, 0), box_instance(24, 24, 12, 10, 9, 7, 1)};
    const std::vector<RoiBox> rois = {{0, 1.5, 2.5, 9.0, 11.0}, {0, 11.0, 9.5, 10.0, 8.0}};
    const std::vector<Box> props = {{1.5, 2.5, 9.0, 11.0}, {11.0, 9.5, 10.0, 8.0}};
    const std::vector<Box> gts = {scene[0].box, scene[1].box};
    const std::vector<Tensor<float>> mt = {mask_target(scene[0].mask, props[0]), mask_target(scene[1].mask, props[1])};

    auto heads_loss = [&](Graph<double>& g, Var<double> f, Var<double> rf) {
      const auto bo = bbox_head(g, rf, rois, bp);
      std::vector<LossValue<double>> parts = {cbgm_loss(cbgm_forward(g, f, cp), {scene}),
                                              box_losses(bo.deltas, props, gts),
                                              mask_losses(mask_head(g, rf, rois, mp), {0, 1}, mt)};
      parts.push_back(sum_terms<double>({{"cls", softmax_cross_entropy(bo.class_logits, {1, 2})}}));
      return merge_losses(parts).total;
    };
    const auto rx = finite_diff_gradcheck([&](Graph<double>& g, Var<double> rf) { return heads_loss(g, g.constant(feat), rf); },
                                          roi_feat);
    INFO("roi feature worst " << rx.worst << " " << rx.max_rel_error);
    CHECK(rx.passed(1e-5));
    const auto rp = gradcheck_parameters(
        [&](Graph<double>& g) { return heads_loss(g, g.constant(feat), g.constant(roi_feat)); }, store, 4, 16);
    INFO("param worst " << rp.worst << " " << rp.max_rel_error);
    CHECK(rp.passed(1e-5));
  }
}
