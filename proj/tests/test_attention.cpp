// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "sgtn/attention.hpp"
#include "sgtn/gradcheck.hpp"
#include "attention_oracle.hpp"
#include "test_util.hpp"

using namespace sgtn;
using sgtn::testing::max_abs_diff;
using sgtn::testing::random_tensor;

using TD = Tensor<double>;
using Vec = std::vector<double>;
using sgtn::testing::affine;
using sgtn::testing::cuts;
using sgtn::testing::dense_reference;
using sgtn::testing::Fixture;
using sgtn::testing::partition_reference;
using sgtn::testing::run;

TEST_SUITE("attention") {
  TEST_CASE("config validation") {
    CHECK_THROWS_AS((AttentionConfig{6, 4, 0, 0}.validate()), InvalidArgument);
    CHECK_THROWS_AS((AttentionConfig{8, 2, 4, 4}.validate()), InvalidArgument);
    CHECK_NOTHROW((AttentionConfig{8, 2, 4, 2}.validate()));
  }

  TEST_CASE("single token attends to itself") {
    Fixture f({4, 2, 0, 0}, false, 1);
    std::mt19937_64 rng(1);
    TD x = random_tensor<double>({1, 1, 4}, rng);
    AttentionTrace<double> tr;
    Graph<double> g;
    auto out = multi_head_qkv_attention(g.constant(x), f.cfg, f.params, nullptr, Var<double>(), &tr).value();
    for (double s : tr.weights.vec()) CHECK(s == 1.0);
    const auto v = affine(x.vec(), *f.params.qkv.weight, f.params.qkv.bias, 8, 4);
    const auto ref = affine(v, *f.params.proj.weight, f.params.proj.bias, 0, 4);
    for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }

  TEST_CASE("identical tokens give uniform weights") {
    Fixture f({4, 2, 0, 0}, false, 2);
    TD x({1, 6, 4});
    for (int i = 0; i < 6; ++i)
      for (int c = 0; c < 4; ++c) x.at(0, i, c) = 0.3 * c - 0.1;
    AttentionTrace<double> tr;
    Graph<double> g;
    multi_head_qkv_attention(g.constant(x), f.cfg, f.params, nullptr, Var<double>(), &tr);
    for (double s : tr.weights.vec()) CHECK(s == doctest::Approx(1.0 / 6).epsilon(1e-12));
  }

  TEST_CASE("multi-head attention matches the dense loop oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      Fixture f({4, 2, 0, 0, trial % 2 == 0}, false, 10 + trial);
      std::mt19937_64 rng(trial);
      TD x = random_tensor<double>({1, 5, 4}, rng, -2, 2);
      Graph<double> g;
      auto out = multi_head_qkv_attention(g.constant(x), f.cfg, f.params).value();
      std::vector<Vec> tokens(5);
      for (int i = 0; i < 5; ++i) tokens[i] = Vec(x.data() + i * 4, x.data() + i * 4 + 4);
      const auto ref = dense_reference(tokens, f, {});
      double diff = 0;
      for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 4; ++c) diff = std::max(diff, std::abs(out.at(0, i, c) - ref[i][c]));
      CHECK(diff <= 1e-6);
    }
    Fixture f({4, 2, 0, 0}, false, 3);
    Graph<double> g;
    TD bad_mask({1, 3, 3});
    CHECK_THROWS_AS(multi_head_qkv_attention(g.constant(TD({1, 5, 4})), f.cfg, f.params, &bad_mask), InvalidShape);
  }

  TEST_CASE("wmsa with one window equals global attention") {
    Fixture f({6, 3, 4, 0}, true, 4);
    std::mt19937_64 rng(4);
    TD x = random_tensor<double>({4, 4, 6}, rng);
    auto out = run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, x);
    CHECK(max_abs_diff(out, partition_reference(x, f, {0, 4}, {0, 4})) <= 1e-9);
  }

  TEST_CASE("wmsa matches per-window dense attention, including padded maps") {
    for (int trial = 0; trial < 20; ++trial) {
      const int h = trial % 2 == 0 ? 8 : 7, w = trial % 3 == 0 ? 8 : 6;
      Fixture f({4, 2, 4, 0}, true, 20 + trial);
      std::mt19937_64 rng(100 + trial);
      TD x = random_tensor<double>({h, w, 4}, rng, -2, 2);
      auto out = run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, x);
      const int hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4;
      CHECK(max_abs_diff(out, partition_reference(x, f, cuts(hp, 4, 0), cuts(wp, 4, 0))) <= 1e-6);
    }
  }

  TEST_CASE("(8,8,c) with M=4 is four windows of sixteen tokens") {
    Fixture f({4, 2, 4, 0}, true, 5);
    std::mt19937_64 rng(5);
    AttentionTrace<double> tr;
    run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, random_tensor<double>({8, 8, 4}, rng), &tr);
    CHECK(tr.weights.shape() == Shape{4, 2, 16, 16});
  }

  TEST_CASE("wmsa locality: a pixel only influences its own window") {
    Fixture f({4, 2, 4, 0}, true, 6);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      TD x = random_tensor<double>({8, 8, 4}, rng);
      auto base = run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, x);
      const int py = static_cast<int>(rng() % 8), px = static_cast<int>(rng() % 8);
      x.at(py, px, 1) += 0.5;
      auto moved = run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, x);
      for (int y = 0; y < 8; ++y)
        for (int xx = 0; xx < 8; ++xx) {
          double d = 0;
          for (int c = 0; c < 4; ++c) d = std::max(d, std::abs(base.at(y, xx, c) - moved.at(y, xx, c)));
          const bool same = y / 4 == py / 4 && xx / 4 == px / 4;
          CHECK((same ? d > 0 : d == 0));
        }
    }
  }

  TEST_CASE("swmsa with shift 0 equals wmsa") {
    for (int trial = 0; trial < 20; ++trial) {
      Fixture f({4, 2, 4, 0}, true, 30 + trial);
      std::mt19937_64 rng(200 + trial);
      TD x = random_tensor<double>({1 + trial % 9, 3 + trial % 7, 4}, rng);
      auto a = run([&](Var<double> v, auto* t) { return wmsa(v, f.cfg, f.params, t); }, x);
      auto b = run([&](Var<double> v, auto* t) { return swmsa(v, f.cfg, f.params, t); }, x);
      CHECK(max_abs_diff(a, b) <= 1e-12);
    }
  }

  TEST_CASE("swmsa matches the physically re-partitioned shifted windows") {
    for (int trial = 0; trial < 20; ++trial) {
      const int h = trial < 10 ? 8 : 6 + trial % 5, w = trial < 10 ? 8 : 5 + trial % 4;
      Fixture f({4, 2, 4, 2}, true, 40 + trial);
      std::mt19937_64 rng(300 + trial);
      TD x = random_tensor<double>({h, w, 4}, rng, -2, 2);
      auto out = run([&](Var<double> v, auto* t) { return swmsa(v, f.cfg, f.params, t); }, x);
      const int hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4;
      CHECK(max_abs_diff(out, partition_reference(x, f, cuts(hp, 4, 2), cuts(wp, 4, 2))) <= 1e-6);
    }
  }

  TEST_CASE("cyclic shift round trip with identity attention") {
    // V = x, proj = identity, and a dominant zero-offset bias make every token
    // attend only to itself, so the shifted pipeline must return its input.
    ParameterStore<double> store;
    Initializer init(1);
    AttentionConfig cfg{3, 1, 4, 2};
    auto p = AttentionParams<double>::create(store, "id", cfg, init, true);
    p.qkv.weight->value.fill(0);
    for (int c = 0; c < 3; ++c) p.qkv.weight->value.at(c, 6 + c) = 1;
    p.proj.weight->value.fill(0);
    for (int c = 0; c < 3; ++c) p.proj.weight->value.at(c, c) = 1;
    p.relative_bias->value.fill(0);
    p.relative_bias->value.at(3 * 7 + 3, 0) = 1000;
    std::mt19937_64 rng(7);
    TD x = random_tensor<double>({5, 7, 3}, rng);
    auto out = run([&](Var<double> v, auto* t) { return swmsa(v, cfg, p, t); }, x);
    CHECK(max_abs_diff(out, x) == 0.0);
  }

  TEST_CASE("shifted window mask separates wrapped segments") {
    auto m = shifted_window_mask(8, 8, 4, 2);
    CHECK(m.shape() == Shape{4, 16, 16});
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) CHECK(m.at(0, i, j) == 0.0);
    // Last window: token (0,0) and token (3,3) come from different segments.
    CHECK(m.at(3, 0, 15) == -1e9);
    CHECK(m.at(3, 0, 1) == 0.0);
    CHECK(m.at(3, 0, 2) == -1e9);
  }

  TEST_CASE("relative position index covers the table") {
    const auto idx = relative_position_index(3);
    CHECK(idx.size() == 81);
    CHECK(idx[0] == 12);  // zero offset sits at the table center
    CHECK(*std::max_element(idx.begin(), idx.end()) == 24);
    CHECK(*std::min_element(idx.begin(), idx.end()) == 0);
  }

  TEST_CASE("axial attention matches per-row and per-column dense attention") {
    for (int trial = 0; trial < 20; ++trial) {
      const Axis axis = trial % 2 ? Axis::kColumn : Axis::kRow;
      AttentionConfig cfg{4, 2, 0, 0};
      cfg.axis = axis;
      Fixture f(cfg, false, 50 + trial);
      std::mt19937_64 rng(400 + trial);
      TD x = random_tensor<double>({6, 5, 4}, rng, -2, 2);
      auto out = run([&](Var<double> v, auto* t) { return axial_msa(v, f.cfg, f.params, t); }, x);
      TD ref({6, 5, 4});
      const int groups = axis == Axis::kRow ? 6 : 5, len = axis == Axis::kRow ? 5 : 6;
      for (int gi = 0; gi < groups; ++gi) {
        std::vector<Vec> tokens;
        for (int i = 0; i < len; ++i) {
          const int y = axis == Axis::kRow ? gi : i, xx = axis == Axis::kRow ? i : gi;
          tokens.emplace_back(x.data() + (y * 5 + xx) * 4, x.data() + (y * 5 + xx) * 4 + 4);
        }
        const auto res = dense_reference(tokens, f, {});
        for (int i = 0; i < len; ++i) {
          const int y = axis == Axis::kRow ? gi : i, xx = axis == Axis::kRow ? i : gi;
          for (int c = 0; c < 4; ++c) ref.at(y, xx, c) = res[i][c];
        }
      }
      CHECK(max_abs_diff(out, ref) <= 1e-6);
    }
  }

  TEST_CASE("H-MSA locality and uniform rows") {
    AttentionConfig cfg{4, 2, 0, 0};
    Fixture f(cfg, false, 8);
    std::mt19937_64 rng(8);
    TD x = random_tensor<double>({6, 5, 4}, rng);
    auto base = run([&](Var<double> v, auto* t) { return axial_msa(v, f.cfg, f.params, t); }, x);
    x.at(2, 3, 0) += 1.0;
    auto moved = run([&](Var<double> v, auto* t) { return axial_msa(v, f.cfg, f.params, t); }, x);
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 5; ++xx)
        for (int c = 0; c < 4; ++c) {
          if (y != 2) CHECK(base.at(y, xx, c) == moved.at(y, xx, c));
        }
    for (int xx = 0; xx < 5; ++xx)
      for (int c = 0; c < 4; ++c) x.at(4, xx, c) = 0.1 * c;
    AttentionTrace<double> tr;
    run([&](Var<double> v, auto* t) { return axial_msa(v, f.cfg, f.params, t); }, x, &tr);
    for (int h = 0; h < 2; ++h)
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(tr.weights.at(4, h, i, j) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("attention weight rows sum to one for every variant") {
    std::mt19937_64 rng(9);
    TD x = random_tensor<double>({7, 9, 4}, rng, -3, 3);
    AttentionConfig wcfg{4, 2, 4, 2};
    Fixture fw(wcfg, true, 9);
    AttentionConfig rcfg{4, 2, 0, 0};
    Fixture fr(rcfg, false, 9);
    AttentionConfig ccfg = rcfg;
    ccfg.axis = Axis::kColumn;
    Fixture fc(ccfg, false, 9);
    std::vector<TD> traces;
    AttentionTrace<double> tr;
    run([&](Var<double> v, auto* t) { return wmsa(v, fw.cfg, fw.params, t); }, x, &tr);
    traces.push_back(tr.weights);
    run([&](Var<double> v, auto* t) { return swmsa(v, fw.cfg, fw.params, t); }, x, &tr);
    traces.push_back(tr.weights);
    run([&](Var<double> v, auto* t) { return axial_msa(v, fr.cfg, fr.params, t); }, x, &tr);
    traces.push_back(tr.weights);
    run([&](Var<double> v, auto* t) { return axial_msa(v, fc.cfg, fc.params, t); }, x, &tr);
    traces.push_back(tr.weights);
    for (const auto& s : traces) {
      const int n = s.dim(-1);
      for (std::size_t r = 0; r < s.size() / n; ++r) {
        double tot = 0;
        for (int j = 0; j < n; ++j) tot += s[r * n + j];
        CHECK(std::abs(tot - 1) <= 1e-6);
      }
    }
  }

  TEST_CASE("pre-projection output is a convex combination of values") {
    AttentionConfig cfg{4, 2, 0, 0};
    Fixture f(cfg, false, 10);
    f.params.proj.weight->value.fill(0);
    for (int c = 0; c < 4; ++c) f.params.proj.weight->value.at(c, c) = 1;
    f.params.proj.bias->value.fill(0);
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      TD x = random_tensor<double>({1, 6, 4}, rng, -3, 3);
      Graph<double> g;
      auto out = multi_head_qkv_attention(g.constant(x), f.cfg, f.params).value();
      for (int c = 0; c < 4; ++c) {
        double lo = INFINITY, hi = -INFINITY;
        for (int i = 0; i < 6; ++i) {
          const double v = affine(Vec(x.data() + i * 4, x.data() + i * 4 + 4), *f.params.qkv.weight, f.params.qkv.bias, 8, 4)[c];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        for (int i = 0; i < 6; ++i) {
          CHECK(out.at(0, i, c) >= lo - 1e-12);
          CHECK(out.at(0, i, c) <= hi + 1e-12);
        }
      }
    }
  }

  TEST_CASE("axial groups are independent in the backward pass") {
    for (Axis axis : {Axis::kRow, Axis::kColumn}) {
      AttentionConfig cfg{4, 2, 0, 0};
      cfg.axis = axis;
      Fixture f(cfg, false, 11);
      std::mt19937_64 rng(11);
      TD x = random_tensor<double>({5, 6, 4}, rng);
      TD w = random_tensor<double>({5, 6, 4}, rng);
      auto grad_for = [&](const TD& upstream) {
        Graph<double> g;
        auto in = g.input(x);
        g.backward(sum(mul(axial_msa(in, f.cfg, f.params), g.constant(upstream))));
        return in.grad();
      };
      const TD full = grad_for(w);
      TD masked = w;
      const int keep = 2;
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 6; ++xx)
          if ((axis == Axis::kRow ? y : xx) != keep)
            for (int c = 0; c < 4; ++c) masked.at(y, xx, c) = 0;
      const TD part = grad_for(masked);
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 6; ++xx)
          for (int c = 0; c < 4; ++c) {
            if ((axis == Axis::kRow ? y : xx) == keep) {
              CHECK(part.at(y, xx, c) == doctest::Approx(full.at(y, xx, c)).epsilon(1e-12));
            } else {
              CHECK(part.at(y, xx, c) == 0.0);
            }
          }
    }
  }

  TEST_CASE("axial pass costs 2/n of dense attention") {
    for (int n : {8, 16}) {
      const int c = 4;
      AttentionConfig rcfg{c, 1, 0, 0};
      AttentionConfig ccfg = rcfg;
      ccfg.axis = Axis::kColumn;
      ParameterStore<float> store;
      Initializer init(1);
      auto p = AttentionParams<float>::create(store, "a", rcfg, init, false);
      Graph<float> g(Phase::kEval, false);
      auto x = g.constant(Tensor<float>({n, n, c}, 0.1f));
      reset_attention_macs();
      axial_msa(x, rcfg, p);
      axial_msa(x, ccfg, p);
      const double axial = static_cast<double>(attention_macs());
      reset_attention_macs();
      multi_head_qkv_attention(reshape(x, {1, n * n, c}), rcfg, p);
      const double dense = static_cast<double>(attention_macs());
      CHECK(axial / dense == doctest::Approx(2.0 / n).epsilon(0.1));
    }
  }

  TEST_CASE("attention gradients match finite differences") {
    std::mt19937_64 rng(12);
    AttentionConfig wcfg{4, 2, 4, 2};
    AttentionConfig rcfg{4, 2, 0, 0};
    AttentionConfig ccfg = rcfg;
    ccfg.axis = Axis::kColumn;
    TD up = random_tensor<double>({6, 5, 4}, rng);
    struct Case {
      AttentionConfig cfg;
      bool bias;
      int kind;
    };
    for (const Case& cs : {Case{wcfg, true, 0}, Case{wcfg, true, 1}, Case{rcfg, false, 2}, Case{ccfg, false, 2}}) {
      Fixture f(cs.cfg, cs.bias, 12);
      TD x = random_tensor<double>({6, 5, 4}, rng);
      auto apply = [&](Var<double> v) {
        if (cs.kind == 0) return wmsa(v, f.cfg, f.params);
        if (cs.kind == 1) return swmsa(v, f.cfg, f.params);
        return axial_msa(v, f.cfg, f.params);
      };
      const auto rx = finite_diff_gradcheck(
          [&](Graph<double>& g, Var<double> v) { return sum(mul(apply(v), g.constant(up))); }, x);
      INFO("input worst " << rx.worst << " " << rx.max_rel_error);
      CHECK(rx.passed(1e-5));
      const auto rp = gradcheck_parameters(
          [&](Graph<double>& g) { return sum(mul(apply(g.constant(x)), g.constant(up))); }, f.store, 0, 1);
      INFO("param worst " << rp.worst << " " << rp.max_rel_error);
      CHECK(rp.passed(1e-5));
    }
  }
}
