// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "sgtn/ops.hpp"

namespace sgtn {

template <typename T>
LossValue<T> sum_terms(const std::vector<std::pair<std::string, Var<T>>>& terms) {
  if (terms.empty()) throw InvalidArgument("sum_terms: no terms");
  LossValue<T> out;
  for (const auto& [name, v] : terms) {
    if (v.size() != 1) throw InvalidShape("loss term '" + name + "' is not a scalar");
    out.total = out.total.valid() ? add(out.total, v) : v;
    out.terms[name] += static_cast<double>(v.item());
  }
  for (const auto& [name, value] : out.terms) out.scalar += value;
  return out;
}

template <typename T>
LossValue<T> merge_losses(const std::vector<LossValue<T>>& parts) {
  if (parts.empty()) throw InvalidArgument("merge_losses: no parts");
  LossValue<T> out;
  for (const auto& p : parts) {
    out.total = out.total.valid() ? add(out.total, p.total) : p.total;
    for (const auto& [name, value] : p.terms) out.terms[name] += value;
  }
  for (const auto& [name, value] : out.terms) out.scalar += value;
  return out;
}

template <typename T>
LossValue<T> weighted_bce(Var<T> pred, const Tensor<T>& target, const Tensor<T>& weight, Reduction reduction,
                          const std::string& term) {
  if (pred.shape() != target.shape() || pred.shape() != weight.shape()) {
    throw InvalidShape("weighted_bce: shapes differ " + shape_str(pred.shape()) + ", " + shape_str(target.shape()) +
                       ", " + shape_str(weight.shape()));
  }
  T wsum = 0;
  for (T w : weight.vec()) {
    if (w < T{0}) throw InvalidArgument("weighted_bce: negative weight");
    wsum += w;
  }
  const T norm = reduction == Reduction::kWeightedMean ? (wsum > T{0} ? T{1} / wsum : T{0}) : T{1};
  const T lo = static_cast<T>(kProbClamp), hi = T{1} - static_cast<T>(kProbClamp);
  const auto& pv = pred.value();
  T total = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const T p = std::clamp(pv[i], lo, hi);
    const T t = target[i];
    total -= weight[i] * (t * std::log(p) + (T{1} - t) * std::log(T{1} - p));
  }
  total *= norm;
  Var<T> v = pred.graph().record("weighted_bce", Tensor<T>({1}, total), {pred},
                                 [pred, target, weight, norm, lo, hi](Graph<T>& g, const Tensor<T>& go) {
                                   if (!g.requires_grad(pred)) return;
                                   auto& gp = g.grad_slot(pred);
                                   const auto& pv = pred.value();
                                   for (std::size_t i = 0; i < pv.size(); ++i) {
                                     const T p = pv[i];
                                     if (p < lo || p > hi) continue;
                                     const T t = target[i];
                                     gp[i] += go[0] * norm * -weight[i] * (t / p - (T{1} - t) / (T{1} - p));
                                   }
                                 });
  return sum_terms<T>({{term, v}});
}

template <typename T>
LossValue<T> dice_loss(Var<T> pred, const Tensor<T>& target, T eps, const std::string& term) {
  if (pred.shape() != target.shape()) {
    throw InvalidShape("dice_loss: shapes differ " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  const auto& pv = pred.value();
  T spt = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    spt += pv[i] * target[i];
    sp += pv[i];
    st += target[i];
  }
  const T num = T{2} * spt + eps;
  const T den = sp + st + eps;
  Var<T> v = pred.graph().record("dice_loss", Tensor<T>({1}, T{1} - num / den), {pred},
                                 [pred, target, num, den](Graph<T>& g, const Tensor<T>& go) {
                                   if (!g.requires_grad(pred)) return;
                                   auto& gp = g.grad_slot(pred);
                                   const T inv2 = T{1} / (den * den);
                                   for (std::size_t i = 0; i < gp.size(); ++i) {
                                     gp[i] -= go[0] * (T{2} * target[i] * den - num) * inv2;
                                   }
                                 });
  return sum_terms<T>({{term, v}});
}

template <typename T>
Var<T> focal_loss(Var<T> pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) throw InvalidShape("focal_loss: shapes differ");
  const T lo = static_cast<T>(kProbClamp), hi = T{1} - static_cast<T>(kProbClamp);
  const auto& pv = pred.value();
  int num_pos = 0;
  for (T t : target.vec()) num_pos += t == T{1};
  const T norm = T{1} / static_cast<T>(std::max(1, num_pos));
  T total = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const T p = std::clamp(pv[i], lo, hi);
    const T t = target[i];
    if (t == T{1}) {
      total -= (T{1} - p) * (T{1} - p) * std::log(p);
    } else {
      const T neg = std::pow(T{1} - t, T{4});
      total -= neg * p * p * std::log(T{1} - p);
    }
  }
  return pred.graph().record("focal_loss", Tensor<T>({1}, total * norm), {pred},
                             [pred, target, norm, lo, hi](Graph<T>& g, const Tensor<T>& go) {
                               if (!g.requires_grad(pred)) return;
                               auto& gp = g.grad_slot(pred);
                               const auto& pv = pred.value();
                               for (std::size_t i = 0; i < pv.size(); ++i) {
                                 const T p = pv[i];
                                 if (p < lo || p > hi) continue;
                                 const T t = target[i];
                                 T d;
                                 if (t == T{1}) {
                                   d = T{2} * (T{1} - p) * std::log(p) - (T{1} - p) * (T{1} - p) / p;
                                 } else {
                                   const T neg = std::pow(T{1} - t, T{4});
                                   d = -neg * (T{2} * p * std::log(T{1} - p) - p * p / (T{1} - p));
                                 }
                                 gp[i] += go[0] * norm * d;
                               }
                             });
}

template <typename T>
Var<T> smooth_l1(Var<T> x, const Tensor<T>& target, T beta) {
  if (x.shape() != target.shape()) throw InvalidShape("smooth_l1: shapes differ");
  const auto& xv = x.value();
  T total = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T d = std::abs(xv[i] - target[i]);
    total += d < beta ? T(0.5) * d * d / beta : d - T(0.5) * beta;
  }
  return x.graph().record("smooth_l1", Tensor<T>({1}, total), {x}, [x, target, beta](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T d = xv[i] - target[i];
      gx[i] += go[0] * (std::abs(d) < beta ? d / beta : (d > 0 ? T{1} : T{-1}));
    }
  });
}

template <typename T>
Var<T> l1_loss(Var<T> x, const Tensor<T>& target) {
  if (x.shape() != target.shape()) throw InvalidShape("l1_loss: shapes differ");
  const auto& xv = x.value();
  T total = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += std::abs(xv[i] - target[i]);
  return x.graph().record("l1_loss", Tensor<T>({1}, total), {x}, [x, target](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T d = xv[i] - target[i];
      gx[i] += go[0] * (d > 0 ? T{1} : (d < 0 ? T{-1} : T{0}));
    }
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, const std::vector<int>& labels) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || lv.dim(0) != static_cast<int>(labels.size())) {
    throw InvalidShape("softmax_cross_entropy: logits " + shape_str(lv.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  }
  const int rows = lv.dim(0), classes = lv.dim(1);
  auto probs = std::make_shared<Tensor<T>>(lv);
  T total = 0;
  for (int r = 0; r < rows; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) throw InvalidArgument("softmax_cross_entropy: label out of range");
    T* row = probs->data() + static_cast<std::size_t>(r) * classes;
    const T mx = *std::max_element(row, row + classes);
    T s = 0;
    for (int j = 0; j < classes; ++j) s += std::exp(row[j] - mx);
    const T lse = mx + std::log(s);
    total += lse - row[label];
    for (int j = 0; j < classes; ++j) row[j] = std::exp(row[j] - lse);
  }
  return logits.graph().record("softmax_cross_entropy", Tensor<T>({1}, total), {logits},
                               [logits, labels, probs, classes](Graph<T>& g, const Tensor<T>& go) {
                                 if (!g.requires_grad(logits)) return;
                                 auto& gl = g.grad_slot(logits);
                                 for (std::size_t r = 0; r < labels.size(); ++r) {
                                   for (int j = 0; j < classes; ++j) {
                                     const std::size_t o = r * classes + j;
                                     gl[o] += go[0] * ((*probs)[o] - (j == labels[r] ? T{1} : T{0}));
                                   }
                                 }
                               });
}

namespace {

// Forward-mode dual number carrying derivatives w.r.t. four deltas.
struct Dual {
  double v = 0;
  std::array<double, 4> d{};

  static Dual constant(double x) { return {x, {}}; }
  static Dual seed(double x, int i) {
    Dual r{x, {}};
    r.d[static_cast<std::size_t>(i)] = 1.0;
    return r;
  }
};

Dual operator+(Dual a, const Dual& b) {
  a.v += b.v;
  for (int i = 0; i < 4; ++i) a.d[i] += b.d[i];
  return a;
}
Dual operator-(Dual a, const Dual& b) {
  a.v -= b.v;
  for (int i = 0; i < 4; ++i) a.d[i] -= b.d[i];
  return a;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r{a.v * b.v, {}};
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r{a.v / b.v, {}};
  for (int i = 0; i < 4; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) / (b.v * b.v);
  return r;
}
Dual operator*(double s, Dual a) {
  a.v *= s;
  for (auto& x : a.d) x *= s;
  return a;
}
Dual dexp(const Dual& a) {
  const double e = std::exp(a.v);
  Dual r{e, {}};
  for (int i = 0; i < 4; ++i) r.d[i] = e * a.d[i];
  return r;
}
Dual datan(const Dual& a) {
  const double s = 1.0 / (1.0 + a.v * a.v);
  Dual r{std::atan(a.v), {}};
  for (int i = 0; i < 4; ++i) r.d[i] = s * a.d[i];
  return r;
}
const Dual& dmin(const Dual& a, const Dual& b) { return a.v <= b.v ? a : b; }
const Dual& dmax(const Dual& a, const Dual& b) { return a.v >= b.v ? a : b; }
Dual relu0(const Dual& a) { return a.v > 0 ? a : Dual::constant(0.0); }

// CIoU of a box given as (x1, y1, x2, y2) duals against a constant gt box.
Dual ciou(const Dual& x1, const Dual& y1, const Dual& x2, const Dual& y2, const Box& gt) {
  const Dual gx1 = Dual::constant(gt.x), gy1 = Dual::constant(gt.y);
  const Dual gx2 = Dual::constant(gt.x2()), gy2 = Dual::constant(gt.y2());
  const Dual w = x2 - x1, h = y2 - y1;
  const Dual iw = relu0(dmin(x2, gx2) - dmax(x1, gx1));
  const Dual ih = relu0(dmin(y2, gy2) - dmax(y1, gy1));
  const Dual inter = iw * ih;
  const Dual uni = w * h + Dual::constant(gt.area()) - inter;
  const Dual iou = inter / uni;
  const Dual dcx = 0.5 * (x1 + x2) - Dual::constant(gt.cx());
  const Dual dcy = 0.5 * (y1 + y2) - Dual::constant(gt.cy());
  const Dual rho2 = dcx * dcx + dcy * dcy;
  const Dual ew = dmax(x2, gx2) - dmin(x1, gx1);
  const Dual eh = dmax(y2, gy2) - dmin(y1, gy1);
  const Dual diag2 = ew * ew + eh * eh;
  const double k = 4.0 / (std::numbers::pi * std::numbers::pi);
  const Dual da = Dual::constant(std::atan(gt.w / gt.h)) - datan(w / h);
  const Dual v = k * (da * da);
  const Dual one = Dual::constant(1.0);
  const Dual denom = (one - iou) + v;
  const Dual alpha = denom.v > 0 ? v / denom : Dual::constant(0.0);
  return one - iou + rho2 / diag2 + alpha * v;
}

Dual ciou_from_deltas(const std::array<double, 4>& deltas, const Box& proposal, const Box& gt) {
  std::array<Dual, 4> d;
  for (int i = 0; i < 4; ++i) d[static_cast<std::size_t>(i)] = Dual::seed(deltas[static_cast<std::size_t>(i)], i);
  const Dual cx = Dual::constant(proposal.cx()) + proposal.w * d[0];
  const Dual cy = Dual::constant(proposal.cy()) + proposal.h * d[1];
  const Dual w = proposal.w * dexp(d[2]);
  const Dual h = proposal.h * dexp(d[3]);
  return ciou(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, gt);
}

void require_valid_gt(const Box& gt) {
  if (!(gt.w > 0 && gt.h > 0)) throw InvalidArgument("box loss: ground-truth box has zero area");
}

}  // namespace

double ciou_loss_value(const Box& pred, const Box& gt) {
  require_valid_gt(gt);
  return ciou(Dual::constant(pred.x), Dual::constant(pred.y), Dual::constant(pred.x2()), Dual::constant(pred.y2()), gt).v;
}

template <typename T>
Var<T> ciou_loss(Var<T> deltas, const std::vector<Box>& proposals, const std::vector<Box>& gts) {
  const auto& dv = deltas.value();
  const std::size_t rows = proposals.size();
  if (dv.shape() != Shape{static_cast<int>(rows), 4} || gts.size() != rows) {
    throw InvalidShape("ciou_loss: deltas " + shape_str(dv.shape()) + " vs " + std::to_string(rows) + " boxes");
  }
  auto grads = std::make_shared<std::vector<double>>(rows * 4);
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    require_valid_gt(gts[r]);
    const std::array<double, 4> d{dv[r * 4], dv[r * 4 + 1], dv[r * 4 + 2], dv[r * 4 + 3]};
    const Dual l = ciou_from_deltas(d, proposals[r], gts[r]);
    total += l.v;
    for (int i = 0; i < 4; ++i) (*grads)[r * 4 + i] = l.d[static_cast<std::size_t>(i)];
  }
  return deltas.graph().record("ciou_loss", Tensor<T>({1}, static_cast<T>(total)), {deltas},
                               [deltas, grads](Graph<T>& g, const Tensor<T>& go) {
                                 if (!g.requires_grad(deltas)) return;
                                 auto& gd = g.grad_slot(deltas);
                                 for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += go[0] * static_cast<T>((*grads)[i]);
                               });
}

template <typename T>
LossValue<T> box_losses(Var<T> deltas, const std::vector<Box>& proposals, const std::vector<Box>& gts) {
  const std::size_t rows = proposals.size();
  if (rows == 0) throw InvalidArgument("box_losses: no boxes");
  Tensor<T> target({static_cast<int>(rows), 4});
  for (std::size_t r = 0; r < rows; ++r) {
    require_valid_gt(gts[r]);
    const auto t = encode_deltas(proposals[r], gts[r]);
    for (int i = 0; i < 4; ++i) target[r * 4 + i] = static_cast<T>(t[static_cast<std::size_t>(i)]);
  }
  const T inv = T{1} / static_cast<T>(rows);
  return sum_terms<T>({{"smooth_l1", scale(smooth_l1(deltas, target, T{1}), inv)},
                       {"ciou", scale(ciou_loss(deltas, proposals, gts), inv)}});
}

#define SGTN_INSTANTIATE(T)                                                                                  \
  template LossValue<T> sum_terms(const std::vector<std::pair<std::string, Var<T>>>&);                       \
  template LossValue<T> merge_losses(const std::vector<LossValue<T>>&);                                      \
  template LossValue<T> weighted_bce(Var<T>, const Tensor<T>&, const Tensor<T>&, Reduction, const std::string&); \
  template LossValue<T> dice_loss(Var<T>, const Tensor<T>&, T, const std::string&);                          \
  template Var<T> focal_loss(Var<T>, const Tensor<T>&);                                                      \
  template Var<T> smooth_l1(Var<T>, const Tensor<T>&, T);                                                    \
  template Var<T> l1_loss(Var<T>, const Tensor<T>&);                                                         \
  template Var<T> softmax_cross_entropy(Var<T>, const std::vector<int>&);                                    \
  template Var<T> ciou_loss(Var<T>, const std::vector<Box>&, const std::vector<Box>&);                       \
  template LossValue<T> box_losses(Var<T>, const std::vector<Box>&, const std::vector<Box>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
