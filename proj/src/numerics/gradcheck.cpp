// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sgtn {
namespace {

double evaluate(const ScalarFn& f, const Tensor<double>& x) {
  Graph<double> g(Phase::kTrain, false);
  const Var<double> out = f(g, g.constant(x));
  if (out.size() != 1) throw InvalidShape("gradcheck: function output is not scalar");
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericalError("gradcheck: function value is not finite");
  return v;
}

double evaluate(const ModelFn& f) {
  Graph<double> g(Phase::kTrain, false);
  const Var<double> out = f(g);
  if (out.size() != 1) throw InvalidShape("gradcheck: function output is not scalar");
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericalError("gradcheck: function value is not finite");
  return v;
}

void record(GradcheckReport& r, double ad, double fd, std::string label) {
  const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
  r.rel_errors.push_back(err);
  if (err >= r.max_rel_error) {
    r.max_rel_error = err;
    r.worst = label;
  }
  r.labels.push_back(std::move(label));
}

}  // namespace

GradcheckReport finite_diff_gradcheck(const ScalarFn& f, const Tensor<double>& x, double h) {
  Tensor<double> analytic(x.shape());
  {
    Graph<double> g;
    const Var<double> in = g.input(x);
    const Var<double> out = f(g, in);
    if (out.size() != 1) throw InvalidShape("gradcheck: function output is not scalar");
    if (!std::isfinite(out.item())) throw NumericalError("gradcheck: function value is not finite");
    g.backward(out);
    if (!in.grad().empty()) analytic = in.grad();
  }
  GradcheckReport report;
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = evaluate(f, probe);
    probe[i] = x[i] - h;
    const double down = evaluate(f, probe);
    probe[i] = x[i];
    record(report, analytic[i], (up - down) / (2 * h), "x[" + std::to_string(i) + "]");
  }
  return report;
}

GradcheckReport gradcheck_parameters(const ModelFn& f, ParameterStore<double>& store, std::size_t max_per_parameter,
                                     std::uint64_t seed, double h) {
  store.zero_grad();
  {
    Graph<double> g;
    const Var<double> out = f(g);
    if (out.size() != 1) throw InvalidShape("gradcheck: function output is not scalar");
    if (!std::isfinite(out.item())) throw NumericalError("gradcheck: function value is not finite");
    g.backward(out);
  }
  std::mt19937_64 rng(seed);
  GradcheckReport report;
  for (auto& p : store.all()) {
    if (!p.trainable) continue;
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_parameter > 0 && idx.size() > max_per_parameter) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_parameter);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double ad = p.grad.empty() ? 0.0 : p.grad[i];
      const double orig = p.value[i];
      p.value[i] = orig + h;
      const double up = evaluate(f);
      p.value[i] = orig - h;
      const double down = evaluate(f);
      p.value[i] = orig;
      record(report, ad, (up - down) / (2 * h), p.name + "[" + std::to_string(i) + "]");
    }
  }
  return report;
}

}  // namespace sgtn
