// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sgtn {

std::array<double, 10> iou_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[std::size_t(i)] = 0.50 + 0.05 * i;
  return t;
}

namespace {

// One (image, category) cell with its IoU matrix precomputed.
struct Cell {
  std::vector<double> det_score, det_area, gt_area;
  std::vector<std::vector<double>> iou;  // [det][gt]
};

using CategoryCells = std::vector<Cell>;  // image order

CategoryCells build_cells(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts,
                          int category) {
  std::set<int> images;
  for (const auto& d : dets)
    if (d.category == category) images.insert(d.image_id);
  for (const auto& g : gts)
    if (g.category == category) images.insert(g.image_id);
  CategoryCells cells;
  for (int img : images) {
    std::vector<const EvalDetection*> ds;
    std::vector<const EvalGroundTruth*> gs;
    for (const auto& d : dets)
      if (d.category == category && d.image_id == img) ds.push_back(&d);
    for (const auto& g : gts)
      if (g.category == category && g.image_id == img) gs.push_back(&g);
    std::stable_sort(ds.begin(), ds.end(), [](auto* a, auto* b) { return a->score > b->score; });
    if (ds.size() > std::size_t(kMaxDetsPerImage)) ds.resize(std::size_t(kMaxDetsPerImage));
    Cell c;
    for (auto* g : gs) c.gt_area.push_back(double(g->mask.area()));
    for (auto* d : ds) {
      c.det_score.push_back(d->score);
      c.det_area.push_back(double(d->mask.area()));
      std::vector<double> row;
      for (auto* g : gs) row.push_back(mask_iou(d->mask, g->mask));
      c.iou.push_back(std::move(row));
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

bool outside(double area, AreaRange r) { return area < r.lo || area >= r.hi; }

double evaluate(const CategoryCells& cells, double t, AreaRange range) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> all;
  long long npig = 0;
  for (const Cell& c : cells) {
    const std::size_t ng = c.gt_area.size();
    std::vector<char> ignore(ng);
    std::vector<std::size_t> order(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      ignore[g] = outside(c.gt_area[g], range);
      npig += !ignore[g];
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ignore[a] < ignore[b]; });
    std::vector<char> matched(ng, 0);
    for (std::size_t d = 0; d < c.det_score.size(); ++d) {
      double best_iou = std::min(t, 1 - 1e-10);
      long best = -1;
      for (std::size_t g : order) {
        if (matched[g]) continue;
        if (best >= 0 && !ignore[std::size_t(best)] && ignore[g]) break;
        if (c.iou[d][g] < best_iou) continue;
        best_iou = c.iou[d][g];
        best = long(g);
      }
      bool det_ignored;
      if (best >= 0) {
        matched[std::size_t(best)] = 1;
        det_ignored = ignore[std::size_t(best)];
      } else {
        det_ignored = outside(c.det_area[d], range);
      }
      if (!det_ignored) all.push_back({c.det_score[d], best >= 0});
    }
  }
  if (npig == 0) return kMissing;
  std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  const std::size_t n = all.size();
  std::vector<double> rc(n), pr(n);
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (all[i].tp ? tp : fp) += 1;
    rc[i] = tp / double(npig);
    pr[i] = tp / (tp + fp);
  }
  for (std::size_t i = n; i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(rc.begin(), rc.end(), r);
    if (it != rc.end()) sum += pr[std::size_t(it - rc.begin())];
  }
  return sum / 101.0;
}

double mean_present(const std::vector<double>& v) {
  double s = 0;
  int n = 0;
  for (double x : v)
    if (x != kMissing) s += x, ++n;
  return n ? s / n : kMissing;
}

std::set<int> categories_of(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts) {
  std::set<int> cats;
  for (const auto& d : dets) cats.insert(d.category);
  for (const auto& g : gts) cats.insert(g.category);
  return cats;
}

}  // namespace

double category_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts, int category,
                   double t, AreaRange range) {
  return evaluate(build_cells(dets, gts, category), t, range);
}

double ap_at_threshold(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts, double t,
                       AreaRange range) {
  std::vector<double> per;
  for (int c : categories_of(dets, gts)) per.push_back(category_ap(dets, gts, c, t, range));
  return mean_present(per);
}

EvalReport coco_ap_suite(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts) {
  const auto thr = iou_thresholds();
  const AreaRange ranges[4] = {kAreaAll, kAreaSmall, kAreaMedium, kAreaLarge};
  EvalReport rep;
  // table[range][threshold] -> per-class values
  std::vector<std::vector<std::vector<double>>> table(4, std::vector<std::vector<double>>(10));
  for (int c : categories_of(dets, gts)) {
    const CategoryCells cells = build_cells(dets, gts, c);
    ApFields f;
    std::array<std::array<double, 10>, 4> v{};
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 10; ++i) {
        v[std::size_t(a)][std::size_t(i)] = evaluate(cells, thr[std::size_t(i)], ranges[a]);
        table[std::size_t(a)][std::size_t(i)].push_back(v[std::size_t(a)][std::size_t(i)]);
      }
    if (v[0][0] == kMissing) continue;  // no ground truth for this class
    f.ap = mean_present({v[0].begin(), v[0].end()});
    f.ap50 = v[0][0];
    f.ap75 = v[0][5];
    f.ap_s = mean_present({v[1].begin(), v[1].end()});
    f.ap_m = mean_present({v[2].begin(), v[2].end()});
    f.ap_l = mean_present({v[3].begin(), v[3].end()});
    rep.per_class[c] = f;
  }
  for (int i = 0; i < 10; ++i) rep.ap_by_threshold[std::size_t(i)] = mean_present(table[0][std::size_t(i)]);
  if (rep.ap_by_threshold[0] != kMissing) {
    rep.ap = std::accumulate(rep.ap_by_threshold.begin(), rep.ap_by_threshold.end(), 0.0) / 10.0;
    rep.ap50 = rep.ap_by_threshold[0];
    rep.ap75 = rep.ap_by_threshold[5];
  }
  double* buckets[3] = {&rep.ap_s, &rep.ap_m, &rep.ap_l};
  for (int a = 1; a < 4; ++a) {
    std::vector<double> flat;
    const auto& rows = table[std::size_t(a)];
    for (std::size_t k = 0; k < rows[0].size(); ++k)
      for (const auto& col : rows) flat.push_back(col[k]);
    *buckets[a - 1] = mean_present(flat);
  }
  return rep;
}

namespace {

nlohmann::ordered_json fields_json(const ApFields& f) {
  nlohmann::ordered_json j;
  j["AP"] = f.ap;
  j["AP50"] = f.ap50;
  j["AP75"] = f.ap75;
  j["AP_S"] = f.ap_s;
  j["AP_M"] = f.ap_m;
  j["AP_L"] = f.ap_l;
  return j;
}

std::string class_label(int c, const std::map<int, std::string>& names) {
  auto it = names.find(c);
  return it == names.end() ? std::to_string(c) : it->second;
}

}  // namespace

std::string report_json(const EvalReport& r, const std::map<int, std::string>& names) {
  nlohmann::ordered_json j = fields_json(r);
  nlohmann::ordered_json by_t;
  const auto thr = iou_thresholds();
  for (int i = 0; i < 10; ++i) {
    char key[8];
    std::snprintf(key, sizeof key, "%.2f", thr[std::size_t(i)]);
    by_t[key] = r.ap_by_threshold[std::size_t(i)];
  }
  j["AP_by_threshold"] = by_t;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [c, f] : r.per_class) pc[class_label(c, names)] = fields_json(f);
  j["per_class"] = pc;
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r, const std::map<int, std::string>& names) {
  std::vector<std::pair<std::string, ApFields>> rows = {{"all", r}};
  for (const auto& [c, f] : r.per_class) rows.emplace_back(class_label(c, names), f);
  std::size_t width = 5;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::ostringstream os;
  auto cell = [&](double v) {
    char buf[16];
    if (v == kMissing) std::snprintf(buf, sizeof buf, "%8s", "-");
    else std::snprintf(buf, sizeof buf, "%8.4f", v);
    os << buf;
  };
  os << std::string(width - 5, ' ') << "class";
  for (const char* h : {"AP", "AP50", "AP75", "AP_S", "AP_M", "AP_L"}) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%8s", h);
    os << buf;
  }
  os << '\n';
  for (const auto& [label, f] : rows) {
    os << std::string(width - label.size(), ' ') << label;
    for (double v : {f.ap, f.ap50, f.ap75, f.ap_s, f.ap_m, f.ap_l}) cell(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace sgtn
