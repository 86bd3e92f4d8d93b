// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/mask.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sgtn {

long long Mask::area() const {
  long long n = 0;
  for (auto v : data) n += v != 0;
  return n;
}

Box tight_box(const Mask& m) {
  int x0 = m.w, y0 = m.h, x1 = -1, y1 = -1;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

static void require_same(const Mask& a, const Mask& b, const char* what) {
  if (a.h != b.h || a.w != b.w) throw InvalidShape(std::string(what) + ": mask extents differ");
}

double mask_iou(const Mask& a, const Mask& b) {
  require_same(a, b, "mask_iou");
  long long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += a.data[i] && b.data[i];
    uni += a.data[i] || b.data[i];
  }
  return uni ? double(inter) / double(uni) : 0.0;
}

Mask mask_union(const Mask& a, const Mask& b) {
  require_same(a, b, "mask_union");
  Mask out(a.h, a.w);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] || b.data[i];
  return out;
}

Mask downsample_max(const Mask& m, int stride) {
  if (stride < 1) throw InvalidArgument("downsample_max: stride must be >= 1");
  Mask out((m.h + stride - 1) / stride, (m.w + stride - 1) / stride);
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (m.at(y, x)) out.at(y / stride, x / stride) = 1;
    }
  }
  return out;
}

Mask erode3x3(const Mask& m) {
  Mask out(m.h, m.w);
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy)
        for (int dx = -1; dx <= 1 && all; ++dx) all = m.get(y + dy, x + dx) != 0;
      out.at(y, x) = all;
    }
  }
  return out;
}

Mask dilate3x3(const Mask& m) {
  Mask out(m.h, m.w);
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      bool any = false;
      for (int dy = -1; dy <= 1 && !any; ++dy)
        for (int dx = -1; dx <= 1 && !any; ++dx) any = m.get(y + dy, x + dx) != 0;
      out.at(y, x) = any;
    }
  }
  return out;
}

Mask inner_boundary(const Mask& m) {
  const Mask e = erode3x3(m);
  Mask out(m.h, m.w);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] && !e.data[i];
  return out;
}

namespace {

// Clockwise with y pointing down, starting west.
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

int direction_of(Point from, Point to) {
  for (int d = 0; d < 8; ++d) {
    if (from.y + kDy[d] == to.y && from.x + kDx[d] == to.x) return d;
  }
  return -1;
}

std::vector<Point> trace(const Mask& comp, Point start) {
  std::vector<Point> out{start};
  Point c = start;
  int back = 0;  // west of the raster-first pixel is background
  for (std::size_t guard = 0; guard < 4 * comp.data.size() + 8; ++guard) {
    Point next{-1, -1};
    int prev_dir = back;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (comp.get(c.y + kDy[d], c.x + kDx[d])) {
        next = {c.y + kDy[d], c.x + kDx[d]};
        break;
      }
      prev_dir = d;
    }
    if (next.y < 0) return out;  // isolated pixel
    const Point b{c.y + kDy[prev_dir], c.x + kDx[prev_dir]};
    if (c == start && out.size() > 1 && next == out[1]) {
      out.pop_back();
      return out;
    }
    back = direction_of(next, b);
    c = next;
    out.push_back(c);
  }
  return out;
}

double seg_dist(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len = std::hypot(vx, vy);
  if (len == 0) return std::hypot(p.x - a.x, p.y - a.y);
  return std::abs(vx * (a.y - p.y) - vy * (a.x - p.x)) / len;
}

}  // namespace

std::vector<std::vector<Point>> outer_contours(const Mask& m) {
  std::vector<int> label(m.data.size(), -1);
  std::vector<std::vector<Point>> out;
  int next_label = 0;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      const std::size_t i = std::size_t(y) * m.w + x;
      if (!m.data[i] || label[i] >= 0) continue;
      Mask comp(m.h, m.w);
      std::vector<Point> stack{{y, x}};
      label[i] = next_label;
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        comp.at(p.y, p.x) = 1;
        for (int d = 0; d < 8; ++d) {
          const int ny = p.y + kDy[d], nx = p.x + kDx[d];
          if (!m.get(ny, nx)) continue;
          const std::size_t j = std::size_t(ny) * m.w + nx;
          if (label[j] >= 0) continue;
          label[j] = next_label;
          stack.push_back({ny, nx});
        }
      }
      out.push_back(trace(comp, {y, x}));
      ++next_label;
    }
  }
  return out;
}

std::vector<Point> simplify_closed(const std::vector<Point>& contour, double tolerance) {
  const std::size_t n = contour.size();
  if (n <= 2) return contour;
  std::size_t far = 0;
  double best = -1;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = std::hypot(contour[i].x - contour[0].x, contour[i].y - contour[0].y);
    if (d > best) best = d, far = i;
  }
  if (best == 0) return {contour[0]};

  std::vector<char> keep(n, 0);
  keep[0] = keep[far] = 1;
  // open polyline from index lo to hi (hi may wrap past n)
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t lo, std::size_t hi) {
    if (hi <= lo + 1) return;
    const Point a = contour[lo % n], b = contour[hi % n];
    double dmax = -1;
    std::size_t imax = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = seg_dist(contour[i % n], a, b);
      if (d > dmax) dmax = d, imax = i;
    }
    if (dmax > tolerance) {
      keep[imax % n] = 1;
      rec(lo, imax);
      rec(imax, hi);
    }
  };
  rec(0, far);
  rec(far, n);

  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(contour[i]);
  }
  return out;
}

double sample_bilinear(const std::vector<float>& src, int h, int w, double fy, double fx) {
  fy = std::clamp(fy, 0.0, double(h - 1));
  fx = std::clamp(fx, 0.0, double(w - 1));
  const int y0 = int(fy), y1 = std::min(y0 + 1, h - 1);
  const int x0 = int(fx), x1 = std::min(x0 + 1, w - 1);
  const double ty = fy - y0, tx = fx - x0;
  const double top = src[std::size_t(y0) * w + x0] * (1 - tx) + src[std::size_t(y0) * w + x1] * tx;
  const double bot = src[std::size_t(y1) * w + x0] * (1 - tx) + src[std::size_t(y1) * w + x1] * tx;
  return top * (1 - ty) + bot * ty;
}

std::vector<float> resize_bilinear(const std::vector<float>& src, int sh, int sw, int dh, int dw) {
  if (sh <= 0 || sw <= 0 || dh < 0 || dw < 0 || src.size() != std::size_t(sh) * sw) {
    throw InvalidShape("resize_bilinear: bad extents");
  }
  std::vector<float> out(std::size_t(dh) * dw);
  const double sy = double(sh) / std::max(dh, 1), sx = double(sw) / std::max(dw, 1);
  for (int y = 0; y < dh; ++y)
    for (int x = 0; x < dw; ++x)
      out[std::size_t(y) * dw + x] = float(sample_bilinear(src, sh, sw, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5));
  return out;
}

}  // namespace sgtn
