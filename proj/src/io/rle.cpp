// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/dataset.hpp"

namespace sgtn {

Rle rle_encode(const Mask& m) {
  Rle r{m.h, m.w, {}};
  std::uint8_t cur = 0;
  std::int64_t run = 0;
  for (int x = 0; x < m.w; ++x)
    for (int y = 0; y < m.h; ++y) {
      const std::uint8_t v = m.at(y, x) ? 1 : 0;
      if (v != cur) {
        r.counts.push_back(run);
        run = 0;
        cur = v;
      }
      ++run;
    }
  r.counts.push_back(run);
  return r;
}

Mask rle_decode(const Rle& r) {
  if (r.h < 0 || r.w < 0) throw CorruptData("rle: negative size");
  const std::int64_t total = std::int64_t(r.h) * r.w;
  std::int64_t sum = 0;
  for (std::int64_t c : r.counts) {
    if (c < 0) throw CorruptData("rle: negative count");
    sum += c;
    if (sum > total) break;
  }
  if (sum != total)
    throw CorruptData("rle: counts sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
  Mask m(r.h, r.w);
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    const bool one = i % 2 == 1;
    for (std::int64_t k = 0; k < r.counts[i]; ++k, ++pos)
      if (one) m.at(int(pos % r.h), int(pos / r.h)) = 1;
  }
  return m;
}

}  // namespace sgtn
