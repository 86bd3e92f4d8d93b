// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <fstream>
#include <sstream>

#include "sgtn/dataset.hpp"

namespace sgtn {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw LoadError("short write to " + path.string());
}

RgbImage parse_ppm(const std::string& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> LoadError { return LoadError(name + ": malformed P6 header: " + why); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip_space();
    long long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])) && pos - start < 9)
      v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw fail(std::string("missing ") + what);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw fail("magic is not P6");
  pos = 2;
  const long long w = number("width"), h = number("height"), maxval = number("maxval");
  if (w <= 0 || h <= 0) throw fail("non-positive extent");
  if (maxval != 255) throw fail("maxval " + std::to_string(maxval) + " (only 255 is supported)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw fail("no whitespace after maxval");
  ++pos;
  const std::size_t need = std::size_t(w) * std::size_t(h) * 3;
  if (bytes.size() - pos < need)
    throw LoadError(name + ": pixel data truncated (" + std::to_string(bytes.size() - pos) + " of " +
                    std::to_string(need) + " bytes)");
  RgbImage img(static_cast<int>(h), static_cast<int>(w));
  std::copy(bytes.begin() + std::ptrdiff_t(pos), bytes.begin() + std::ptrdiff_t(pos + need), img.data.begin());
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) { return parse_ppm(read_file(path), path.string()); }

std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  out.append(img.data.begin(), img.data.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) { write_file(path, encode_ppm(img)); }

}  // namespace sgtn
