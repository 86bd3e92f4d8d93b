// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <vector>

namespace sgtn {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw LoadError(path + ": truncated while reading " + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open checkpoint '" + path + "' for writing");
  os.write("SGTN", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, std::uint32_t(store.count()));
  for (const auto& p : store.all()) {
    put_u32(os, std::uint32_t(p.name.size()));
    os.write(p.name.data(), std::streamsize(p.name.size()));
    put_u32(os, std::uint32_t(p.value.rank()));
    for (int d : p.value.shape()) put_u32(os, std::uint32_t(d));
    for (T v : p.value.vec()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!os) throw LoadError("failed writing checkpoint '" + path + "'");
}

template <typename T>
void load_checkpoint(const std::string& path, ParameterStore<T>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "SGTN") throw LoadError(path + ": bad magic (expected SGTN)");
  const std::uint32_t version = get_u32(is, path, "version");
  if (version != kCheckpointVersion) throw LoadError(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t count = get_u32(is, path, "count");
  if (count != store.count()) {
    throw LoadError(path + ": holds " + std::to_string(count) + " parameters, model has " + std::to_string(store.count()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(is, path, "name length");
    if (len > 4096) throw LoadError(path + ": implausible name length in record " + std::to_string(i));
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw LoadError(path + ": truncated name in record " + std::to_string(i));
    Parameter<T>* p = store.find(name);
    if (!p) throw LoadError(path + ": unknown parameter '" + name + "'");
    const std::uint32_t rank = get_u32(is, path, name + " rank");
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(int(get_u32(is, path, name + " extent")));
    if (shape != p->value.shape()) {
      throw LoadError(path + ": parameter '" + name + "' has shape " + shape_str(shape) + ", model expects " +
                      shape_str(p->value.shape()));
    }
    for (auto& v : p->value.vec()) v = static_cast<T>(std::bit_cast<float>(get_u32(is, path, name + " data")));
  }
}

template void save_checkpoint(const std::string&, const ParameterStore<float>&);
template void save_checkpoint(const std::string&, const ParameterStore<double>&);
template void load_checkpoint(const std::string&, ParameterStore<float>&);
template void load_checkpoint(const std::string&, ParameterStore<double>&);

}  // namespace sgtn
