// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "sgtn/autograd.hpp"

namespace sgtn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary little-endian parameter dump: "SGTN", version u32, count u32, then per
/// parameter: name length u32, UTF-8 name, rank u32, extents u32 each, f32 data.
/// Every parameter is written, including non-trainable buffers.
template <typename T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store);

/// Loads into an already-built store. Names and shapes must match one to one.
template <typename T>
void load_checkpoint(const std::string& path, ParameterStore<T>& store);

}  // namespace sgtn
