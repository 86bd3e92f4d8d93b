// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgtn/instance.hpp"
#include "sgtn/synth.hpp"

namespace sgtn {

/// COCO uncompressed RLE: column-major run lengths, starting with a (possibly empty) zero run.
struct Rle {
  int h = 0, w = 0;
  std::vector<std::int64_t> counts;
  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const Mask& m);
/// Throws CorruptData when the counts do not sum to h * w or a count is negative.
Mask rle_decode(const Rle& r);

/// Binary P6 with maxval 255. `name` is used in error messages.
RgbImage parse_ppm(const std::string& bytes, const std::string& name);
RgbImage read_ppm(const std::filesystem::path& path);
std::string encode_ppm(const RgbImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

struct DatasetImage {
  int id = 0;
  std::string file;  // relative to the dataset root, e.g. images/000003.ppm
  RgbImage image;
  InstanceList instances;
  std::vector<int> annotation_ids;  // parallel to instances
  friend bool operator==(const DatasetImage&, const DatasetImage&) = default;
};

struct Dataset {
  std::vector<std::pair<int, std::string>> categories;  // (id, name)
  std::vector<DatasetImage> images;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// `count` scenes from `spec`, scene i seeded with scene_seed(spec.seed, i).
Dataset generate_dataset(const SceneSpec& spec, int count);

/// Writes images/*.ppm and annotations.json under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Throws LoadError naming the offending file or record. Soft problems (a bbox more than
/// 1 px away from the mask's tight box) are appended to `warnings` when given.
Dataset read_dataset(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

/// Problems with one annotation: empty mask, bbox not within 1 px of the tight box.
std::vector<std::string> validate_instance(const Instance& inst, int annotation_id);

/// Read a whole file; throws LoadError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Write a whole file; throws LoadError on failure.
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sgtn
