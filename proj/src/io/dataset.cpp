// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "json.hpp"
#include "sgtn/dataset.hpp"
#include "sgtn/kernels.hpp"

namespace sgtn {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

Dataset generate_dataset(const SceneSpec& spec, int count) {
  if (count < 0) throw InvalidArgument("generate_dataset: negative count");
  spec.validate();
  std::vector<Scene> scenes(static_cast<std::size_t>(count));
  // scenes are independent; every worker writes only its own slots
  const int workers = std::max(1, std::min(kernels::max_threads(), count));
  auto work = [&](int first) {
    for (int i = first; i < count; i += workers) {
      SceneSpec s = spec;
      s.seed = scene_seed(spec.seed, std::uint64_t(i));
      scenes[std::size_t(i)] = generate_scene(s);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& t : pool) t.join();

  Dataset ds;
  for (int c = 0; c < kNumShapeClasses; ++c) ds.categories.emplace_back(c, shape_class_name(ShapeClass(c)));
  int next_ann = 1;
  for (int i = 0; i < count; ++i) {
    DatasetImage im;
    im.id = i;
    char file[32];
    std::snprintf(file, sizeof file, "images/%06d.ppm", i);
    im.file = file;
    im.image = std::move(scenes[std::size_t(i)].image);
    im.instances = std::move(scenes[std::size_t(i)].instances);
    for (std::size_t k = 0; k < im.instances.size(); ++k) im.annotation_ids.push_back(next_ann++);
    ds.images.push_back(std::move(im));
  }
  return ds;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw LoadError("cannot create " + (dir / "images").string() + ": " + ec.message());
  ordered_json images = ordered_json::array(), cats = ordered_json::array(), anns = ordered_json::array();
  for (const auto& [id, name] : ds.categories) cats.push_back({{"id", id}, {"name", name}});
  for (const DatasetImage& im : ds.images) {
    write_ppm(dir / im.file, im.image);
    images.push_back({{"id", im.id}, {"file", im.file}, {"height", im.image.h}, {"width", im.image.w}});
    if (im.annotation_ids.size() != im.instances.size())
      throw InvalidArgument("image " + std::to_string(im.id) + ": annotation ids do not match instances");
    for (std::size_t k = 0; k < im.instances.size(); ++k) {
      const Instance& inst = im.instances[k];
      const Rle r = rle_encode(inst.mask);
      anns.push_back({{"id", im.annotation_ids[k]},
                      {"image_id", im.id},
                      {"category_id", inst.category},
                      {"bbox", {inst.box.x, inst.box.y, inst.box.w, inst.box.h}},
                      {"rle", {{"size", {r.h, r.w}}, {"counts", r.counts}}}});
    }
  }
  ordered_json root;
  root["images"] = images;
  root["categories"] = cats;
  root["annotations"] = anns;
  write_file(dir / "annotations.json", root.dump(1) + "\n");
}

std::vector<std::string> validate_instance(const Instance& inst, int annotation_id) {
  std::vector<std::string> out;
  const std::string who = "annotation " + std::to_string(annotation_id);
  if (inst.mask.empty()) {
    out.push_back(who + ": empty mask");
    return out;
  }
  const Box t = tight_box(inst.mask);
  const double dev = std::max({std::abs(t.x - inst.box.x), std::abs(t.y - inst.box.y), std::abs(t.x2() - inst.box.x2()),
                               std::abs(t.y2() - inst.box.y2())});
  if (dev > 1.0) {
    char buf[192];
    std::snprintf(buf, sizeof buf, ": bbox [%g, %g, %g, %g] is %.3g px from the mask tight box [%g, %g, %g, %g]",
                  inst.box.x, inst.box.y, inst.box.w, inst.box.h, dev, t.x, t.y, t.w, t.h);
    out.push_back(who + buf);
  }
  return out;
}

namespace {

template <typename V>
V field(const nlohmann::json& obj, const char* key, const std::string& who) {
  if (!obj.is_object() || !obj.contains(key)) throw LoadError(who + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(who + ": bad field \"" + key + "\": " + e.what());
  }
}

}  // namespace

Dataset read_dataset(const fs::path& dir, std::vector<std::string>* warnings) {
  const fs::path ann_path = dir / "annotations.json";
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_file(ann_path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(ann_path.string() + ": " + e.what());
  }
  Dataset ds;
  const auto cats = field<nlohmann::json>(root, "categories", ann_path.string());
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string who = "category #" + std::to_string(i);
    ds.categories.emplace_back(field<int>(cats[i], "id", who), field<std::string>(cats[i], "name", who));
  }
  std::map<int, std::size_t> by_id;
  for (const auto& rec : field<nlohmann::json>(root, "images", ann_path.string())) {
    DatasetImage im;
    im.id = field<int>(rec, "id", "image record");
    const std::string who = "image " + std::to_string(im.id);
    im.file = field<std::string>(rec, "file", who);
    const int h = field<int>(rec, "height", who), w = field<int>(rec, "width", who);
    if (by_id.count(im.id)) throw LoadError(who + ": duplicate id");
    try {
      im.image = read_ppm(dir / im.file);
    } catch (const LoadError& e) {
      throw LoadError(who + ": " + e.what());
    }
    if (im.image.h != h || im.image.w != w)
      throw LoadError(who + ": " + im.file + " is " + std::to_string(im.image.h) + "x" + std::to_string(im.image.w) +
                      ", record says " + std::to_string(h) + "x" + std::to_string(w));
    by_id[im.id] = ds.images.size();
    ds.images.push_back(std::move(im));
  }
  for (const auto& rec : field<nlohmann::json>(root, "annotations", ann_path.string())) {
    const int id = field<int>(rec, "id", "annotation record");
    const std::string who = "annotation " + std::to_string(id);
    const int image_id = field<int>(rec, "image_id", who);
    auto it = by_id.find(image_id);
    if (it == by_id.end()) throw LoadError(who + ": unknown image_id " + std::to_string(image_id));
    DatasetImage& im = ds.images[it->second];
    Instance inst;
    inst.category = field<int>(rec, "category_id", who);
    bool known = false;
    for (const auto& c : ds.categories) known = known || c.first == inst.category;
    if (!known) throw LoadError(who + ": unknown category_id " + std::to_string(inst.category));
    const auto bbox = field<std::vector<double>>(rec, "bbox", who);
    if (bbox.size() != 4) throw LoadError(who + ": bbox must have 4 numbers");
    inst.box = {bbox[0], bbox[1], bbox[2], bbox[3]};
    const auto rle = field<nlohmann::json>(rec, "rle", who);
    const auto size = field<std::vector<int>>(rle, "size", who + " rle");
    if (size.size() != 2) throw LoadError(who + ": rle size must be [height, width]");
    if (size[0] != im.image.h || size[1] != im.image.w)
      throw LoadError(who + ": rle size " + std::to_string(size[0]) + "x" + std::to_string(size[1]) +
                      " does not match image " + std::to_string(image_id));
    try {
      inst.mask = rle_decode({size[0], size[1], field<std::vector<std::int64_t>>(rle, "counts", who + " rle")});
    } catch (const CorruptData& e) {
      throw LoadError(who + ": " + e.what());
    }
    if (warnings)
      for (auto& msg : validate_instance(inst, id)) warnings->push_back(std::move(msg));
    im.instances.push_back(std::move(inst));
    im.annotation_ids.push_back(id);
  }
  return ds;
}

}  // namespace sgtn
