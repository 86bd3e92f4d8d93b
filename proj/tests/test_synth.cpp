// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <filesystem>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "sgtn/dataset.hpp"

using namespace sgtn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("sgtn_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Mask random_mask(std::mt19937_64& rng, int h, int w, double p) {
  Mask m(h, w);
  std::bernoulli_distribution b(p);
  for (auto& v : m.data) v = b(rng);
  return m;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("pcg32 reference stream") {
    Pcg32 rng(42, 54);
    const std::uint32_t want[6] = {0xa15c02b7u, 0x7b47f409u, 0xba1d3330u, 0x83d2f293u, 0xbfa4784bu, 0xcbed606eu};
    for (std::uint32_t w : want) CHECK(rng.next() == w);
  }

  TEST_CASE("pcg32 bounded draws") {
    Pcg32 rng(1);
    int hist[7] = {};
    for (int i = 0; i < 70000; ++i) {
      const std::uint32_t v = rng.bounded(7);
      REQUIRE(v < 7);
      ++hist[v];
    }
    for (int h : hist) CHECK(std::abs(h - 10000) < 500);
    for (int i = 0; i < 1000; ++i) {
      const int v = rng.range(-3, 3);
      CHECK((v >= -3 && v <= 3));
      const double u = rng.uniform();
      CHECK((u >= 0 && u < 1));
    }
    CHECK_THROWS_AS(rng.bounded(0), InvalidArgument);
  }

  TEST_CASE("scene contract") {
    SceneSpec spec;
    spec.min_instances = spec.max_instances = 3;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      spec.seed = seed;
      const Scene s = generate_scene(spec);
      CHECK(s.image.h == 64);
      CHECK(s.image.w == 64);
      CHECK_FALSE(s.placement_warning);
      REQUIRE(s.instances.size() == 3);
      for (const Instance& inst : s.instances) {
        CHECK(inst.mask.h == 64);
        CHECK(inst.mask.w == 64);
        CHECK_FALSE(inst.mask.empty());
        CHECK(inst.box == tight_box(inst.mask));
        CHECK((inst.category >= 0 && inst.category < kNumShapeClasses));
        CHECK(validate_instance(inst, 0).empty());
      }
    }
  }

  TEST_CASE("scene generation is a pure function of its SceneSpec") {
    SceneSpec spec;
    spec.seed = 99;
    spec.height = 96;
    spec.width = 64;
    const Scene a = generate_scene(spec), b = generate_scene(spec);
    CHECK(a.image == b.image);
    CHECK(a.instances == b.instances);
    spec.seed = 100;
    CHECK_FALSE(generate_scene(spec).image == a.image);
  }

  TEST_CASE("overlap cap") {
    SceneSpec spec;
    spec.overlap_max = 0;
    spec.min_instances = 3;
    spec.max_instances = 6;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      spec.seed = seed;
      const Scene s = generate_scene(spec);
      for (std::size_t i = 0; i < s.instances.size(); ++i)
        for (std::size_t j = i + 1; j < s.instances.size(); ++j)
          CHECK(mask_iou(s.instances[i].mask, s.instances[j].mask) == 0.0);
    }
  }

  TEST_CASE("visible masks are disjoint under occlusion") {
    SceneSpec spec;
    spec.overlap_max = 0.3;
    spec.min_instances = spec.max_instances = 5;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      spec.seed = seed;
      const Scene s = generate_scene(spec);
      for (std::size_t i = 0; i < s.instances.size(); ++i) {
        CHECK_FALSE(s.instances[i].mask.empty());
        for (std::size_t j = i + 1; j < s.instances.size(); ++j)
          CHECK(mask_iou(s.instances[i].mask, s.instances[j].mask) == 0.0);
      }
    }
  }

  TEST_CASE("placement failure returns fewer instances with a warning") {
    SceneSpec spec;
    spec.min_instances = spec.max_instances = 40;
    spec.size_min = spec.size_max = 28;
    spec.overlap_max = 0;
    const Scene s = generate_scene(spec);
    CHECK(s.placement_warning);
    CHECK(s.instances.size() < 40);
  }

  TEST_CASE("class balance") {
    SceneSpec spec;
    int counts[kNumShapeClasses] = {};
    int total = 0;
    for (std::uint64_t i = 0; i < 120; ++i) {
      spec.seed = scene_seed(5, i);
      for (const Instance& inst : generate_scene(spec).instances) ++counts[inst.category], ++total;
    }
    for (int c : counts) CHECK(std::abs(c - total / 3.0) <= 0.2 * total / 3.0);
  }

  TEST_CASE("restricted shape classes") {
    SceneSpec spec;
    spec.shape_classes = {ShapeClass::kEllipse};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      spec.seed = seed;
      for (const Instance& inst : generate_scene(spec).instances) CHECK(inst.category == int(ShapeClass::kEllipse));
    }
    CHECK(parse_shape_class("L-shape") == ShapeClass::kLShape);
    CHECK_FALSE(parse_shape_class("triangle").has_value());
  }

  TEST_CASE("spec validation") {
    SceneSpec spec;
    spec.height = 48;
    CHECK_THROWS_AS(generate_scene(spec), InvalidArgument);
    spec.height = 64;
    spec.shape_classes.clear();
    CHECK_THROWS_AS(generate_scene(spec), InvalidArgument);
  }

  TEST_CASE("rle examples") {
    CHECK(rle_encode(Mask(3, 4)).counts == std::vector<std::int64_t>{12});
    CHECK(rle_encode(Mask(3, 4, 1)).counts == std::vector<std::int64_t>{0, 12});
    Mask m(2, 2);
    m.at(0, 1) = m.at(1, 1) = 1;  // second column set
    CHECK(rle_encode(m).counts == std::vector<std::int64_t>{2, 2});
    Mask n(2, 2);
    n.at(0, 0) = 1;
    CHECK(rle_encode(n).counts == std::vector<std::int64_t>{0, 1, 3});
    Mask t(2, 3);
    t.at(1, 0) = t.at(0, 1) = 1;  // column-major order is (0,0) (1,0) (0,1) (1,1) ...
    CHECK(rle_encode(t).counts == std::vector<std::int64_t>{1, 2, 3});
    CHECK_THROWS_AS(rle_decode({2, 2, {1, 2}}), CorruptData);
    CHECK_THROWS_AS(rle_decode({2, 2, {3, 2}}), CorruptData);
    CHECK_THROWS_AS(rle_decode({2, 2, {5, -1}}), CorruptData);
    CHECK(rle_decode({0, 0, {0}}).area() == 0);
  }

  TEST_CASE("rle roundtrip on 1000 random masks") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
      const int h = 1 + int(rng() % 40), w = 1 + int(rng() % 40);
      const Mask m = random_mask(rng, h, w, std::uniform_real_distribution<double>(0, 1)(rng));
      const Rle r = rle_encode(m);
      std::int64_t sum = 0;
      for (auto c : r.counts) sum += c;
      CHECK(sum == std::int64_t(h) * w);
      CHECK(rle_decode(r) == m);
    }
  }

  TEST_CASE("ppm header and roundtrip") {
    std::string bytes = "P6\n64 64\n255\n";
    bytes.append(64 * 64 * 3, '\x7f');
    const RgbImage img = parse_ppm(bytes, "x.ppm");
    CHECK(img.h == 64);
    CHECK(img.w == 64);
    CHECK(img.at(63, 63, 2) == 0x7f);

    std::string commented = "P6 # made by hand\n2 1\n# max\n255\n";
    commented += std::string("\x01\x02\x03\x04\x05\x06", 6);
    const RgbImage c = parse_ppm(commented, "c.ppm");
    CHECK(c.w == 2);
    CHECK(c.at(0, 1, 0) == 4);
    CHECK(parse_ppm(encode_ppm(c), "rt") == c);

    CHECK_THROWS_AS(parse_ppm("P5\n1 1\n255\nx", "gray.ppm"), LoadError);
    CHECK_THROWS_AS(parse_ppm("P6\n2 2\n255\nabc", "short.ppm"), LoadError);
    CHECK_THROWS_AS(parse_ppm("P6\n2 2\n65535\n", "deep.ppm"), LoadError);
    try {
      parse_ppm("P6\nxx", "bad.ppm");
      FAIL("no throw");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("bad.ppm") != std::string::npos);
    }
  }

  TEST_CASE("dataset write then read") {
    SceneSpec spec;
    spec.seed = 11;
    const Dataset ds = generate_dataset(spec, 5);
    REQUIRE(ds.images.size() == 5);
    const fs::path dir = scratch_dir("ds");
    write_dataset(dir, ds);
    std::vector<std::string> warnings;
    const Dataset back = read_dataset(dir, &warnings);
    CHECK(warnings.empty());
    CHECK(back == ds);

    const auto root = nlohmann::json::parse(read_file(dir / "annotations.json"));
    for (const char* k : {"images", "categories", "annotations"}) CHECK(root.contains(k));
    const auto& a = root["annotations"][0];
    for (const char* k : {"image_id", "category_id", "bbox", "rle"}) CHECK(a.contains(k));
    for (const char* k : {"id", "file", "height", "width"}) CHECK(root["images"][0].contains(k));

    // same seed, same bytes
    const fs::path dir2 = scratch_dir("ds2");
    write_dataset(dir2, generate_dataset(spec, 5));
    CHECK(read_file(dir / "annotations.json") == read_file(dir2 / "annotations.json"));
    CHECK(read_file(dir / ds.images[3].file) == read_file(dir2 / ds.images[3].file));
    fs::remove_all(dir);
    fs::remove_all(dir2);
  }

  TEST_CASE("dataset validation and load errors") {
    SceneSpec spec;
    spec.seed = 12;
    spec.min_instances = spec.max_instances = 2;
    Dataset ds = generate_dataset(spec, 2);
    ds.images[1].instances[0].box.w += 3;
    const int bad_id = ds.images[1].annotation_ids[0];
    const fs::path dir = scratch_dir("val");
    write_dataset(dir, ds);
    std::vector<std::string> warnings;
    read_dataset(dir, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("annotation " + std::to_string(bad_id)) != std::string::npos);

    auto root = nlohmann::json::parse(read_file(dir / "annotations.json"));
    root["annotations"][2]["rle"]["counts"][0] = 1;
    write_file(dir / "annotations.json", root.dump());
    try {
      read_dataset(dir);
      FAIL("no throw");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("annotation " + std::to_string(root["annotations"][2]["id"].get<int>())) !=
            std::string::npos);
    }

    write_dataset(dir, ds);
    fs::remove(dir / ds.images[0].file);
    try {
      read_dataset(dir);
      FAIL("no throw");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find(ds.images[0].file) != std::string::npos);
    }
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_dataset(dir), LoadError);
  }

  TEST_CASE("images to batch") {
    RgbImage a(32, 32), b(32, 32);
    a.at(1, 2, 1) = 255;
    b.at(0, 0, 0) = 51;
    const Tensor<float> t = images_to_batch<float>({&a, &b});
    CHECK(t.shape() == Shape{2, 32, 32, 3});
    CHECK(t.at(0, 1, 2, 1) == 1.0f);
    CHECK(t.at(1, 0, 0, 0) == doctest::Approx(0.2));
    RgbImage c(64, 32);
    CHECK_THROWS_AS(images_to_batch<float>({&a, &c}), InvalidShape);
  }
}
