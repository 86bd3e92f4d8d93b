// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sgtn/cli.hpp"

using namespace sgtn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("sgtn_cli_" + tag + "_" + std::to_string(getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"train", "--no-such-flag", "1"}).code == kExitUsage);
    CHECK(cli({"train", "--variant", "resnet"}).code == kExitUsage);
    CHECK(cli({"train", "--steps", "-1"}).code == kExitUsage);
    CHECK(cli({"gen-data", "--min-instances", "5", "--max-instances", "2"}).code == kExitUsage);
    CHECK(cli({"bench-attn", "--n", "16,x"}).code == kExitUsage);
    CHECK(cli({"train", "--help"}).code == kExitOk);
  }

  TEST_CASE("config file: unknown keys rejected with their line, flags override values") {
    TempDir d("config");
    spit(d / "bad.ini", "# comment\nseed = 3\nlearning_rate = 0.1\n");
    const Run bad = cli({"gen-data", "--config", d / "bad.ini", "--data", d / "x"});
    CHECK(bad.code == kExitUsage);
    CHECK(bad.err.find("bad.ini:3") != std::string::npos);
    CHECK(bad.err.find("learning_rate") != std::string::npos);

    spit(d / "good.ini", "count = 5\nseed = 3\nmin-instances = 1\nmax-instances = 1\ndata = " + (d / "ignored") + "\n");
    REQUIRE(cli({"gen-data", "--config", d / "good.ini", "--count", "2", "--data", d / "ds"}).code == kExitOk);
    CHECK(!fs::exists(d / "ignored"));
    const Dataset ds = read_dataset(d / "ds");
    CHECK(ds.images.size() == 2);
    for (const auto& im : ds.images) CHECK(im.instances.size() == 1);

    CHECK(cli({"gen-data", "--config", d / "missing.ini"}).code == kExitUsage);
    spit(d / "noeq.ini", "count 5\n");
    CHECK(cli({"gen-data", "--config", d / "noeq.ini"}).code == kExitUsage);
  }

  TEST_CASE("to_ini output is accepted back as a config") {
    TempDir d("roundtrip");
    RunConfig c;
    c.count = 1;
    c.data = d / "ds";
    c.checkpoint = d / "ck.sgtn";
    spit(d / "all.ini", c.to_ini());
    CHECK(cli({"gen-data", "--config", d / "all.ini"}).code == kExitOk);
    CHECK(read_dataset(d / "ds").images.size() == 1);
  }

  TEST_CASE("missing or corrupt data exits 2") {
    TempDir d("data");
    CHECK(cli({"eval", "--data", d / "nothing", "--out", d / "o"}).code == kExitData);
    CHECK(cli({"train", "--data", d / "nothing", "--out", d / "o", "--steps", "1"}).code == kExitData);
    REQUIRE(cli({"gen-data", "--data", d / "ds", "--count", "2"}).code == kExitOk);
    spit(d / "ds/annotations.json", "{\"images\": [");
    const Run r = cli({"eval", "--data", d / "ds", "--out", d / "o"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("annotations.json") != std::string::npos);
  }

  TEST_CASE("gen-data is byte-identical for a seed") {
    TempDir d("gen");
    REQUIRE(cli({"gen-data", "--data", d / "a", "--seed", "5", "--count", "3"}).code == kExitOk);
    REQUIRE(cli({"gen-data", "--data", d / "b", "--seed", "5", "--count", "3"}).code == kExitOk);
    REQUIRE(cli({"gen-data", "--data", d / "c", "--seed", "6", "--count", "3"}).code == kExitOk);
    CHECK(slurp(d / "a/annotations.json") == slurp(d / "b/annotations.json"));
    CHECK(slurp(d / "a/images/000000.ppm") == slurp(d / "b/images/000000.ppm"));
    CHECK(slurp(d / "a/images/000000.ppm") != slurp(d / "c/images/000000.ppm"));
  }

  TEST_CASE("ground truth written as predictions scores AP 1") {
    TempDir d("gt");
    REQUIRE(cli({"gen-data", "--data", d / "ds", "--count", "4"}).code == kExitOk);
    const Dataset ds = read_dataset(d / "ds");
    std::string lines;
    for (const auto& im : ds.images) {
      PredictionDoc doc{im.id, im.file, im.image.h, im.image.w, {}};
      for (const auto& inst : im.instances) doc.instances.push_back({inst.category, 0.9, inst.box, inst.mask});
      lines += prediction_json_line(doc) + "\n";
    }
    spit(d / "gt.jsonl", lines);
    const auto back = read_predictions(d / "gt.jsonl");
    REQUIRE(back.size() == ds.images.size());
    CHECK(back[0].instances[0].mask == ds.images[0].instances[0].mask);
    REQUIRE(cli({"eval", "--data", d / "ds", "--out", d / "o", "--predictions", d / "gt.jsonl"}).code == kExitOk);
    const auto j = nlohmann::json::parse(slurp(d / "o/eval.json"));
    CHECK(j["AP"].get<double>() == 1.0);
    CHECK(j["AP50"].get<double>() == 1.0);
    CHECK(fs::exists(d / "o/eval.txt"));
  }

  TEST_CASE("train, eval and infer end to end for a few steps") {
    TempDir d("train");
    REQUIRE(cli({"gen-data", "--data", d / "ds", "--count", "2"}).code == kExitOk);
    const Run t = cli({"train", "--data", d / "ds", "--out", d / "run", "--steps", "3", "--batch", "2",
                       "--checkpoint-every", "2", "--log-every", "0"});
    REQUIRE(t.code == kExitOk);
    std::istringstream log(slurp(d / "run/loss.csv"));
    std::string header, line;
    std::getline(log, header);
    CHECK(header.rfind("step,total,", 0) == 0);
    int rows = 0;
    while (std::getline(log, line)) ++rows;
    CHECK(rows == 3);
    CHECK(fs::exists(d / "run/checkpoint.sgtn"));
    CHECK(fs::exists(d / "run/checkpoint_step000002.sgtn"));
    CHECK(slurp(d / "run/checkpoint.sgtn").rfind("SGTN", 0) == 0);

    REQUIRE(cli({"eval", "--data", d / "ds", "--out", d / "run"}).code == kExitOk);
    CHECK(fs::exists(d / "run/eval.json"));
    REQUIRE(cli({"infer", "--data", d / "ds", "--out", d / "run"}).code == kExitOk);
    CHECK(read_predictions(d / "run/predictions.jsonl").size() == 2);
    CHECK(fs::exists(d / "run/overlays/000000.ppm"));
    // a checkpoint from one variant does not load into another with different parameters
    CHECK(cli({"eval", "--data", d / "ds", "--out", d / "run", "--preset", "paper-scale"}).code == kExitData);
  }

  TEST_CASE("bench-attn writes the analytic counts") {
    TempDir d("bench");
    REQUIRE(cli({"bench-attn", "--out", d.path.string(), "--n", "8,16", "--dim", "4"}).code == kExitOk);
    std::istringstream csv(slurp(d / "bench_attn.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "n,dense_flops,window_flops,axial_flops,measured_ns");
    long long n, dense, win, axial, ns;
    std::getline(csv, line);
    REQUIRE(std::sscanf(line.c_str(), "%lld,%lld,%lld,%lld,%lld", &n, &dense, &win, &axial, &ns) == 5);
    CHECK(n == 8);
    CHECK(dense == 8LL * 8 * 8 * 8 * 4);
    CHECK(axial == 2LL * 8 * 8 * 8 * 4);
    CHECK(win == 8LL * 8 * 16 * 4);
  }

  TEST_CASE("gradcheck subcommand passes") {
    const Run r = cli({"gradcheck", "--seed", "1"});
    CHECK(r.code == kExitOk);
  }
}
