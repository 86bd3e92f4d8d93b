// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgtn/dataset.hpp"
#include "sgtn/eval.hpp"
#include "sgtn/model.hpp"

namespace sgtn {

/// Every key accepted in a config file or as a --key flag. All subcommands share it.
struct RunConfig {
  // model
  std::string preset = "desk";   // desk | paper-scale
  std::string variant = "lswin"; // lswin | swin_only | lrc_only
  bool sgm = true;
  std::uint64_t seed = 0;
  // optimizer
  std::string optimizer = "adam";
  double lr = 1e-3;
  int steps = 2000;
  int batch = 4;
  int checkpoint_every = 0;  // 0: final checkpoint only
  int log_every = 50;        // progress lines on stderr, 0 silences them
  // paths
  std::string data = "data";
  std::string out = "out";
  std::string checkpoint;   // default <out>/checkpoint.sgtn
  std::string predictions;  // eval input; empty runs inference from the checkpoint
  // gen-data
  int count = 16;
  int height = 64, width = 64;
  int min_instances = 2, max_instances = 4;
  double overlap_max = 0.1;
  std::string shapes = "rectangle,L-shape,ellipse";
  // inference
  double score_thresh = 0.05;
  // bench-attn
  std::string n = "16,32,64";
  int dim = 8;

  void validate() const;
  ModelConfig model() const;
  SceneSpec scene_spec() const;
  std::string checkpoint_path() const;
  /// key = value lines for every field, in declaration order.
  std::string to_ini() const;
};

/// Parses `args` (without the program name) and runs the subcommand.
/// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Subcommand bodies. They throw library errors; run_cli maps them to exit codes.
void command_gen_data(const RunConfig& cfg, std::ostream& out);
void command_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
EvalReport command_eval(const RunConfig& cfg, std::ostream& out);
void command_infer(const RunConfig& cfg, std::ostream& out);
bool command_gradcheck(const RunConfig& cfg, std::ostream& out);
void command_bench_attn(const RunConfig& cfg, std::ostream& out);

/// One image's predictions as written by `infer`.
struct PredictionDoc {
  int image_id = 0;
  std::string file;
  int height = 0, width = 0;
  std::vector<Prediction> instances;
};

std::string prediction_json_line(const PredictionDoc& doc);
std::vector<PredictionDoc> read_predictions(const std::string& path);

/// Runs the model over every dataset image, `batch` images at a time.
std::vector<PredictionDoc> predict_dataset(const SgtnModel<float>& model, const Dataset& ds, int batch);

/// AP of predictions against a dataset's annotations.
EvalReport evaluate_predictions(const std::vector<PredictionDoc>& preds, const Dataset& ds);

/// Masks and boxes drawn over the image.
RgbImage render_overlay(const RgbImage& image, const std::vector<Prediction>& preds);

}  // namespace sgtn
