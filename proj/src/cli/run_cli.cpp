// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sgtn/cli.hpp"

namespace sgtn {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_run_options(CLI::App* sub, RunConfig& c, std::string& config_path) {
  sub->add_option("--config", config_path, "INI file of key = value lines; flags override it");
  sub->add_option("--preset", c.preset, "desk | paper-scale")->capture_default_str();
  sub->add_option("--variant", c.variant, "lswin | swin_only | lrc_only")->capture_default_str();
  sub->add_option("--sgm", c.sgm, "shape guidance module on/off")->capture_default_str();
  sub->add_option("--seed", c.seed, "seed for data, init and batching")->capture_default_str();
  sub->add_option("--optimizer", c.optimizer, "adam")->capture_default_str();
  sub->add_option("--lr", c.lr, "base learning rate (cosine decay)")->capture_default_str();
  sub->add_option("--steps", c.steps, "training steps")->capture_default_str();
  sub->add_option("--batch", c.batch, "images per step")->capture_default_str();
  sub->add_option("--checkpoint-every", c.checkpoint_every, "extra checkpoints every N steps, 0 = final only")
      ->capture_default_str();
  sub->add_option("--log-every", c.log_every, "progress line every N steps, 0 = quiet")->capture_default_str();
  sub->add_option("--data", c.data, "dataset directory")->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--checkpoint", c.checkpoint, "checkpoint file (default <out>/checkpoint.sgtn)");
  sub->add_option("--predictions", c.predictions, "eval: prediction JSONL to score instead of running the model");
  sub->add_option("--count", c.count, "gen-data: number of scenes")->capture_default_str();
  sub->add_option("--height", c.height, "gen-data: image height")->capture_default_str();
  sub->add_option("--width", c.width, "gen-data: image width")->capture_default_str();
  sub->add_option("--min-instances", c.min_instances, "gen-data")->capture_default_str();
  sub->add_option("--max-instances", c.max_instances, "gen-data")->capture_default_str();
  sub->add_option("--overlap-max", c.overlap_max, "gen-data: IoU cap between shapes")->capture_default_str();
  sub->add_option("--shapes", c.shapes, "gen-data: comma list of rectangle, L-shape, ellipse")->capture_default_str();
  sub->add_option("--score-thresh", c.score_thresh, "minimum detection score")->capture_default_str();
  sub->add_option("--n", c.n, "bench-attn: comma list of map sides")->capture_default_str();
  sub->add_option("--dim", c.dim, "bench-attn: channels")->capture_default_str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// key = value lines; '#' and ';' start comments. Sections are not used.
std::vector<std::pair<std::string, std::string>> read_ini(const std::string& path, const std::set<std::string>& keys) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!keys.count(key)) throw UsageError(where + ": unknown key '" + key + "'");
    out.emplace_back(key, value);
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string config_path;
  CLI::App app{"Shape guided transformer network: data generation, training, evaluation and inference", "sgtn"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1, 1);
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"gen-data", "write a synthetic dataset to --data"},
      {"train", "train on --data, write checkpoints and loss.csv to --out"},
      {"eval", "score predictions (or the checkpoint) against --data, write eval.json and eval.txt"},
      {"infer", "write predictions.jsonl and overlay images for --data"},
      {"gradcheck", "finite-difference gradient checks"},
      {"bench-attn", "multiply-add counts of dense, window and axial attention"}};
  std::set<std::string> keys;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_run_options(sub, cfg, config_path);
    if (keys.empty())
      for (const CLI::Option* o : sub->get_options())
        for (const auto& ln : o->get_lnames())
          if (ln != "help" && ln != "config") keys.insert(ln);
  }

  try {
    // Config values go in front of the command-line flags; TakeLast lets the flags win.
    std::vector<std::string> argv = args;
    std::string cfg_file;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--config" && i + 1 < argv.size()) cfg_file = argv[i + 1];
      else if (argv[i].rfind("--config=", 0) == 0) cfg_file = argv[i].substr(9);
    }
    if (!cfg_file.empty() && !argv.empty() && argv[0].rfind("-", 0) != 0) {
      std::vector<std::string> merged = {argv[0]};
      for (const auto& [k, v] : read_ini(cfg_file, keys)) {
        merged.push_back("--" + k);
        merged.push_back(v);
      }
      merged.insert(merged.end(), argv.begin() + 1, argv.end());
      argv = std::move(merged);
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    for (CLI::App* sub : app.get_subcommands())
      if (sub->parsed()) out << sub->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    cfg.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "gen-data") command_gen_data(cfg, out);
    else if (name == "train") command_train(cfg, out, err);
    else if (name == "eval") command_eval(cfg, out);
    else if (name == "infer") command_infer(cfg, out);
    else if (name == "gradcheck") return command_gradcheck(cfg, out) ? kExitOk : kExitNumerical;
    else if (name == "bench-attn") command_bench_attn(cfg, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace sgtn
