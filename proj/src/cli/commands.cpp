// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sgtn/attention.hpp"
#include "sgtn/checkpoint.hpp"
#include "sgtn/cli.hpp"
#include "sgtn/gradcheck_suite.hpp"
#include "sgtn/optim.hpp"

namespace sgtn {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> bench_sizes(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : split_list(s)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 1) throw InvalidArgument("n: '" + tok + "' is not a positive integer");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("n: empty list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw LoadError("cannot create directory " + p.string() + ": " + ec.message());
}

// Dataset images must share one extent that the encoder accepts.
void check_extent(const Dataset& ds, const std::string& where) {
  if (ds.images.empty()) throw LoadError(where + ": dataset has no images");
  const int h = ds.images[0].image.h, w = ds.images[0].image.w;
  for (const auto& im : ds.images) {
    if (im.image.h != h || im.image.w != w)
      throw LoadError("image " + std::to_string(im.id) + ": extent differs from the first image");
    if (h % 32 || w % 32)
      throw LoadError("image " + std::to_string(im.id) + ": extent " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not a multiple of 32");
  }
}

Dataset load_dataset(const RunConfig& cfg, std::ostream& err) {
  std::vector<std::string> warnings;
  Dataset ds = read_dataset(cfg.data, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  check_extent(ds, cfg.data);
  return ds;
}

struct LoadedModel {
  ParameterStore<float> store;
  std::optional<SgtnModel<float>> model;
};

void load_model(const RunConfig& cfg, LoadedModel& lm) {
  lm.model = SgtnModel<float>::create(lm.store, cfg.model(), cfg.seed);
  load_checkpoint(cfg.checkpoint_path(), lm.store);
}

std::map<int, std::string> category_names(const Dataset& ds) {
  std::map<int, std::string> names;
  for (const auto& [id, name] : ds.categories) names[id] = name;
  return names;
}

}  // namespace

void RunConfig::validate() const {
  if (preset != "desk" && preset != "paper-scale") throw InvalidArgument("preset: expected desk or paper-scale, got '" + preset + "'");
  parse_variant(variant);
  if (optimizer != "adam") throw InvalidArgument("optimizer: only 'adam' is available, got '" + optimizer + "'");
  if (!(lr > 0)) throw InvalidArgument("lr must be positive");
  if (steps < 0) throw InvalidArgument("steps must be >= 0");
  if (batch < 1) throw InvalidArgument("batch must be >= 1");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint-every must be >= 0");
  if (log_every < 0) throw InvalidArgument("log-every must be >= 0");
  if (count < 0) throw InvalidArgument("count must be >= 0");
  if (!(score_thresh >= 0 && score_thresh < 1)) throw InvalidArgument("score-thresh must lie in [0, 1)");
  if (dim < 1) throw InvalidArgument("dim must be >= 1");
  bench_sizes(n);
  scene_spec().validate();
  model().validate();
}

ModelConfig RunConfig::model() const {
  ModelConfig m = preset == "paper-scale" ? ModelConfig::paper_scale() : ModelConfig::desk();
  m.encoder.variant = parse_variant(variant);
  m.sgm_enabled = sgm;
  m.score_thresh = score_thresh;
  return m;
}

SceneSpec RunConfig::scene_spec() const {
  SceneSpec s;
  s.seed = seed;
  s.height = height;
  s.width = width;
  s.min_instances = min_instances;
  s.max_instances = max_instances;
  s.overlap_max = overlap_max;
  s.shape_classes.clear();
  for (const auto& name : split_list(shapes)) {
    const auto c = parse_shape_class(name);
    if (!c) throw InvalidArgument("shapes: unknown shape class '" + name + "'");
    s.shape_classes.push_back(*c);
  }
  return s;
}

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? (fs::path(out) / "checkpoint.sgtn").string() : checkpoint;
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  os << "preset = " << preset << "\nvariant = " << variant << "\nsgm = " << (sgm ? "true" : "false")
     << "\nseed = " << seed << "\noptimizer = " << optimizer << "\nlr = " << fmt(lr) << "\nsteps = " << steps
     << "\nbatch = " << batch << "\ncheckpoint-every = " << checkpoint_every << "\nlog-every = " << log_every
     << "\ndata = " << data << "\nout = " << out << "\ncheckpoint = " << checkpoint
     << "\npredictions = " << predictions << "\ncount = " << count << "\nheight = " << height
     << "\nwidth = " << width << "\nmin-instances = " << min_instances << "\nmax-instances = " << max_instances
     << "\noverlap-max = " << fmt(overlap_max) << "\nshapes = " << shapes << "\nscore-thresh = " << fmt(score_thresh)
     << "\nn = " << n << "\ndim = " << dim << "\n";
  return os.str();
}

// ---- predictions -----------------------------------------------------------

std::string prediction_json_line(const PredictionDoc& doc) {
  nlohmann::ordered_json j;
  j["image_id"] = doc.image_id;
  j["file"] = doc.file;
  j["height"] = doc.height;
  j["width"] = doc.width;
  nlohmann::ordered_json inst = nlohmann::ordered_json::array();
  for (const Prediction& p : doc.instances) {
    const Rle r = rle_encode(p.mask);
    inst.push_back({{"category", p.category},
                    {"score", p.score},
                    {"bbox", {p.box.x, p.box.y, p.box.w, p.box.h}},
                    {"mask", {{"size", {r.h, r.w}}, {"counts", r.counts}}}});
  }
  j["instances"] = inst;
  return j.dump();
}

std::vector<PredictionDoc> read_predictions(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<PredictionDoc> docs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string who = path + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionDoc d;
      d.image_id = j.at("image_id").get<int>();
      d.file = j.value("file", "");
      d.height = j.at("height").get<int>();
      d.width = j.at("width").get<int>();
      for (const auto& ij : j.at("instances")) {
        Prediction p;
        p.category = ij.at("category").get<int>();
        p.score = ij.at("score").get<double>();
        const auto b = ij.at("bbox").get<std::vector<double>>();
        if (b.size() != 4) throw LoadError("bbox must have 4 numbers");
        p.box = {b[0], b[1], b[2], b[3]};
        const auto size = ij.at("mask").at("size").get<std::vector<int>>();
        if (size.size() != 2 || size[0] != d.height || size[1] != d.width)
          throw LoadError("mask size does not match the image extent");
        p.mask = rle_decode({size[0], size[1], ij.at("mask").at("counts").get<std::vector<std::int64_t>>()});
        d.instances.push_back(std::move(p));
      }
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(who + ": " + e.what());
    } catch (const Error& e) {
      throw LoadError(who + ": " + e.what());
    }
  }
  return docs;
}

std::vector<PredictionDoc> predict_dataset(const SgtnModel<float>& model, const Dataset& ds, int batch) {
  std::vector<PredictionDoc> docs;
  for (std::size_t first = 0; first < ds.images.size(); first += std::size_t(batch)) {
    const std::size_t last = std::min(ds.images.size(), first + std::size_t(batch));
    std::vector<const RgbImage*> ims;
    for (std::size_t i = first; i < last; ++i) ims.push_back(&ds.images[i].image);
    auto preds = model.predict(images_to_batch<float>(ims));
    for (std::size_t i = first; i < last; ++i) {
      const auto& im = ds.images[i];
      docs.push_back({im.id, im.file, im.image.h, im.image.w, std::move(preds[i - first])});
    }
  }
  return docs;
}

EvalReport evaluate_predictions(const std::vector<PredictionDoc>& preds, const Dataset& ds) {
  std::map<int, const DatasetImage*> by_id;
  std::vector<EvalGroundTruth> gts;
  for (const auto& im : ds.images) {
    by_id[im.id] = &im;
    for (const auto& inst : im.instances) gts.push_back({im.id, inst.category, inst.mask});
  }
  std::vector<EvalDetection> dets;
  std::set<int> seen;
  for (const auto& doc : preds) {
    auto it = by_id.find(doc.image_id);
    if (it == by_id.end()) throw LoadError("predictions for unknown image_id " + std::to_string(doc.image_id));
    if (!seen.insert(doc.image_id).second)
      throw LoadError("predictions list image_id " + std::to_string(doc.image_id) + " twice");
    for (const auto& p : doc.instances) {
      if (p.mask.h != it->second->image.h || p.mask.w != it->second->image.w)
        throw LoadError("image " + std::to_string(doc.image_id) + ": predicted mask extent differs from the image");
      dets.push_back({doc.image_id, p.category, p.score, p.mask});
    }
  }
  return coco_ap_suite(dets, gts);
}

RgbImage render_overlay(const RgbImage& image, const std::vector<Prediction>& preds) {
  static constexpr std::uint8_t kPalette[6][3] = {{230, 60, 60}, {60, 200, 80}, {70, 110, 240},
                                                   {240, 200, 40}, {200, 70, 220}, {40, 210, 210}};
  RgbImage out = image;
  for (const auto& p : preds) {
    const auto* col = kPalette[std::size_t(p.category) % 6];
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        if (!p.mask.get(y, x)) continue;
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = std::uint8_t((out.at(y, x, c) + col[c]) / 2);
      }
    const int x0 = std::clamp(int(std::floor(p.box.x)), 0, out.w - 1), x1 = std::clamp(int(std::ceil(p.box.x2())) - 1, 0, out.w - 1);
    const int y0 = std::clamp(int(std::floor(p.box.y)), 0, out.h - 1), y1 = std::clamp(int(std::ceil(p.box.y2())) - 1, 0, out.h - 1);
    for (int x = x0; x <= x1; ++x)
      for (int c = 0; c < 3; ++c) out.at(y0, x, c) = out.at(y1, x, c) = col[c];
    for (int y = y0; y <= y1; ++y)
      for (int c = 0; c < 3; ++c) out.at(y, x0, c) = out.at(y, x1, c) = col[c];
  }
  return out;
}

// ---- commands --------------------------------------------------------------

void command_gen_data(const RunConfig& cfg, std::ostream& out) {
  const SceneSpec spec = cfg.scene_spec();
  const Dataset ds = generate_dataset(spec, cfg.count);
  write_dataset(cfg.data, ds);
  std::size_t instances = 0;
  for (const auto& im : ds.images) instances += im.instances.size();
  out << "wrote " << ds.images.size() << " images, " << instances << " instances to " << cfg.data << '\n';
}

void command_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(cfg, err);
  ParameterStore<float> store;
  const auto model = SgtnModel<float>::create(store, cfg.model(), cfg.seed);
  Adam<float> opt(AdamConfig{cfg.lr});
  const fs::path dir(cfg.out);
  make_dirs(dir);
  write_file(dir / "config.ini", cfg.to_ini());

  std::ostringstream log;
  log << "step,total";
  for (const auto& t : loss_term_names()) log << ',' << t;
  log << '\n';

  const std::size_t n = ds.images.size();
  const std::size_t b = std::min(n, std::size_t(cfg.batch));
  Pcg32 rng(cfg.seed, 0x7261696eULL);
  std::vector<std::size_t> order(n);
  std::size_t cursor = n;  // forces a shuffle on the first step
  const auto t0 = std::chrono::steady_clock::now();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const RgbImage*> ims;
    std::vector<InstanceList> gts;
    for (std::size_t k = 0; k < b; ++k) {
      if (cursor == n) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.bounded(std::uint32_t(i))]);
        cursor = 0;
      }
      const auto& im = ds.images[order[cursor++]];
      ims.push_back(&im.image);
      gts.push_back(im.instances);
    }
    store.zero_grad();
    Graph<float> g;
    const auto loss = model.loss(g, images_to_batch<float>(ims), gts, scene_seed(cfg.seed, std::uint64_t(step)));
    if (!std::isfinite(loss.scalar)) throw NumericalError("non-finite loss at step " + std::to_string(step));
    g.backward(loss.total);
    opt.step(store, cosine_lr(cfg.lr, step, cfg.steps));

    log << step << ',' << fmt(loss.scalar);
    for (const auto& t : loss_term_names()) {
      auto it = loss.terms.find(t);
      log << ',' << fmt(it == loss.terms.end() ? 0.0 : it->second);
    }
    log << '\n';
    if (cfg.log_every > 0 && ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[128];
      std::snprintf(buf, sizeof buf, "step %d/%d loss %.4f (%.0f s)\n", step + 1, cfg.steps, loss.scalar, secs);
      err << buf << std::flush;
    }
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_step%06d.sgtn", step + 1);
      save_checkpoint((dir / name).string(), store);
    }
  }
  write_file(dir / "loss.csv", log.str());
  save_checkpoint(cfg.checkpoint_path(), store);
  out << "trained " << cfg.steps << " steps; checkpoint " << cfg.checkpoint_path() << ", log "
      << (dir / "loss.csv").string() << '\n';
}

EvalReport command_eval(const RunConfig& cfg, std::ostream& out) {
  std::ostringstream sink;
  const Dataset ds = load_dataset(cfg, sink);
  std::vector<PredictionDoc> preds;
  if (!cfg.predictions.empty()) {
    preds = read_predictions(cfg.predictions);
  } else {
    LoadedModel lm;
    load_model(cfg, lm);
    preds = predict_dataset(*lm.model, ds, cfg.batch);
  }
  const EvalReport report = evaluate_predictions(preds, ds);
  const auto names = category_names(ds);
  const fs::path dir(cfg.out);
  make_dirs(dir);
  write_file(dir / "eval.json", report_json(report, names));
  const std::string table = report_table(report, names);
  write_file(dir / "eval.txt", table);
  out << table;
  return report;
}

void command_infer(const RunConfig& cfg, std::ostream& out) {
  std::ostringstream sink;
  const Dataset ds = load_dataset(cfg, sink);
  LoadedModel lm;
  load_model(cfg, lm);
  const auto docs = predict_dataset(*lm.model, ds, cfg.batch);
  const fs::path dir(cfg.out);
  make_dirs(dir / "overlays");
  std::string lines;
  std::size_t total = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    lines += prediction_json_line(docs[i]) + "\n";
    total += docs[i].instances.size();
    const std::string stem = fs::path(ds.images[i].file).stem().string();
    write_ppm(dir / "overlays" / (stem + ".ppm"), render_overlay(ds.images[i].image, docs[i].instances));
  }
  write_file(dir / "predictions.jsonl", lines);
  out << "wrote " << total << " instances for " << docs.size() << " images to " << (dir / "predictions.jsonl").string()
      << '\n';
}

bool command_gradcheck(const RunConfig& cfg, std::ostream& out) {
  const auto cases = run_gradcheck_suite(cfg.seed);
  bool ok = true;
  std::size_t width = 4;
  for (const auto& c : cases) width = std::max(width, c.name.size());
  for (const auto& c : cases) {
    const bool pass = c.report.passed(kGradcheckTolerance);
    ok = ok && pass;
    char buf[64];
    std::snprintf(buf, sizeof buf, "  max rel err %.3e  %s", c.report.max_rel_error, pass ? "ok" : "FAIL");
    out << c.name << std::string(width - c.name.size(), ' ') << buf;
    if (!pass) out << "  (worst " << c.report.worst << ")";
    out << '\n';
  }
  out << (ok ? "all " : "some ") << cases.size() << " checks " << (ok ? "passed" : "FAILED") << " at tolerance "
      << kGradcheckTolerance << '\n';
  return ok;
}

void command_bench_attn(const RunConfig& cfg, std::ostream& out) {
  const int c = cfg.dim;
  const int window = ModelConfig::desk().encoder.window;
  std::ostringstream csv;
  csv << "n,dense_flops,window_flops,axial_flops,measured_ns\n";
  char line[160];
  std::snprintf(line, sizeof line, "%6s %16s %14s %14s %10s %10s\n", "n", "dense", "window", "axial", "axial/dense",
                "2/n");
  out << line;
  for (int n : bench_sizes(cfg.n)) {
    ParameterStore<float> store;
    Initializer init(cfg.seed);
    const AttentionConfig global{c, 1, 0, 0};
    AttentionConfig wcfg{c, 1, window, 0};
    AttentionConfig col = global;
    col.axis = Axis::kColumn;
    const auto p = AttentionParams<float>::create(store, "dense", global, init, false);
    const auto pw = AttentionParams<float>::create(store, "window", wcfg, init, true);
    Tensor<float> x({n, n, c});
    Pcg32 rng(cfg.seed, std::uint64_t(n));
    for (auto& v : x.vec()) v = float(rng.uniform(-1, 1));
    Graph<float> g(Phase::kEval, false);
    const auto xv = g.constant(x);

    reset_attention_macs();
    multi_head_qkv_attention(reshape(xv, {1, n * n, c}), global, p);
    const std::uint64_t dense = attention_score_macs();
    reset_attention_macs();
    wmsa(xv, wcfg, pw);
    const std::uint64_t win = attention_score_macs();
    reset_attention_macs();
    const auto t0 = std::chrono::steady_clock::now();
    axial_msa(xv, global, p);
    axial_msa(xv, col, p);
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    const std::uint64_t axial = attention_score_macs();

    csv << n << ',' << dense << ',' << win << ',' << axial << ',' << ns << '\n';
    std::snprintf(line, sizeof line, "%6d %16" PRIu64 " %14" PRIu64 " %14" PRIu64 " %10.5f %10.5f\n", n, dense, win,
                  axial, double(axial) / double(dense), 2.0 / n);
    out << line;
  }
  const fs::path dir(cfg.out);
  make_dirs(dir);
  write_file(dir / "bench_attn.csv", csv.str());
  out << "wrote " << (dir / "bench_attn.csv").string() << '\n';
}

}  // namespace sgtn
