// SPDX-License-Identifier: Apache-2.0
#include "c3po/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "c3po/trainer.hpp"

namespace c3po {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Usage problems detected after parsing (bad paths, config errors).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

RunConfig read_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  if (!fs::exists(path)) throw UsageError("config file '" + path + "' does not exist");
  try {
    return load_run_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("config '") + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

Image read_input_image(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("input image '" + path + "' does not exist");
  return read_png_rgb(path);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  bool force = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const RunConfig cfg = read_config(a.config);
  const fs::path root = a.out;
  if (fs::exists(root) && !fs::is_directory(root))
    throw UsageError("'" + a.out + "' exists and is not a directory");
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!a.force) throw UsageError("output directory '" + a.out + "' is not empty (use --force)");
    for (const char* sub : {"t0", "t1", "mask"}) fs::remove_all(root / sub);
    fs::remove(root / "manifest.json");
  }
  fs::create_directories(root);
  for (const char* sub : {"t0", "t1", "mask"}) fs::create_directories(root / sub);
  const auto samples = synth_generate(cfg.synth, a.seed, a.count);
  for (const auto& s : samples) save_sample(root, s);
  const json synth = to_json(cfg.synth);
  write_json(root / "manifest.json", json{{"version", 1},
                                          {"count", a.count},
                                          {"seed", a.seed},
                                          {"num_classes", cfg.synth.num_classes()},
                                          {"config_hash", hex64(config_hash(synth))},
                                          {"synth", synth}});
  out << "wrote " << a.count << " samples to " << root.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data = "synth";
  std::string test_data;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

std::string epoch_line(const EpochLog& e) {
  std::string line = "epoch " + std::to_string(e.epoch) + "  loss " + fixed(e.loss, 5) + "  lr " +
                     fixed(e.lr * 1e4, 3) + "e-4";
  if (e.report) {
    const auto& r = *e.report;
    line += (r.num_classes == 2 ? "  f1 " : "  miou ") + fixed(r.selection_metric()) + "  p " +
            fixed(r.precision) + "  r " + fixed(r.recall);
  }
  return line;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = read_config(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.seed) {
    cfg.model.seed = *a.seed;
    cfg.train.seed = *a.seed;
    cfg.train.data.seed = *a.seed;
  }
  if (a.data != "synth") {
    if (!fs::is_directory(a.data)) throw UsageError("data directory '" + a.data + "' does not exist");
    cfg.train.data.path = a.data;
  }
  if (!a.test_data.empty()) {
    if (!fs::is_directory(a.test_data))
      throw UsageError("test data directory '" + a.test_data + "' does not exist");
    cfg.train.data.test_path = a.test_data;
  }
  cfg.train.checkpoint_dir = a.out;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  RunData data;
  try {
    data = prepare_data(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& w : data.warnings) err << "warning: " << w << '\n';
  if (data.train.empty()) throw UsageError("no training samples found");

  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "config.json", to_json(cfg));
  ChangeNet<float> model(cfg.model);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) { out << epoch_line(e) << std::endl; };
  hooks.on_warning = [&](const std::string& w) { err << "warning: " << w << '\n'; };
  const TrainResult r = train(model, data.train, data.test, cfg.train, a.resume, hooks);
  if (r.best && r.last) {
    const char* name = r.best->num_classes == 2 ? "f1" : "miou";
    out << "best " << name << ' ' << fixed(r.best_metric) << " @ epoch " << r.best_epoch
        << "  last " << name << ' ' << fixed(r.last->selection_metric()) << '\n';
  } else {
    out << "done (no evaluation split)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string report;
  int batch_size = 8;
  bool swap = false;
};

LoadedModel open_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint '" + path + "' does not exist");
  try {
    return load_model(path);
  } catch (const CheckpointError& e) {
    throw UsageError(e.what());
  }
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  LoadedModel m = open_checkpoint(a.ckpt);
  const int n = m.model->config().num_classes;
  if (!fs::is_directory(a.data)) throw UsageError("data directory '" + a.data + "' does not exist");
  LoadedDataset ds;
  try {
    ds = load_dataset(a.data, 0);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
  if (ds.samples.empty()) throw UsageError("dataset '" + a.data + "' is empty");

  // Raw mask values decide whether the data fits the checkpoint's classes.
  std::set<int> values;
  for (const auto& s : ds.samples)
    for (auto v : s.mask.labels) values.insert(v);
  const int nonzero = static_cast<int>(values.size()) - (values.count(0) ? 1 : 0);
  if (n == 2 && nonzero > 1)
    throw UsageError("checkpoint predicts 2 classes but the masks hold " +
                     std::to_string(nonzero) + " distinct change labels");
  if (n > 2 && *values.rbegin() >= n)
    throw UsageError("checkpoint predicts " + std::to_string(n) + " classes but the masks hold label " +
                     std::to_string(*values.rbegin()));
  if (n == 2)
    for (auto& s : ds.samples)
      for (auto& v : s.mask.labels) v = v != 0;

  MetricsReport r = evaluate(*m.model, ds.samples, a.batch_size, a.swap);
  r.epoch = m.meta.epoch;
  const json j = to_json(r);
  if (!a.report.empty()) write_json(a.report, j);
  out << (n == 2 ? "f1 " : "miou ") << fixed(r.selection_metric()) << "  precision "
      << fixed(r.precision) << "  recall " << fixed(r.recall) << "  miou " << fixed(r.miou)
      << "  samples " << r.samples << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict / branches
// ---------------------------------------------------------------------------

constexpr std::array<std::array<float, 3>, 8> kPalette{{{0.0f, 0.0f, 0.0f},
                                                        {1.0f, 0.0f, 0.0f},
                                                        {0.0f, 1.0f, 0.0f},
                                                        {0.0f, 0.4f, 1.0f},
                                                        {1.0f, 1.0f, 0.0f},
                                                        {1.0f, 0.0f, 1.0f},
                                                        {0.0f, 1.0f, 1.0f},
                                                        {1.0f, 0.5f, 0.0f}}};

Image overlay(const Image& base, const LabelMap& mask) {
  Image o = base;
  for (int y = 0; y < base.h; ++y)
    for (int x = 0; x < base.w; ++x) {
      const int label = mask.labels[static_cast<std::size_t>(y) * base.w + x];
      if (label == 0) continue;
      const auto& color = kPalette[label % kPalette.size()];
      for (int c = 0; c < 3; ++c) o.at(c, y, x) = 0.5f * base.at(c, y, x) + 0.5f * color[c];
    }
  return o;
}

ChangeSample input_pair(const std::string& t0, const std::string& t1) {
  ChangeSample s;
  s.t0 = read_input_image(t0);
  s.t1 = read_input_image(t1);
  if (s.t0.h != s.t1.h || s.t0.w != s.t1.w)
    throw UsageError("t0 is " + std::to_string(s.t0.h) + "x" + std::to_string(s.t0.w) + " but t1 is " +
                     std::to_string(s.t1.h) + "x" + std::to_string(s.t1.w));
  try {
    check_backbone_input(Shape{1, 3, s.t0.h, s.t0.w});
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  s.mask = LabelMap{1, s.t0.h, s.t0.w, std::vector<std::uint8_t>(static_cast<std::size_t>(s.t0.h) * s.t0.w)};
  return s;
}

void write_mask(const fs::path& path, const LabelMap& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_gray(path, GrayImage{m.h, m.w, m.labels});
}

struct PredictArgs {
  std::string ckpt;
  std::string t0;
  std::string t1;
  std::string out;
  std::string overlay;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  LoadedModel m = open_checkpoint(a.ckpt);
  const std::vector<ChangeSample> pair{input_pair(a.t0, a.t1)};
  const LabelMap mask = predict_masks(*m.model, pair, 1)[0];
  write_mask(a.out, mask);
  if (!a.overlay.empty()) write_png_rgb(a.overlay, overlay(pair[0].t1, mask));
  std::size_t changed = 0;
  for (auto v : mask.labels) changed += v != 0;
  out << "change pixels " << changed << " / " << mask.labels.size() << '\n';
  return kExitOk;
}

struct BranchesArgs {
  std::string ckpt;
  std::string t0;
  std::string t1;
  std::string out;
  std::vector<std::string> only;
};

int cmd_branches(const BranchesArgs& a, std::ostream& out) {
  LoadedModel m = open_checkpoint(a.ckpt);
  const BranchConfig full = m.model->mtf().config();
  std::vector<Branch> wanted;
  for (auto b : {Branch::appear, Branch::disappear, Branch::exchange})
    if (full.enabled(b)) wanted.push_back(b);
  if (!a.only.empty()) {
    wanted.clear();
    for (const auto& name : a.only) {
      static const std::map<std::string, Branch> names{
          {"A", Branch::appear},    {"appear", Branch::appear},
          {"D", Branch::disappear}, {"disappear", Branch::disappear},
          {"E", Branch::exchange},  {"exchange", Branch::exchange}};
      const auto it = names.find(name);
      const std::optional<Branch> b =
          it == names.end() ? std::nullopt : std::optional<Branch>(it->second);
      if (!b) throw UsageError("unknown branch '" + name + "' (use A, D, E)");
      if (!full.enabled(*b))
        throw UsageError("branch '" + name + "' is not enabled in this model (" + full.str() + ")");
      wanted.push_back(*b);
    }
  }
  const std::vector<ChangeSample> pair{input_pair(a.t0, a.t1)};
  const fs::path dir = a.out;
  fs::create_directories(dir);
  for (Branch b : wanted) {
    BranchConfig active = full;
    active.appear = b == Branch::appear;
    active.disappear = b == Branch::disappear;
    active.exchange = b == Branch::exchange;
    const LabelMap mask = predict_masks(*m.model, pair, active, 1)[0];
    const std::string name(branch_name(b));
    write_mask(dir / (name + ".png"), mask);
    write_png_rgb(dir / (name + "_overlay.png"), overlay(pair[0].t1, mask));
    out << name << ".png\n";
  }
  const LabelMap mask = predict_masks(*m.model, pair, 1)[0];
  write_mask(dir / "full.png", mask);
  write_png_rgb(dir / "full_overlay.png", overlay(pair[0].t1, mask));
  out << "full.png\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string config;
  std::string sweep;
  std::string out;
  std::string data = "synth";
  std::optional<int> epochs;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = read_config(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.data != "synth") {
    if (!fs::is_directory(a.data)) throw UsageError("data directory '" + a.data + "' does not exist");
    cfg.train.data.path = a.data;
  }
  if (!fs::exists(a.sweep)) throw UsageError("sweep file '" + a.sweep + "' does not exist");
  std::vector<SweepVariant> sweep;
  try {
    std::ifstream in(a.sweep);
    sweep = parse_sweep(json::parse(in));
  } catch (const json::exception& e) {
    throw UsageError(std::string("sweep '") + a.sweep + "': " + e.what());
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  TrainHooks hooks;
  hooks.on_warning = [&](const std::string& w) { err << "warning: " << w << '\n'; };
  const auto rows = ablate(cfg, sweep, [&](const AblationRow& r) {
    out << r.name << ": ";
    if (!r.error.empty()) out << "error: " << r.error;
    else if (r.best && r.last) out << "last " << fixed(*r.last) << "  best " << fixed(*r.best);
    out << std::endl;
  }, hooks);
  write_ablation_csv(a.out, rows);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Change detection with temporal and spatial feature fusion", "c3po"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic dataset (t0/, t1/, mask/, manifest.json)");
  s->add_option("--config", synth.config, "Run config JSON (synth section is used)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of samples")->capture_default_str();
  s->add_option("--seed", synth.seed, "Generation seed")->capture_default_str();
  s->add_flag("--force", synth.force, "Overwrite a non-empty output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoints and log.csv");
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--data", tr.data, "Dataset directory, or 'synth' to generate from the config")
      ->capture_default_str();
  t->add_option("--test-data", tr.test_data, "Separate test dataset directory");
  t->add_option("--out", tr.out, "Checkpoint and log directory")->required();
  t->add_option("--epochs", tr.epochs, "Override train.epochs");
  t->add_option("--batch-size", tr.batch_size, "Override train.batch_size");
  t->add_option("--lr", tr.lr, "Override train.lr");
  t->add_option("--seed", tr.seed, "Override the model, shuffle and data seeds");
  t->add_flag("--resume", tr.resume, "Continue from <out>/last.ckpt");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--report", ev.report, "Write the metrics report JSON here");
  e->add_option("--batch-size", ev.batch_size, "Inference batch size")->capture_default_str();
  e->add_flag("--swap", ev.swap, "Evaluate on (t1, t0) pairs");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict a change mask for one image pair");
  p->add_option("--ckpt", pr.ckpt, "Checkpoint file")->required();
  p->add_option("--t0", pr.t0, "Image at time t0 (PNG)")->required();
  p->add_option("--t1", pr.t1, "Image at time t1 (PNG)")->required();
  p->add_option("--out", pr.out, "Output mask PNG (class indices)")->required();
  p->add_option("--overlay", pr.overlay, "Also write the mask blended over t1");

  BranchesArgs br;
  auto* b = app.add_subcommand("branches", "Write one mask per enabled change branch");
  b->add_option("--ckpt", br.ckpt, "Checkpoint file")->required();
  b->add_option("--t0", br.t0, "Image at time t0 (PNG)")->required();
  b->add_option("--t1", br.t1, "Image at time t1 (PNG)")->required();
  b->add_option("--out", br.out, "Output directory")->required();
  b->add_option("--only", br.only, "Restrict to these branches (A, D, E)")->delimiter(',');

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train every sweep variant and write a results table");
  a->add_option("--config", ab.config, "Base run config JSON");
  a->add_option("--sweep", ab.sweep, "Sweep JSON")->required();
  a->add_option("--out", ab.out, "Output CSV")->required();
  a->add_option("--data", ab.data, "Dataset directory, or 'synth'")->capture_default_str();
  a->add_option("--epochs", ab.epochs, "Override train.epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (e->parsed()) return cmd_eval(ev, out, err);
    if (p->parsed()) return cmd_predict(pr, out);
    if (b->parsed()) return cmd_branches(br, out);
    if (a->parsed()) return cmd_ablate(ab, out, err);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const ImageIoError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace c3po
