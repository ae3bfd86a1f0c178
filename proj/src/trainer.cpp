// SPDX-License-Identifier: Apache-2.0
#include "c3po/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "c3po/rng.hpp"

namespace c3po {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

fs::path sidecar_path(const fs::path& ckpt) { return fs::path(ckpt.string() + ".json"); }

void write_sidecar(const fs::path& ckpt, const CheckpointMeta& meta) {
  const json j{{"version", 1},
               {"model", to_json(meta.model)},
               {"epoch", meta.epoch},
               {"step", meta.step},
               {"best_epoch", meta.best_epoch},
               {"best_metric", meta.best_metric},
               {"report", meta.report}};
  const fs::path path = sidecar_path(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
}

CheckpointMeta read_sidecar(const fs::path& ckpt) {
  const fs::path path = sidecar_path(ckpt);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint sidecar '" + path.string() + "' is missing");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("cannot parse '" + path.string() + "': " + e.what());
  }
  try {
    CheckpointMeta meta;
    meta.model = model_config_from_json(j.at("model"));
    meta.epoch = j.at("epoch").get<int>();
    meta.step = j.at("step").get<std::size_t>();
    meta.best_epoch = j.value("best_epoch", 0);
    meta.best_metric = j.value("best_metric", -1.0);
    meta.report = j.value("report", json());
    return meta;
  } catch (const std::exception& e) {
    throw CheckpointError("malformed sidecar '" + path.string() + "': " + e.what());
  }
}

void save_model(const fs::path& ckpt, const ChangeNet<float>& model, const CheckpointMeta& meta,
                const Adam<float>* adam) {
  NamedTensors entries = model.params().entries();
  if (adam)
    for (auto& e : adam->state()) entries.push_back(e);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  // Write to a temporary name first so an interrupted run never leaves a
  // truncated last.ckpt behind.
  const fs::path tmp = ckpt.string() + ".tmp";
  save_checkpoint(tmp, entries);
  write_sidecar(ckpt, meta);
  fs::rename(tmp, ckpt);
}

LoadedModel load_model(const fs::path& ckpt) {
  LoadedModel out;
  out.meta = read_sidecar(ckpt);
  out.entries = load_checkpoint(ckpt);
  out.model = std::make_unique<ChangeNet<float>>(out.meta.model);
  load_parameters(out.model->params(), out.entries);
  return out;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

namespace {

std::vector<LabelMap> run_predictions(const ChangeNet<float>& model,
                                      const std::vector<ChangeSample>& samples,
                                      const BranchConfig* active, int batch_size, bool swap_pair) {
  NoGradGuard no_grad;
  std::vector<LabelMap> out;
  out.reserve(samples.size());
  const std::size_t bs = static_cast<std::size_t>(std::max(batch_size, 1));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    idx.resize(std::min(bs, samples.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch<float> batch = make_batch<float>(samples, idx, swap_pair);
    const Tensor<float> logits =
        active ? model.forward(batch.t0, batch.t1, *active) : model.forward(batch.t0, batch.t1);
    const LabelMap pred = argmax_channels(logits);
    const std::size_t plane = static_cast<std::size_t>(pred.h) * pred.w;
    for (int i = 0; i < pred.n; ++i) {
      LabelMap one{1, pred.h, pred.w, {}};
      one.labels.assign(pred.labels.begin() + i * plane, pred.labels.begin() + (i + 1) * plane);
      out.push_back(std::move(one));
    }
  }
  return out;
}

}  // namespace

std::vector<LabelMap> predict_masks(const ChangeNet<float>& model,
                                    const std::vector<ChangeSample>& samples, int batch_size,
                                    bool swap_pair) {
  return run_predictions(model, samples, nullptr, batch_size, swap_pair);
}

std::vector<LabelMap> predict_masks(const ChangeNet<float>& model,
                                    const std::vector<ChangeSample>& samples,
                                    const BranchConfig& active, int batch_size, bool swap_pair) {
  return run_predictions(model, samples, &active, batch_size, swap_pair);
}

MetricsReport evaluate_masks(const std::vector<LabelMap>& predictions,
                             const std::vector<ChangeSample>& samples, int num_classes) {
  if (predictions.size() != samples.size())
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(samples.size()) + " samples");
  Evaluator ev(num_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) ev.add(predictions[i], samples[i].mask);
  return ev.report();
}

MetricsReport evaluate(const ChangeNet<float>& model, const std::vector<ChangeSample>& samples,
                       int batch_size, bool swap_pair) {
  return evaluate_masks(predict_masks(model, samples, batch_size, swap_pair), samples,
                        model.config().num_classes);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void append_log(const fs::path& path, const EpochLog& e, int num_classes, bool fresh) {
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw TrainError("cannot write '" + path.string() + "'");
  if (fresh)
    out << "epoch,loss," << (num_classes == 2 ? "f1_change" : "miou") << ",precision,recall,lr\n";
  out << e.epoch << ',' << fmt(e.loss) << ',';
  if (e.report)
    out << fmt(e.report->selection_metric()) << ',' << fmt(e.report->precision) << ','
        << fmt(e.report->recall);
  else
    out << ",,";
  out << ',' << fmt(e.lr) << '\n';
  if (!out) throw TrainError("cannot write '" + path.string() + "'");
}

}  // namespace

TrainResult train(ChangeNet<float>& model, const std::vector<ChangeSample>& train_set,
                  const std::vector<ChangeSample>& test_set, const TrainConfig& tc, bool resume,
                  const TrainHooks& hooks) {
  tc.validate();
  if (train_set.empty()) throw std::invalid_argument("train: the training set is empty");
  const ModelConfig& mc = model.config();
  auto warn = [&](const std::string& msg) {
    if (hooks.on_warning) hooks.on_warning(msg);
  };

  std::vector<LabelMap> masks;
  masks.reserve(train_set.size());
  for (const auto& s : train_set) masks.push_back(s.mask);
  const ClassWeights weights = compute_class_weights(masks, mc.num_classes);
  for (const auto& w : weights.warnings) warn(w);

  Adam<float> adam(model.params(), AdamOptions{tc.lr});
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  const std::size_t total_steps = batches * static_cast<std::size_t>(tc.epochs);

  const bool write = !tc.checkpoint_dir.empty();
  const fs::path dir = tc.checkpoint_dir;
  const fs::path last_path = dir / "last.ckpt";
  const fs::path best_path = dir / "best.ckpt";
  const fs::path log_path = dir / "log.csv";

  TrainResult result;
  int start_epoch = 1;
  std::size_t step = 0;
  if (resume) {
    if (!write) throw std::invalid_argument("train: resume needs a checkpoint directory");
    const CheckpointMeta meta = read_sidecar(last_path);
    if (!(meta.model == mc))
      throw TrainError("resume: last.ckpt was written for a different model config");
    const NamedTensors entries = load_checkpoint(last_path);
    if (!load_parameters(model.params(), entries).empty())
      throw TrainError("resume: last.ckpt lacks MTF parameters");
    std::vector<std::pair<std::string, Tensor<float>>> state;
    for (const auto& e : entries)
      if (e.first.starts_with("adam.")) state.push_back(e);
    adam.load_state(state, static_cast<std::int64_t>(meta.step));
    start_epoch = meta.epoch + 1;
    step = meta.step;
    result.best_epoch = meta.best_epoch;
    result.best_metric = meta.best_metric;
    if (start_epoch > tc.epochs) warn("resume: last.ckpt already covers every epoch");
  } else if (write) {
    fs::create_directories(dir);
  }

  for (int epoch = start_epoch; epoch <= tc.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const std::uint64_t aug_seed = derive_seed(tc.seed ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    std::vector<ChangeSample> augmented;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * bs;
      const std::size_t end = std::min(n, begin + bs);
      std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
      Batch<float> batch;
      if (tc.augment != 0) {
        augmented.clear();
        for (auto i : idx) augmented.push_back(augment(train_set[i], tc.augment, derive_seed(aug_seed, i)));
        std::vector<std::size_t> local(idx.size());
        std::iota(local.begin(), local.end(), 0);
        batch = make_batch<float>(augmented, local);
      } else {
        batch = make_batch<float>(train_set, idx);
      }
      model.params().zero_grad();
      const Tensor<float> logits = model.forward(batch.t0, batch.t1);
      const Tensor<float> loss = weighted_ce_loss(logits, batch.mask, weights, mc.use_weighted_loss);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(b));
      backward(loss);
      adam.step(static_cast<double>(step) / static_cast<double>(total_steps));
      ++step;
      loss_sum += value * static_cast<double>(end - begin);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(n);
    entry.lr = adam.last_lr();
    if ((tc.eval_every_epoch || epoch == tc.epochs) && !test_set.empty()) {
      entry.report = evaluate(model, test_set, tc.batch_size);
      entry.report->epoch = epoch;
    }

    bool improved = false;
    if (entry.report) {
      result.last = entry.report;
      const double metric = entry.report->selection_metric();
      if (metric > result.best_metric) {
        result.best_metric = metric;
        result.best_epoch = epoch;
        result.best = entry.report;
        improved = true;
      }
    }

    if (write) {
      CheckpointMeta meta{mc, epoch, step, result.best_epoch, result.best_metric,
                          entry.report ? to_json(*entry.report) : json()};
      try {
        save_model(last_path, model, meta, &adam);
        if (improved) save_model(best_path, model, meta);
      } catch (const std::exception& e) {
        throw TrainError(std::string("checkpoint write failed: ") + e.what());
      }
      append_log(log_path, entry, mc.num_classes, !resume && epoch == 1);
    }
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

RunData prepare_data(const RunConfig& cfg) {
  RunData out;
  const DataSpec& d = cfg.train.data;
  if (d.synthetic()) {
    out.train = synth_generate(cfg.synth, derive_seed(d.seed, 1), d.train_count);
    out.test = synth_generate(cfg.synth, derive_seed(d.seed, 2), d.test_count);
    return out;
  }
  LoadedDataset all = load_dataset(d.path, cfg.model.num_classes);
  out.warnings = std::move(all.warnings);
  if (!d.test_path.empty()) {
    out.train = std::move(all.samples);
    LoadedDataset test = load_dataset(d.test_path, cfg.model.num_classes);
    out.test = std::move(test.samples);
    out.warnings.insert(out.warnings.end(), test.warnings.begin(), test.warnings.end());
  } else if (all.samples.size() >= 2) {
    Split s = split(std::move(all.samples), d.train_fraction, d.seed);
    out.train = std::move(s.train);
    out.test = std::move(s.test);
  } else {
    out.train = std::move(all.samples);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

std::vector<SweepVariant> parse_sweep(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep must be a JSON object");
  std::vector<SweepVariant> out;
  if (auto it = j.find("variants"); it != j.end()) {
    if (j.size() != 1) throw ConfigError("sweep: 'variants' cannot be combined with other keys");
    if (!it->is_array()) throw ConfigError("sweep: 'variants' must be an array");
    for (const auto& v : *it) {
      if (!v.is_object() || !v.contains("name") || !v["name"].is_string())
        throw ConfigError("sweep: every variant needs a string 'name'");
      SweepVariant sv{v["name"].get<std::string>(), json::object()};
      for (const auto& [key, value] : v.items()) {
        if (key == "name") continue;
        if (key != "model" && key != "train" && key != "synth")
          throw ConfigError("sweep: unknown variant key '" + key + "'");
        sv.patch[key] = value;
      }
      out.push_back(std::move(sv));
    }
    return out;
  }
  if (j.size() != 1)
    throw ConfigError("sweep: expected 'variants' or exactly one shorthand key");
  const auto& [key, values] = *j.items().begin();
  static const std::set<std::string> shorthands{"branches", "fusion", "msf_levels", "head",
                                                "use_weighted_loss"};
  if (!shorthands.count(key)) throw ConfigError("sweep: unknown shorthand key '" + key + "'");
  if (!values.is_array()) throw ConfigError("sweep: '" + key + "' must be an array");
  for (const auto& v : values) {
    std::string name = v.is_string() ? v.get<std::string>() : key + "=" + v.dump();
    out.push_back(SweepVariant{name, json{{"model", json{{key, v}}}}});
  }
  return out;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<SweepVariant>& sweep,
                                const std::function<void(const AblationRow&)>& on_row,
                                const TrainHooks& hooks) {
  std::vector<AblationRow> rows;
  std::optional<RunData> shared;
  const json base_json = to_json(base);
  for (const auto& variant : sweep) {
    AblationRow row;
    row.name = variant.name;
    try {
      json merged = base_json;
      merged.merge_patch(variant.patch);
      row.config = merged["model"].dump();
      const RunConfig cfg = run_config_from_json(merged);
      const bool own_data =
          variant.patch.contains("synth") ||
          (variant.patch.contains("train") && variant.patch["train"].contains("data"));
      RunData own;
      if (own_data) {
        own = prepare_data(cfg);
      } else if (!shared) {
        shared = prepare_data(base);
      }
      const RunData& data = own_data ? own : *shared;
      ChangeNet<float> model(cfg.model);
      TrainConfig tc = cfg.train;
      if (!tc.checkpoint_dir.empty()) tc.checkpoint_dir = (fs::path(tc.checkpoint_dir) / row.name).string();
      tc.eval_every_epoch = true;
      const TrainResult r = train(model, data.train, data.test, tc, false, hooks);
      if (r.best) {
        row.best = r.best_metric;
        row.best_epoch = r.best_epoch;
      }
      if (r.last) row.last = r.last->selection_metric();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "variant,last,best,best_epoch,error,config\n";
  for (const auto& r : rows) {
    out << quote(r.name) << ',' << (r.last ? fmt(*r.last) : "") << ','
        << (r.best ? fmt(*r.best) : "") << ',' << (r.best_epoch ? std::to_string(*r.best_epoch) : "")
        << ',' << quote(r.error) << ',' << quote(r.config) << '\n';
  }
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace c3po
