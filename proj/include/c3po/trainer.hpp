// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "c3po/config.hpp"
#include "c3po/data.hpp"
#include "c3po/metrics.hpp"
#include "c3po/model.hpp"
#include "c3po/optim.hpp"

namespace c3po {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  /// Test-split metrics; absent when evaluation was skipped for the epoch.
  std::optional<MetricsReport> report;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_metric = -1.0;
  std::optional<MetricsReport> best;
  std::optional<MetricsReport> last;
};

struct TrainHooks {
  /// Called after every epoch (after checkpoints are written).
  std::function<void(const EpochLog&)> on_epoch;
  /// Free-form warnings (class weights, resume notes).
  std::function<void(const std::string&)> on_warning;
};

/// Checkpoint metadata stored next to the tensor file as <ckpt>.json.
struct CheckpointMeta {
  ModelConfig model;
  int epoch = 0;
  std::size_t step = 0;
  int best_epoch = 0;
  double best_metric = -1.0;
  /// Report of the epoch the checkpoint was written at (null if none).
  nlohmann::json report;
};

std::filesystem::path sidecar_path(const std::filesystem::path& ckpt);
void write_sidecar(const std::filesystem::path& ckpt, const CheckpointMeta& meta);
CheckpointMeta read_sidecar(const std::filesystem::path& ckpt);

/// Saves parameters (and optimizer moments when `adam` is given) plus the sidecar.
void save_model(const std::filesystem::path& ckpt, const ChangeNet<float>& model,
                const CheckpointMeta& meta, const Adam<float>* adam = nullptr);

struct LoadedModel {
  std::unique_ptr<ChangeNet<float>> model;
  CheckpointMeta meta;
  NamedTensors entries;
};

/// Builds the network from the sidecar config and loads its parameters.
LoadedModel load_model(const std::filesystem::path& ckpt);

/// Runs the optimisation loop. When `tc.checkpoint_dir` is set, last.ckpt is
/// written every epoch, best.ckpt whenever the selection metric improves,
/// and one CSV row per epoch is appended to log.csv. With `resume`, training
/// continues from last.ckpt in that directory.
TrainResult train(ChangeNet<float>& model, const std::vector<ChangeSample>& train_set,
                  const std::vector<ChangeSample>& test_set, const TrainConfig& tc,
                  bool resume = false, const TrainHooks& hooks = {});

/// Predicted masks for every sample, in order (no parameter mutation).
std::vector<LabelMap> predict_masks(const ChangeNet<float>& model,
                                    const std::vector<ChangeSample>& samples, int batch_size = 8,
                                    bool swap_pair = false);

/// Same, with only `active` MTF branches on.
std::vector<LabelMap> predict_masks(const ChangeNet<float>& model,
                                    const std::vector<ChangeSample>& samples,
                                    const BranchConfig& active, int batch_size = 8,
                                    bool swap_pair = false);

MetricsReport evaluate(const ChangeNet<float>& model, const std::vector<ChangeSample>& samples,
                       int batch_size = 8, bool swap_pair = false);

/// Report over precomputed predictions.
MetricsReport evaluate_masks(const std::vector<LabelMap>& predictions,
                             const std::vector<ChangeSample>& samples, int num_classes);

/// Training and test samples for a run config (synthetic or on disk).
struct RunData {
  std::vector<ChangeSample> train;
  std::vector<ChangeSample> test;
  std::vector<std::string> warnings;
};
RunData prepare_data(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------

/// One sweep variant: a label plus a JSON merge patch applied to the base
/// run config ({"model": {...}, "train": {...}, "synth": {...}}). Variants
/// that patch "synth" or "train.data" get their own data; the rest share
/// the base config's samples.
struct SweepVariant {
  std::string name;
  nlohmann::json patch;
};

/// Parses {"variants": [{"name": ..., "model": {...}, ...}, ...]} or one of
/// the single-key shorthands {"branches": [...]}, {"fusion": [...]},
/// {"msf_levels": [...]}, {"head": [...]}, {"use_weighted_loss": [...]}.
std::vector<SweepVariant> parse_sweep(const nlohmann::json& j);

struct AblationRow {
  std::string name;
  std::string config;  // compact JSON of the variant's model section
  std::optional<double> best;
  std::optional<int> best_epoch;
  std::optional<double> last;
  std::string error;
};

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<SweepVariant>& sweep,
                                const std::function<void(const AblationRow&)>& on_row = {},
                                const TrainHooks& hooks = {});

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

}  // namespace c3po
