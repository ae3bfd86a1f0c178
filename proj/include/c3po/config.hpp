// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "c3po/data.hpp"
#include "c3po/model.hpp"

namespace c3po {

/// Where training and test samples come from.
struct DataSpec {
  /// Dataset root in the pair_dirs layout; empty means synthetic data.
  std::string path;
  /// Optional separate test root; when empty a path dataset is split.
  std::string test_path;
  std::size_t train_count = 600;
  std::size_t test_count = 150;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  [[nodiscard]] bool synthetic() const { return path.empty(); }
  friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-4;
  bool eval_every_epoch = true;
  std::string checkpoint_dir;
  /// Bitwise-or of AugmentOp.
  unsigned augment = 0;
  std::uint64_t seed = 0;
  DataSpec data;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RunConfig {
  static constexpr int kVersion = 1;
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;

  /// Validates every section; throws std::invalid_argument.
  void validate() const;
};

/// Config problem. `line`/`column` are 1-based and 0 when not applicable.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line;
  std::size_t column;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const RunConfig& c);

/// Section parsers: missing keys keep defaults, unknown keys throw.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
SynthConfig synth_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Parses JSON text; syntax errors report line and column.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace c3po
