// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "c3po/image_io.hpp"
#include "c3po/ops.hpp"
#include "c3po/tensor.hpp"

namespace c3po {

enum class ChangeType : std::uint8_t { appear = 0, disappear = 1, exchange = 2 };
enum class ShapeKind : std::uint8_t { rect = 0, disc = 1, triangle = 2 };

[[nodiscard]] std::string_view change_type_name(ChangeType t);
[[nodiscard]] ChangeType parse_change_type(std::string_view name);
[[nodiscard]] std::string_view shape_kind_name(ShapeKind k);
[[nodiscard]] ShapeKind parse_shape_kind(std::string_view name);

/// One co-registered image pair and its label mask.
struct ChangeSample {
  std::string name;
  Image t0;
  Image t1;
  LabelMap mask;  // n = 1
  /// Bit i set when a change of ChangeType(i) was rendered.
  std::uint8_t change_types = 0;

  [[nodiscard]] bool has(ChangeType t) const {
    return (change_types >> static_cast<int>(t)) & 1u;
  }
};

struct SynthConfig {
  int image_size = 96;
  /// Unchanged objects drawn into both images.
  int min_distractors = 1;
  int max_distractors = 3;
  /// Changed objects per sample.
  int min_changes = 1;
  int max_changes = 3;
  /// Object half-extent in pixels.
  int min_object_size = 6;
  int max_object_size = 14;
  std::vector<ShapeKind> shapes{ShapeKind::rect, ShapeKind::disc, ShapeKind::triangle};
  /// Sampling probability per change type (appear, disappear, exchange).
  /// Types with probability 0 never occur.
  std::array<double, 3> change_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::uint64_t background_seed = 17;
  /// Amplitude of the background texture relative to its base colour.
  double texture_amplitude = 0.25;
  /// Independent per-image brightness, contrast and colour gain amplitude.
  double jitter = 0.06;
  /// Per-pixel Gaussian sensor noise.
  double noise_sigma = 0.03;
  /// Maximum global offset in pixels between t0 and t1 (uniform in each axis).
  int misregistration = 1;
  /// Fraction of changed objects whose mask region is left unannotated.
  double annotation_noise = 0.0;
  /// Labels 1 + ChangeType index instead of a single change label.
  bool multiclass = false;

  [[nodiscard]] int num_classes() const { return multiclass ? 4 : 2; }
  /// Throws std::invalid_argument describing the first violated rule.
  void validate() const;
  /// Copy restricted to a single change type.
  [[nodiscard]] SynthConfig only(ChangeType t) const;
};

/// Deterministic in (cfg, seed): sample i uses sub-seed derive_seed(seed, i).
std::vector<ChangeSample> synth_generate(const SynthConfig& cfg, std::uint64_t seed,
                                         std::size_t count);
ChangeSample synth_sample(const SynthConfig& cfg, std::uint64_t sub_seed, std::string name);

struct LoadedDataset {
  std::vector<ChangeSample> samples;
  std::vector<std::string> warnings;
};

enum class DatasetLayout { pair_dirs };

/// Reads root/{t0,t1,mask}/<name>.png in lexicographic order. With
/// num_classes == 2 any nonzero mask pixel becomes 1; with more classes raw
/// values are kept and must be < num_classes; with num_classes <= 0 raw
/// values are returned unchecked. Throws ImageIoError on unreadable
/// files and std::invalid_argument when the root layout is missing.
LoadedDataset load_dataset(const std::filesystem::path& root, int num_classes,
                           DatasetLayout layout = DatasetLayout::pair_dirs);

/// Writes a sample into the pair_dirs layout.
void save_sample(const std::filesystem::path& root, const ChangeSample& sample);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

enum AugmentOp : unsigned { kRot90s = 1u, kHflip = 2u, kColorJitter = 4u };

/// Quarter turns counter-clockwise, applied to t0, t1 and mask together.
ChangeSample rotate90(const ChangeSample& s, int quarter_turns);
ChangeSample hflip(const ChangeSample& s);
/// Independent brightness/contrast/gain jitter per image; mask untouched.
ChangeSample color_jitter(const ChangeSample& s, double amplitude, std::uint64_t seed);

/// Random combination of the enabled ops (bitwise-or of AugmentOp).
ChangeSample augment(const ChangeSample& s, unsigned ops, std::uint64_t seed,
                     double jitter_amplitude = 0.1);

// ---------------------------------------------------------------------------
// Splits and batches
// ---------------------------------------------------------------------------

struct Split {
  std::vector<ChangeSample> train;
  std::vector<ChangeSample> test;
};

/// Seeded shuffle, ceil(fraction * n) samples go to train.
Split split(std::vector<ChangeSample> samples, double train_fraction, std::uint64_t seed);

template <typename T>
struct Batch {
  Tensor<T> t0;
  Tensor<T> t1;
  LabelMap mask;
};

/// Stacks the given samples (all the same size) into (N,3,H,W) tensors.
template <typename T>
Batch<T> make_batch(const std::vector<ChangeSample>& samples, std::span<const std::size_t> indices,
                    bool swap_pair = false);

Tensor<float> image_tensor(const Image& img);
Image tensor_image(const Tensor<float>& t, int n = 0);

}  // namespace c3po
