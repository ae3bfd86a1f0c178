// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "c3po/ops.hpp"

namespace c3po {

// ---------------------------------------------------------------------------
// Class balance
// ---------------------------------------------------------------------------

/// w_i = (sum_j n_j - n_i) / ((N - 1) * sum_j n_j). Weights sum to one.
struct ClassWeights {
  std::vector<std::uint64_t> counts;
  std::vector<double> weights;
  std::vector<std::string> warnings;

  [[nodiscard]] int num_classes() const { return static_cast<int>(counts.size()); }
};

ClassWeights class_weights_from_counts(std::span<const std::uint64_t> counts);

/// Per-class pixel totals over a set of masks, then the balance weights.
/// Throws std::out_of_range on labels >= num_classes.
ClassWeights compute_class_weights(std::span<const LabelMap> masks, int num_classes);

/// Uniform 1/N weights.
std::vector<double> uniform_weights(int num_classes);

/// Weighted cross-entropy. With `use_weights` false every class gets 1/N.
template <typename T>
Tensor<T> weighted_ce_loss(const Tensor<T>& logits, const LabelMap& labels,
                           const ClassWeights& weights, bool use_weights);

// ---------------------------------------------------------------------------
// Confusion counting
// ---------------------------------------------------------------------------

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  [[nodiscard]] std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// One-vs-rest counts for every class. Merging is associative and
/// commutative, so per-worker counts can be combined in any order.
struct ConfusionCounts {
  std::vector<ClassCounts> classes;

  ConfusionCounts() = default;
  explicit ConfusionCounts(int num_classes) : classes(num_classes) {}

  [[nodiscard]] int num_classes() const { return static_cast<int>(classes.size()); }
  ConfusionCounts& merge(const ConfusionCounts& other);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Adds every pixel of (pred, gt). Throws ShapeError on mismatched maps.
void accumulate_confusion(const LabelMap& pred, const LabelMap& gt, ConfusionCounts& counts);

/// TP/(TP+FP); with nothing predicted: 1 if nothing was there either, else 0.
double precision(const ClassCounts& c);
/// TP/(TP+FN); with nothing present: 1 if nothing was predicted either, else 0.
double recall(const ClassCounts& c);
/// 2PR/(P+R); 0 when TP = 0 and FP + FN > 0; 1 when TP = FP = FN = 0.
double f1_score(const ClassCounts& c);
double f1_score(const ConfusionCounts& counts, int class_id);
/// TP/(TP+FP+FN); 1 when the class is absent from both prediction and truth.
double iou(const ClassCounts& c);
double miou(const ConfusionCounts& counts);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class SizeBin { small, medium, large };

/// Change-area ratio bins: [0, 2%) small, [2%, 6%) medium, [6%, 1] large.
SizeBin size_bin(double change_ratio);
/// Fraction of non-background pixels in one mask.
double change_ratio(const LabelMap& mask);

struct BinReport {
  std::size_t count = 0;
  std::optional<double> f1;  // absent when the bin is empty
  ClassCounts counts;
};

struct MetricsReport {
  int num_classes = 2;
  std::size_t samples = 0;
  std::optional<int> epoch;
  /// Headline numbers: the change class for binary tasks, the mean over the
  /// non-background classes otherwise.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double miou = 0.0;
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
  std::vector<double> class_iou;
  /// Binary tasks only: small, medium, large.
  std::optional<std::array<BinReport, 3>> bins;
  ConfusionCounts counts;

  /// Change F1 for binary tasks, mIoU otherwise.
  [[nodiscard]] double selection_metric() const { return num_classes == 2 ? f1 : miou; }
};

/// Accumulates predictions sample by sample into a report.
class Evaluator {
 public:
  explicit Evaluator(int num_classes);

  /// `pred` and `gt` may hold several samples (n > 1); each is binned
  /// separately by its own change ratio.
  void add(const LabelMap& pred, const LabelMap& gt);
  [[nodiscard]] MetricsReport report() const;

 private:
  int num_classes_;
  std::size_t samples_ = 0;
  ConfusionCounts total_;
  std::array<ConfusionCounts, 3> bin_counts_;
  std::array<std::size_t, 3> bin_samples_{};
};

/// Report from aggregate counts alone (no size bins).
MetricsReport make_report(const ConfusionCounts& counts, std::size_t samples);

nlohmann::json to_json(const MetricsReport& r);

// ---------------------------------------------------------------------------
// Best / last tracking
// ---------------------------------------------------------------------------

/// Keeps the best epoch by selection metric (earlier epoch wins ties) and
/// the most recent one.
class BestLastTracker {
 public:
  /// Returns true when this epoch became the new best.
  bool update(int epoch, const MetricsReport& report);

  [[nodiscard]] bool empty() const { return !last_.has_value(); }
  [[nodiscard]] int best_epoch() const { return best_epoch_; }
  [[nodiscard]] const MetricsReport& best() const;
  [[nodiscard]] const MetricsReport& last() const;
  [[nodiscard]] int last_epoch() const { return last_epoch_; }

  /// Restores a tracker whose best so far was `metric` at `epoch`.
  void restore(int epoch, double metric);
  [[nodiscard]] double best_metric() const { return best_metric_; }

 private:
  std::optional<MetricsReport> best_;
  std::optional<MetricsReport> last_;
  int best_epoch_ = 0;
  int last_epoch_ = 0;
  double best_metric_ = -1.0;
};

}  // namespace c3po
