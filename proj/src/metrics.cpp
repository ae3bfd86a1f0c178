// SPDX-License-Identifier: Apache-2.0
#include "c3po/metrics.hpp"

#include <numeric>
#include <stdexcept>

namespace c3po {

ClassWeights class_weights_from_counts(std::span<const std::uint64_t> counts) {
  const auto n = counts.size();
  if (n < 2) throw std::invalid_argument("class weights need at least two classes");
  ClassWeights w;
  w.counts.assign(counts.begin(), counts.end());
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw std::invalid_argument("class weights: no labelled pixels");
  w.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.weights[i] = static_cast<double>(total - counts[i]) /
                   (static_cast<double>(n - 1) * static_cast<double>(total));
    if (counts[i] == 0)
      w.warnings.push_back("class " + std::to_string(i) +
                           " has no pixels in the training masks; weight " +
                           std::to_string(w.weights[i]));
  }
  return w;
}

ClassWeights compute_class_weights(std::span<const LabelMap> masks, int num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (const auto& m : masks) {
    for (auto label : m.labels) {
      if (label >= num_classes)
        throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                                std::to_string(num_classes - 1) + "]");
      ++counts[label];
    }
  }
  return class_weights_from_counts(counts);
}

std::vector<double> uniform_weights(int num_classes) {
  return std::vector<double>(num_classes, 1.0 / num_classes);
}

template <typename T>
Tensor<T> weighted_ce_loss(const Tensor<T>& logits, const LabelMap& labels,
                           const ClassWeights& weights, bool use_weights) {
  if (weights.num_classes() != logits.shape().c)
    throw ShapeError("loss: " + std::to_string(weights.num_classes()) + " class weights for " +
                     logits.shape().str() + " logits");
  if (use_weights) return softmax_cross_entropy(logits, labels, weights.weights);
  const auto uniform = uniform_weights(weights.num_classes());
  return softmax_cross_entropy(logits, labels, uniform);
}

template Tensor<float> weighted_ce_loss(const Tensor<float>&, const LabelMap&, const ClassWeights&,
                                        bool);
template Tensor<double> weighted_ce_loss(const Tensor<double>&, const LabelMap&,
                                         const ClassWeights&, bool);

ConfusionCounts& ConfusionCounts::merge(const ConfusionCounts& other) {
  if (classes.empty()) classes.resize(other.classes.size());
  if (other.classes.size() != classes.size())
    throw std::invalid_argument("merging confusion counts with different class counts");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    classes[i].tp += other.classes[i].tp;
    classes[i].fp += other.classes[i].fp;
    classes[i].fn += other.classes[i].fn;
    classes[i].tn += other.classes[i].tn;
  }
  return *this;
}

void accumulate_confusion(const LabelMap& pred, const LabelMap& gt, ConfusionCounts& counts) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w || pred.labels.size() != gt.labels.size())
    throw ShapeError("confusion: prediction (" + std::to_string(pred.n) + "," +
                     std::to_string(pred.h) + "," + std::to_string(pred.w) +
                     ") vs ground truth (" + std::to_string(gt.n) + "," + std::to_string(gt.h) +
                     "," + std::to_string(gt.w) + ")");
  const int n = counts.num_classes();
  // pixels[p][g] histogram, then expand to one-vs-rest counts.
  std::vector<std::uint64_t> joint(static_cast<std::size_t>(n) * n, 0);
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const int p = pred.labels[i];
    const int g = gt.labels[i];
    if (p >= n || g >= n) throw std::out_of_range("confusion: label outside class range");
    ++joint[static_cast<std::size_t>(p) * n + g];
  }
  const std::uint64_t total = pred.labels.size();
  for (int c = 0; c < n; ++c) {
    std::uint64_t tp = joint[static_cast<std::size_t>(c) * n + c];
    std::uint64_t predicted = 0;
    std::uint64_t actual = 0;
    for (int k = 0; k < n; ++k) {
      predicted += joint[static_cast<std::size_t>(c) * n + k];
      actual += joint[static_cast<std::size_t>(k) * n + c];
    }
    auto& cc = counts.classes[c];
    cc.tp += tp;
    cc.fp += predicted - tp;
    cc.fn += actual - tp;
    cc.tn += total - predicted - actual + tp;
  }
}

double precision(const ClassCounts& c) {
  if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ClassCounts& c) {
  if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1_score(const ClassCounts& c) {
  if (c.tp == 0) return (c.fp == 0 && c.fn == 0) ? 1.0 : 0.0;
  const double p = precision(c);
  const double r = recall(c);
  return 2.0 * p * r / (p + r);
}

double f1_score(const ConfusionCounts& counts, int class_id) {
  return f1_score(counts.classes.at(class_id));
}

double iou(const ClassCounts& c) {
  const std::uint64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double miou(const ConfusionCounts& counts) {
  if (counts.classes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : counts.classes) total += iou(c);
  return total / static_cast<double>(counts.classes.size());
}

SizeBin size_bin(double ratio) {
  if (ratio < 0.02) return SizeBin::small;
  if (ratio < 0.06) return SizeBin::medium;
  return SizeBin::large;
}

double change_ratio(const LabelMap& mask) {
  if (mask.labels.empty()) return 0.0;
  std::size_t changed = 0;
  for (auto v : mask.labels) changed += v != 0;
  return static_cast<double>(changed) / static_cast<double>(mask.labels.size());
}

Evaluator::Evaluator(int num_classes) : num_classes_(num_classes), total_(num_classes) {
  for (auto& b : bin_counts_) b = ConfusionCounts(num_classes);
}

void Evaluator::add(const LabelMap& pred, const LabelMap& gt) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w)
    throw ShapeError("evaluator: prediction and ground truth differ in shape");
  const std::size_t plane = static_cast<std::size_t>(gt.h) * gt.w;
  for (int n = 0; n < gt.n; ++n) {
    auto slice = [&](const LabelMap& m) {
      LabelMap one{1, m.h, m.w, {}};
      one.labels.assign(m.labels.begin() + n * plane, m.labels.begin() + (n + 1) * plane);
      return one;
    };
    const LabelMap p = slice(pred);
    const LabelMap g = slice(gt);
    ConfusionCounts c(num_classes_);
    accumulate_confusion(p, g, c);
    total_.merge(c);
    const auto bin = static_cast<std::size_t>(size_bin(change_ratio(g)));
    bin_counts_[bin].merge(c);
    ++bin_samples_[bin];
    ++samples_;
  }
}

MetricsReport make_report(const ConfusionCounts& counts, std::size_t samples) {
  MetricsReport r;
  r.num_classes = counts.num_classes();
  r.samples = samples;
  r.counts = counts;
  for (const auto& c : counts.classes) {
    r.class_precision.push_back(precision(c));
    r.class_recall.push_back(recall(c));
    r.class_f1.push_back(f1_score(c));
    r.class_iou.push_back(iou(c));
  }
  r.miou = miou(counts);
  if (r.num_classes == 2) {
    r.precision = r.class_precision[1];
    r.recall = r.class_recall[1];
    r.f1 = r.class_f1[1];
  } else {
    const double k = r.num_classes - 1;
    for (int c = 1; c < r.num_classes; ++c) {
      r.precision += r.class_precision[c] / k;
      r.recall += r.class_recall[c] / k;
      r.f1 += r.class_f1[c] / k;
    }
  }
  return r;
}

MetricsReport Evaluator::report() const {
  MetricsReport r = make_report(total_, samples_);
  if (num_classes_ == 2) {
    std::array<BinReport, 3> bins;
    for (std::size_t b = 0; b < 3; ++b) {
      bins[b].count = bin_samples_[b];
      bins[b].counts = bin_counts_[b].classes[1];
      if (bin_samples_[b] > 0) bins[b].f1 = f1_score(bin_counts_[b].classes[1]);
    }
    r.bins = bins;
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["miou"] = r.miou;
  j["samples"] = r.samples;
  j["num_classes"] = r.num_classes;
  j["epoch"] = r.epoch ? nlohmann::json(*r.epoch) : nlohmann::json(nullptr);
  j["per_class"] = {{"precision", r.class_precision},
                    {"recall", r.class_recall},
                    {"f1", r.class_f1},
                    {"iou", r.class_iou}};
  if (r.bins) {
    nlohmann::json bins;
    const char* names[] = {"small", "medium", "large"};
    for (std::size_t b = 0; b < 3; ++b) {
      nlohmann::json entry{{"count", (*r.bins)[b].count}};
      if ((*r.bins)[b].f1) entry["f1"] = *(*r.bins)[b].f1;
      bins[names[b]] = entry;
    }
    j["bins"] = bins;
  }
  return j;
}

bool BestLastTracker::update(int epoch, const MetricsReport& report) {
  last_ = report;
  last_epoch_ = epoch;
  const double metric = report.selection_metric();
  if (metric > best_metric_) {
    best_ = report;
    best_epoch_ = epoch;
    best_metric_ = metric;
    return true;
  }
  return false;
}

void BestLastTracker::restore(int epoch, double metric) {
  best_.reset();
  best_epoch_ = epoch;
  best_metric_ = metric;
}

const MetricsReport& BestLastTracker::best() const {
  if (!best_) throw std::logic_error("no best epoch recorded in this session");
  return *best_;
}

const MetricsReport& BestLastTracker::last() const {
  if (!last_) throw std::logic_error("no epoch recorded");
  return *last_;
}

}  // namespace c3po
