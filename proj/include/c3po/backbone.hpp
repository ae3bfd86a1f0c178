// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "c3po/ops.hpp"
#include "c3po/params.hpp"
#include "c3po/tensor.hpp"

namespace c3po {

/// Encoder activations, finest first. For a backbone these are the maps at
/// strides 4, 8, 16, 32; other fusion positions use single-level pyramids.
template <typename T>
struct FeaturePyramid {
  std::vector<Tensor<T>> levels;

  [[nodiscard]] std::size_t size() const { return levels.size(); }
  const Tensor<T>& operator[](std::size_t i) const { return levels[i]; }
};

inline constexpr std::array<int, 4> kPyramidStrides{4, 8, 16, 32};

struct BackboneSpec {
  std::string name = "toy";
  std::array<int, 4> widths{32, 64, 128, 256};
};

/// Hierarchical image encoder honouring the four-level pyramid contract.
template <typename T>
class Backbone {
 public:
  virtual ~Backbone() = default;

  /// (N,3,H,W) with H, W divisible by 32 -> pyramid at strides 4..32.
  [[nodiscard]] virtual FeaturePyramid<T> encode(const Tensor<T>& image) const = 0;
  [[nodiscard]] virtual const std::array<int, 4>& widths() const = 0;
};

using BackboneFactoryF = std::function<std::unique_ptr<Backbone<float>>(
    const BackboneSpec&, ParamStore<float>&, const std::string&, Rng&)>;
using BackboneFactoryD = std::function<std::unique_ptr<Backbone<double>>(
    const BackboneSpec&, ParamStore<double>&, const std::string&, Rng&)>;

/// Builds a registered backbone ("toy", "toy_deep", or anything added with
/// `register_backbone`). Throws std::invalid_argument for unknown names.
template <typename T>
std::unique_ptr<Backbone<T>> make_backbone(const BackboneSpec& spec, ParamStore<T>& store,
                                           const std::string& prefix, Rng& rng);

void register_backbone(const std::string& name, BackboneFactoryF f32, BackboneFactoryD f64);
[[nodiscard]] std::vector<std::string> backbone_names();

/// Rejects images whose sides are not multiples of 32.
void check_backbone_input(const Shape& image);

/// One or two encoders for the temporal pair.
template <typename T>
class SiameseEncoder {
 public:
  SiameseEncoder(const BackboneSpec& spec, bool share_weights, ParamStore<T>& store,
                 const std::string& prefix, Rng& rng);

  [[nodiscard]] std::pair<FeaturePyramid<T>, FeaturePyramid<T>> encode_pair(
      const Tensor<T>& t0, const Tensor<T>& t1) const;
  /// Single-stream encode with the t0 encoder.
  [[nodiscard]] FeaturePyramid<T> encode(const Tensor<T>& image) const;

  [[nodiscard]] bool shared() const { return second_ == nullptr; }
  [[nodiscard]] const std::array<int, 4>& widths() const { return first_->widths(); }
  /// Number of single-image encoder invocations so far.
  [[nodiscard]] long calls() const { return *calls_; }

 private:
  std::unique_ptr<Backbone<T>> first_;
  std::unique_ptr<Backbone<T>> second_;
  std::shared_ptr<long> calls_ = std::make_shared<long>(0);
};

extern template class SiameseEncoder<float>;
extern template class SiameseEncoder<double>;

}  // namespace c3po
