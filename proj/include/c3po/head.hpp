// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "c3po/ops.hpp"
#include "c3po/params.hpp"

namespace c3po {

enum class HeadKind { fcn, aspp };

[[nodiscard]] std::string_view head_name(HeadKind k);
[[nodiscard]] HeadKind parse_head(std::string_view name);

struct HeadSpec {
  HeadKind kind = HeadKind::fcn;
  int in_channels = 512;
  int num_classes = 2;
  std::array<int, 3> atrous_rates{6, 12, 18};
};

/// Largest upsampling from feature stride to input resolution that the head
/// accepts.
inline constexpr int kMaxHeadUpsample = 32;

/// Segmentation head over the fused map. FCN: 3x3 conv to in/4 channels,
/// ReLU, 1x1 conv to N classes. ASPP: a 1x1 branch, three dilated 3x3
/// branches and an image-pooling branch, each to in/4 channels with ReLU,
/// concatenated, 1x1 + ReLU, then 1x1 to N classes.
template <typename T>
class Head {
 public:
  Head(const HeadSpec& spec, ParamStore<T>& store, const std::string& prefix, Rng& rng);

  /// Class scores at the feature resolution.
  [[nodiscard]] Tensor<T> class_logits(const Tensor<T>& fused) const;
  /// Class scores bilinearly upsampled by `feature_stride` to full
  /// resolution. Softmax is left to the loss / argmax.
  [[nodiscard]] Tensor<T> predict_logits(const Tensor<T>& fused, int feature_stride) const;

  [[nodiscard]] const HeadSpec& spec() const { return spec_; }
  /// Rate actually used for a map of the given size.
  [[nodiscard]] static int effective_rate(int rate, int height, int width);

 private:
  HeadSpec spec_;
  ConvParams<T> fcn_hidden_;
  std::vector<ConvParams<T>> aspp_branches_;  // 1x1, then one per rate
  ConvParams<T> aspp_pool_;
  ConvParams<T> aspp_project_;
  ConvParams<T> classifier_;
};

/// Upsamples class scores by a power-of-two factor in [1, 32]: a single 4x
/// step when the factor allows, then 2x steps.
template <typename T>
Tensor<T> upsample_to_input(const Tensor<T>& logits, int factor);

/// Per-pixel argmax class map; ties go to the lower class index.
template <typename T>
LabelMap predict_mask(const Tensor<T>& logits) {
  return argmax_channels(logits);
}

extern template class Head<float>;
extern template class Head<double>;

}  // namespace c3po
