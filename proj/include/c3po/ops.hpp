// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "c3po/tensor.hpp"

namespace c3po {

/// Convolution weights plus geometry. `bias` may be undefined (no bias term).
template <typename T>
struct ConvParams {
  Tensor<T> weight;  // (out_ch, in_ch, k, k), k in {1, 3}
  Tensor<T> bias;    // (1, out_ch, 1, 1) or undefined
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// Output extent along one axis: floor((in + 2p - d(k-1) - 1)/s) + 1.
int conv_output_size(int in, int kernel, int stride, int padding, int dilation = 1);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& params);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
/// Gradient goes to the larger operand; ties go to `a`.
template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);
/// Gradient goes to the smaller operand; ties go to `a`.
template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);

/// Bilinear upsampling with half-pixel centres (align_corners = false).
/// `factor` must be 2 or 4.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor);
/// Repeated 2x bilinear steps; `factor` is a power of two (1 is a no-op).
template <typename T>
Tensor<T> upsample_pow2(const Tensor<T>& x, int factor);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count);

/// Mean over spatial positions, (N,C,H,W) -> (N,C,1,1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
/// Repeats a (N,C,1,1) tensor over an HxW grid.
template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& x, int height, int width);

/// Sum of all elements.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
/// sum(x * coeffs) with constant coefficients of the same shape.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& coeffs);

/// Integer label map, N x H x W, row-major.
struct LabelMap {
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> labels;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(n) * h * w; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Pixel-averaged class-weighted negative log-likelihood of softmax(logits).
/// Per pixel: -w[y] * log p_y. `weights` has one entry per channel.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels,
                                std::span<const double> weights);

/// Channel softmax, no gradient tracking.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

/// Per-pixel argmax over channels; ties resolve to the lower class index.
template <typename T>
LabelMap argmax_channels(const Tensor<T>& logits);

}  // namespace c3po
