// SPDX-License-Identifier: Apache-2.0
#include "c3po/head.hpp"

#include <algorithm>
#include <stdexcept>

namespace c3po {

std::string_view head_name(HeadKind k) { return k == HeadKind::fcn ? "fcn" : "aspp"; }

HeadKind parse_head(std::string_view name) {
  if (name == "fcn") return HeadKind::fcn;
  if (name == "aspp") return HeadKind::aspp;
  throw std::invalid_argument("unknown head '" + std::string(name) + "' (use fcn or aspp)");
}

template <typename T>
Head<T>::Head(const HeadSpec& spec, ParamStore<T>& store, const std::string& prefix, Rng& rng)
    : spec_(spec) {
  if (spec_.num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
  if (spec_.in_channels < 4) throw std::invalid_argument("head input must have >= 4 channels");
  const int hidden = spec_.in_channels / 4;
  if (spec_.kind == HeadKind::fcn) {
    fcn_hidden_ = make_conv(store, prefix + "fcn", spec_.in_channels, hidden, 3, rng);
  } else {
    aspp_branches_.push_back(make_conv(store, prefix + "aspp.b0", spec_.in_channels, hidden, 1, rng));
    for (std::size_t r = 0; r < spec_.atrous_rates.size(); ++r)
      aspp_branches_.push_back(make_conv(store, prefix + "aspp.b" + std::to_string(r + 1),
                                         spec_.in_channels, hidden, 3, rng, true, 1,
                                         spec_.atrous_rates[r], spec_.atrous_rates[r]));
    aspp_pool_ = make_conv(store, prefix + "aspp.pool", spec_.in_channels, hidden, 1, rng);
    aspp_project_ = make_conv(store, prefix + "aspp.project",
                              hidden * static_cast<int>(aspp_branches_.size() + 1), hidden, 1, rng);
  }
  classifier_ = make_conv(store, prefix + "classifier", hidden, spec_.num_classes, 1, rng);
}

template <typename T>
int Head<T>::effective_rate(int rate, int height, int width) {
  return std::clamp(rate, 1, std::max(1, std::min(height, width) - 1));
}

template <typename T>
Tensor<T> Head<T>::class_logits(const Tensor<T>& fused) const {
  const Shape& s = fused.shape();
  if (s.c != spec_.in_channels)
    throw ShapeError("head expects " + std::to_string(spec_.in_channels) + " channels, got " +
                     s.str());
  Tensor<T> hidden;
  if (spec_.kind == HeadKind::fcn) {
    hidden = relu(conv2d(fused, fcn_hidden_));
  } else {
    std::vector<Tensor<T>> parts;
    parts.push_back(relu(conv2d(fused, aspp_branches_[0])));
    for (std::size_t r = 1; r < aspp_branches_.size(); ++r) {
      ConvParams<T> p = aspp_branches_[r];
      p.dilation = p.padding = effective_rate(p.dilation, s.h, s.w);
      parts.push_back(relu(conv2d(fused, p)));
    }
    parts.push_back(broadcast_spatial(relu(conv2d(global_avg_pool(fused), aspp_pool_)), s.h, s.w));
    hidden = relu(conv2d(concat_channels<T>(parts), aspp_project_));
  }
  return conv2d(hidden, classifier_);
}

template <typename T>
Tensor<T> Head<T>::predict_logits(const Tensor<T>& fused, int feature_stride) const {
  return upsample_to_input(class_logits(fused), feature_stride);
}

template <typename T>
Tensor<T> upsample_to_input(const Tensor<T>& logits, int factor) {
  if (factor < 1 || factor > kMaxHeadUpsample || (factor & (factor - 1)) != 0)
    throw std::invalid_argument("head upsample factor " + std::to_string(factor) +
                                " is not a power of two in [1, " +
                                std::to_string(kMaxHeadUpsample) + "]; check msf levels");
  if (factor >= 4) return upsample_pow2(upsample_bilinear(logits, 4), factor / 4);
  return upsample_pow2(logits, factor);
}

template class Head<float>;
template class Head<double>;
template Tensor<float> upsample_to_input(const Tensor<float>&, int);
template Tensor<double> upsample_to_input(const Tensor<double>&, int);

}  // namespace c3po
