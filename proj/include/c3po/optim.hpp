// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "c3po/params.hpp"
#include "c3po/tensor.hpp"

namespace c3po {

/// base_lr * 0.5 * (1 + cos(pi * position)), position in [0, 1].
double cosine_lr(double base_lr, double position);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction, stepping every parameter of a store.
template <typename T>
class Adam {
 public:
  Adam(const ParamStore<T>& params, AdamOptions options);

  /// One update at the given point of the cosine schedule. Every parameter
  /// must carry a gradient.
  void step(double schedule_position);

  [[nodiscard]] std::int64_t steps() const { return steps_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }
  [[nodiscard]] double last_lr() const { return last_lr_; }

  /// Moment buffers keyed "adam.m.<param>" / "adam.v.<param>".
  [[nodiscard]] std::vector<std::pair<std::string, Tensor<T>>> state() const;
  void load_state(const std::vector<std::pair<std::string, Tensor<T>>>& state,
                  std::int64_t steps);

 private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
  double last_lr_ = 0.0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace c3po
