// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "c3po/ops.hpp"
#include "c3po/rng.hpp"

namespace c3po::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = true) {
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(s, std::move(v), requires_grad);
}

struct GradientSample {
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Analytic gradient of `loss()` with respect to `leaf` next to central
/// differences, at the listed indices. The leaf must be a live input of
/// `loss` (its data is perturbed in place).
template <typename T>
GradientSample sample_gradient(const std::function<Tensor<T>()>& loss, Tensor<T> leaf,
                               const std::vector<std::size_t>& indices, double h = 1e-6) {
  leaf.zero_grad();
  auto l = loss();
  backward(l);
  std::vector<T> grad(leaf.numel(), T(0));  // untouched leaves have zero gradient
  if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), grad.begin());
  auto data = leaf.mutable_data();
  GradientSample out;
  for (auto i : indices) {
    const T saved = data[i];
    data[i] = saved + static_cast<T>(h);
    const double up = loss().item();
    data[i] = saved - static_cast<T>(h);
    const double down = loss().item();
    data[i] = saved;
    out.analytic.push_back(grad[i]);
    out.numeric.push_back((up - down) / (2.0 * h));
  }
  return out;
}

/// Largest elementwise relative error, with a 1e-3 floor on the scale.
inline double max_relative_error(const GradientSample& g) {
  double worst = 0.0;
  for (std::size_t k = 0; k < g.analytic.size(); ++k) {
    const double a = g.analytic[k];
    const double n = g.numeric[k];
    worst = std::max(worst, std::abs(a - n) / std::max({1e-3, std::abs(a), std::abs(n)}));
  }
  return worst;
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline double norm_relative_error(const GradientSample& g) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < g.analytic.size(); ++k) {
    diff += (g.analytic[k] - g.numeric[k]) * (g.analytic[k] - g.numeric[k]);
    na += g.analytic[k] * g.analytic[k];
    nn += g.numeric[k] * g.numeric[k];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale > 0.0 ? std::sqrt(diff) / scale : 0.0;
}

template <typename T>
double gradcheck(const std::function<Tensor<T>()>& loss, Tensor<T> leaf,
                 const std::vector<std::size_t>& indices, double h = 1e-6) {
  return max_relative_error(sample_gradient(loss, leaf, indices, h));
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// Projects a tensor onto a fixed random direction so any op can feed a scalar.
template <typename T>
Tensor<T> project(const Tensor<T>& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  return weighted_sum(x, random_tensor<T>(x.shape(), rng, -1.0, 1.0, false));
}

}  // namespace c3po::testing
