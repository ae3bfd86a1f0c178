// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3po/ops.hpp"
#include "c3po/rng.hpp"
#include "c3po/tensor.hpp"

namespace c3po {

/// Named trainable leaves in registration order.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    value.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, value);
    return value;
  }

  [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }
  [[nodiscard]] Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }
  [[nodiscard]] const std::vector<std::pair<std::string, Tensor<T>>>& entries() const {
    return entries_;
  }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& [name, t] : entries_) total += t.numel();
    return total;
  }
  void zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// He-uniform (fan-in) conv weights; `with_bias` adds a zero bias.
template <typename T>
ConvParams<T> make_conv(ParamStore<T>& store, const std::string& name, int in_ch, int out_ch,
                        int kernel, Rng& rng, bool with_bias = true, int stride = 1,
                        int padding = -1, int dilation = 1) {
  const Shape ws{out_ch, in_ch, kernel, kernel};
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_ch) * kernel * kernel));
  std::vector<T> w(ws.numel());
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  ConvParams<T> p;
  p.weight = store.add(name + ".weight", Tensor<T>(ws, std::move(w)));
  if (with_bias) p.bias = store.add(name + ".bias", Tensor<T>(Shape{1, out_ch, 1, 1}));
  p.stride = stride;
  p.padding = padding < 0 ? dilation * (kernel / 2) : padding;
  p.dilation = dilation;
  return p;
}

}  // namespace c3po
