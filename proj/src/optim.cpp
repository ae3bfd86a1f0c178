// SPDX-License-Identifier: Apache-2.0
#include "c3po/optim.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace c3po {

double cosine_lr(double base_lr, double position) {
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * position));
}

template <typename T>
Adam<T>::Adam(const ParamStore<T>& params, AdamOptions options)
    : params_(params.entries()), options_(options) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.numel(), T(0));
    v_.emplace_back(t.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double schedule_position) {
  if (schedule_position < 0.0 || schedule_position > 1.0)
    throw std::invalid_argument("Adam::step: schedule position outside [0, 1]");
  for (const auto& [name, t] : params_)
    if (!t.has_grad()) throw std::logic_error("Adam::step: parameter '" + name + "' has no gradient");

  ++steps_;
  const double lr = cosine_lr(options_.lr, schedule_position);
  last_lr_ = lr;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& param = params_[k].second;
    auto w = param.mutable_data();
    auto g = param.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + options_.eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> Adam<T>::state() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& [name, t] = params_[k];
    out.emplace_back("adam.m." + name, Tensor<T>(t.shape(), m_[k]));
    out.emplace_back("adam.v." + name, Tensor<T>(t.shape(), v_[k]));
  }
  return out;
}

template <typename T>
void Adam<T>::load_state(const std::vector<std::pair<std::string, Tensor<T>>>& state,
                         std::int64_t steps) {
  std::map<std::string, const Tensor<T>*> by_name;
  for (const auto& [name, t] : state) by_name[name] = &t;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& [name, t] = params_[k];
    for (auto [prefix, buf] : {std::pair{std::string("adam.m."), &m_[k]}, std::pair{std::string("adam.v."), &v_[k]}}) {
      auto it = by_name.find(prefix + name);
      if (it == by_name.end()) throw std::runtime_error("optimizer state missing " + prefix + name);
      if (it->second->shape() != t.shape())
        throw shape_mismatch(std::string("optimizer state ") + prefix + name, it->second->shape(), t.shape());
      auto d = it->second->data();
      buf->assign(d.begin(), d.end());
    }
  }
  steps_ = steps;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace c3po
