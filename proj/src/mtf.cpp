// SPDX-License-Identifier: Apache-2.0
#include "c3po/mtf.hpp"

#include <stdexcept>

namespace c3po {

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::info: return "info";
    case Branch::appear: return "appear";
    case Branch::disappear: return "disappear";
    case Branch::exchange: return "exchange";
  }
  return "?";
}

BranchConfig BranchConfig::parse(std::string_view text) {
  BranchConfig c;
  c.info = c.appear = c.disappear = c.exchange = false;
  bool expect_letter = true;
  for (char ch : text) {
    if (ch == ' ') continue;
    if (ch == '+') {
      if (expect_letter) throw std::invalid_argument("malformed branch set '" + std::string(text) + "'");
      expect_letter = true;
      continue;
    }
    if (!expect_letter) throw std::invalid_argument("malformed branch set '" + std::string(text) + "'");
    bool* flag = nullptr;
    switch (ch) {
      case 'I': case 'i': flag = &c.info; break;
      case 'A': case 'a': flag = &c.appear; break;
      case 'D': case 'd': flag = &c.disappear; break;
      case 'E': case 'e': flag = &c.exchange; break;
      default:
        throw std::invalid_argument("unknown branch '" + std::string(1, ch) + "' in '" +
                                    std::string(text) + "' (use I, A, D, E)");
    }
    if (*flag) throw std::invalid_argument("branch repeated in '" + std::string(text) + "'");
    *flag = true;
    expect_letter = false;
  }
  if (expect_letter && c.any())
    throw std::invalid_argument("malformed branch set '" + std::string(text) + "'");
  if (!c.any()) throw std::invalid_argument("branch set must not be empty");
  return c;
}

std::string BranchConfig::str() const {
  std::string out;
  auto put = [&](bool on, char letter) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += letter;
  };
  put(info, 'I');
  put(appear, 'A');
  put(disappear, 'D');
  put(exchange, 'E');
  return out;
}

bool BranchConfig::enabled(Branch b) const {
  switch (b) {
    case Branch::info: return info;
    case Branch::appear: return appear;
    case Branch::disappear: return disappear;
    case Branch::exchange: return exchange;
  }
  return false;
}

bool BranchConfig::subset_of(const BranchConfig& other) const {
  return (!info || other.info) && (!appear || other.appear) && (!disappear || other.disappear) &&
         (!exchange || other.exchange);
}

template <typename T>
Mtf<T>::Mtf(const BranchConfig& config, std::vector<int> level_channels, ParamStore<T>& store,
            const std::string& prefix, Rng& rng)
    : config_(config), channels_(std::move(level_channels)) {
  if (!config_.any()) throw std::invalid_argument("MTF needs at least one branch");
  for (std::size_t k = 0; k < channels_.size(); ++k) {
    const int c = channels_[k];
    const std::string base = prefix + "l" + std::to_string(k) + ".";
    Level level;
    if (config_.appear || config_.disappear) {
      if (config_.share_change_conv) {
        level.appear = make_conv(store, base + "change", c, c, 3, rng, false);
        level.disappear = level.appear;
      } else {
        if (config_.appear) level.appear = make_conv(store, base + "appear", c, c, 3, rng, false);
        if (config_.disappear)
          level.disappear = make_conv(store, base + "disappear", c, c, 3, rng, false);
      }
    }
    if (config_.exchange) level.exchange = make_conv(store, base + "exchange", c, c, 3, rng, false);
    if (config_.info) {
      if (config_.share_info_conv) {
        level.info0 = make_conv(store, base + "info", c, c, 3, rng, true);
        level.info1 = level.info0;
      } else {
        level.info0 = make_conv(store, base + "info0", c, c, 3, rng, true);
        level.info1 = make_conv(store, base + "info1", c, c, 3, rng, true);
      }
    }
    levels_.push_back(std::move(level));
  }
}

template <typename T>
void Mtf<T>::check_pair(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1) const {
  if (f0.size() != levels_.size() || f1.size() != levels_.size())
    throw ShapeError("MTF configured for " + std::to_string(levels_.size()) +
                     " levels, got pyramids of " + std::to_string(f0.size()) + " and " +
                     std::to_string(f1.size()));
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (f0[k].shape() != f1[k].shape())
      throw shape_mismatch("MTF level " + std::to_string(k), f0[k].shape(), f1[k].shape());
    if (f0[k].shape().c != channels_[k])
      throw ShapeError("MTF level " + std::to_string(k) + " expects " +
                       std::to_string(channels_[k]) + " channels, got " + f0[k].shape().str());
  }
}

template <typename T>
Tensor<T> Mtf<T>::branch_level(const Level& p, const Tensor<T>& a, const Tensor<T>& b,
                               Branch branch) const {
  switch (branch) {
    case Branch::appear: return conv2d(relu(sub(b, a)), p.appear);
    case Branch::disappear: return conv2d(relu(sub(a, b)), p.disappear);
    case Branch::exchange: return conv2d(sub(maximum(a, b), minimum(a, b)), p.exchange);
    case Branch::info: return add(conv2d(a, p.info0), conv2d(b, p.info1));
  }
  throw std::logic_error("unreachable");
}

template <typename T>
Tensor<T> Mtf<T>::fuse_level(const Level& p, const Tensor<T>& a, const Tensor<T>& b,
                             const BranchConfig& active) const {
  Tensor<T> out;
  auto accumulate = [&out](const Tensor<T>& t) { out = out.defined() ? add(out, t) : t; };
  if (active.info) accumulate(branch_level(p, a, b, Branch::info));
  // Appear and disappear are summed first so that swapping the inputs only
  // swaps the operands of a commutative add.
  if (active.appear && active.disappear)
    accumulate(add(branch_level(p, a, b, Branch::appear), branch_level(p, a, b, Branch::disappear)));
  else if (active.appear)
    accumulate(branch_level(p, a, b, Branch::appear));
  else if (active.disappear)
    accumulate(branch_level(p, a, b, Branch::disappear));
  if (active.exchange) accumulate(branch_level(p, a, b, Branch::exchange));
  return out;
}

template <typename T>
FeaturePyramid<T> Mtf<T>::fuse(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1) const {
  return fuse(f0, f1, config_);
}

template <typename T>
FeaturePyramid<T> Mtf<T>::fuse(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1,
                               const BranchConfig& active) const {
  if (!active.any()) throw std::invalid_argument("MTF needs at least one active branch");
  if (!active.subset_of(config_))
    throw std::invalid_argument("branches " + active.str() + " not all enabled in " + config_.str());
  check_pair(f0, f1);
  FeaturePyramid<T> out;
  for (std::size_t k = 0; k < levels_.size(); ++k)
    out.levels.push_back(fuse_level(levels_[k], f0[k], f1[k], active));
  return out;
}

template <typename T>
FeaturePyramid<T> Mtf<T>::branch_activation(const FeaturePyramid<T>& f0,
                                            const FeaturePyramid<T>& f1, Branch b) const {
  if (!config_.enabled(b))
    throw std::invalid_argument(std::string(branch_name(b)) + " branch is disabled in " +
                                config_.str());
  check_pair(f0, f1);
  FeaturePyramid<T> out;
  for (std::size_t k = 0; k < levels_.size(); ++k)
    out.levels.push_back(branch_level(levels_[k], f0[k], f1[k], b));
  return out;
}

template <typename T>
FeaturePyramid<T> Mtf<T>::pre_conv(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1,
                                   Branch b) const {
  check_pair(f0, f1);
  FeaturePyramid<T> out;
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const auto& a = f0[k];
    const auto& c = f1[k];
    switch (b) {
      case Branch::appear: out.levels.push_back(relu(sub(c, a))); break;
      case Branch::disappear: out.levels.push_back(relu(sub(a, c))); break;
      case Branch::exchange: out.levels.push_back(sub(maximum(a, c), minimum(a, c))); break;
      case Branch::info: {
        std::vector<Tensor<T>> both{a, c};
        out.levels.push_back(concat_channels<T>(both));
        break;
      }
    }
  }
  return out;
}

template class Mtf<float>;
template class Mtf<double>;

}  // namespace c3po
