// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "c3po/backbone.hpp"
#include "c3po/ops.hpp"
#include "c3po/params.hpp"

namespace c3po {

enum class Branch { info, appear, disappear, exchange };

[[nodiscard]] std::string_view branch_name(Branch b);

/// Which temporal-fusion branches are active, and which convs are shared.
/// Textual form uses the letters I, A, D, E joined by '+', in any order.
struct BranchConfig {
  bool info = true;
  bool appear = true;
  bool disappear = true;
  bool exchange = true;
  bool share_change_conv = true;
  bool share_info_conv = true;

  /// Parses "I+A+D+E", "D", "E+I", ... Throws std::invalid_argument on an
  /// empty set, unknown letters or repeats.
  static BranchConfig parse(std::string_view text);
  /// Canonical I+A+D+E ordering.
  [[nodiscard]] std::string str() const;

  [[nodiscard]] bool enabled(Branch b) const;
  [[nodiscard]] bool any() const { return info || appear || disappear || exchange; }
  /// True when every branch enabled here is enabled in `other`.
  [[nodiscard]] bool subset_of(const BranchConfig& other) const;
  /// Output unchanged when f0 and f1 are swapped.
  [[nodiscard]] bool symmetric() const { return share_info_conv && share_change_conv; }

  friend bool operator==(const BranchConfig&, const BranchConfig&) = default;
};

/// Merges two temporal pyramids level by level:
///   appear    = conv_change(relu(f1 - f0))
///   disappear = conv_change(relu(f0 - f1))
///   exchange  = conv_exchange(max(f0, f1) - min(f0, f1))
///   info      = conv_info(f0) + conv_info(f1)
/// summed as info + (appear + disappear) + exchange. Every conv is 3x3 and
/// maps C -> C; the difference convs have no bias, so equal inputs make
/// those branches exactly zero.
template <typename T>
class Mtf {
 public:
  Mtf(const BranchConfig& config, std::vector<int> level_channels, ParamStore<T>& store,
      const std::string& prefix, Rng& rng);

  [[nodiscard]] FeaturePyramid<T> fuse(const FeaturePyramid<T>& f0,
                                       const FeaturePyramid<T>& f1) const;
  /// Fuses with a subset of the configured branches switched on.
  [[nodiscard]] FeaturePyramid<T> fuse(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1,
                                       const BranchConfig& active) const;
  /// One branch's post-conv contribution. Throws if the branch is disabled.
  [[nodiscard]] FeaturePyramid<T> branch_activation(const FeaturePyramid<T>& f0,
                                                    const FeaturePyramid<T>& f1, Branch b) const;
  /// The input to the branch conv (for info: f0 and f1 concatenated along channels).
  [[nodiscard]] FeaturePyramid<T> pre_conv(const FeaturePyramid<T>& f0,
                                           const FeaturePyramid<T>& f1, Branch b) const;

  [[nodiscard]] const BranchConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<int>& level_channels() const { return channels_; }

 private:
  struct Level {
    ConvParams<T> appear;     // shared with disappear when share_change_conv
    ConvParams<T> disappear;
    ConvParams<T> exchange;
    ConvParams<T> info0;      // shared with info1 when share_info_conv
    ConvParams<T> info1;
  };

  void check_pair(const FeaturePyramid<T>& f0, const FeaturePyramid<T>& f1) const;
  [[nodiscard]] Tensor<T> branch_level(const Level& p, const Tensor<T>& a, const Tensor<T>& b,
                                       Branch branch) const;
  [[nodiscard]] Tensor<T> fuse_level(const Level& p, const Tensor<T>& a, const Tensor<T>& b,
                                     const BranchConfig& active) const;

  BranchConfig config_;
  std::vector<int> channels_;
  std::vector<Level> levels_;
};

extern template class Mtf<float>;
extern template class Mtf<double>;

}  // namespace c3po
