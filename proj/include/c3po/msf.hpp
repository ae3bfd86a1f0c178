// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "c3po/backbone.hpp"
#include "c3po/params.hpp"

namespace c3po {

struct MsfSpec {
  int levels = 4;             // how many pyramid levels, counted from the coarsest
  int lateral_channels = 256;
  int out_channels = 512;
};

/// FPN-style top-down merge of a four-level pyramid into one map at the
/// finest used stride.
///
/// Uses the top `levels` entries (levels = 1 keeps only stride 32). Each used
/// level gets a 1x1 lateral conv; coarser accumulations are 2x bilinear
/// upsampled and added to the next finer lateral; every level is smoothed by
/// a 3x3 conv; all smoothed maps are upsampled to the finest used level,
/// concatenated finest-first and reduced by a 1x1 conv. All convs carry bias
/// and no activation.
template <typename T>
class Msf {
 public:
  Msf(const MsfSpec& spec, const std::array<int, 4>& pyramid_channels, ParamStore<T>& store,
      const std::string& prefix, Rng& rng);

  [[nodiscard]] Tensor<T> fuse(const FeaturePyramid<T>& pyramid) const;

  /// Stride of the output relative to the input image (4, 8, 16 or 32).
  [[nodiscard]] int output_stride() const { return kPyramidStrides[first_level()]; }
  [[nodiscard]] int out_channels() const { return spec_.out_channels; }
  [[nodiscard]] const MsfSpec& spec() const { return spec_; }

 private:
  [[nodiscard]] int first_level() const { return 4 - spec_.levels; }

  MsfSpec spec_;
  std::array<int, 4> in_channels_;
  std::vector<ConvParams<T>> lateral_;  // indexed by used level, finest first
  std::vector<ConvParams<T>> smooth_;
  ConvParams<T> reduce_;
};

extern template class Msf<float>;
extern template class Msf<double>;

}  // namespace c3po
