// SPDX-License-Identifier: Apache-2.0
#include "c3po/msf.hpp"

#include <stdexcept>

namespace c3po {

template <typename T>
Msf<T>::Msf(const MsfSpec& spec, const std::array<int, 4>& pyramid_channels,
            ParamStore<T>& store, const std::string& prefix, Rng& rng)
    : spec_(spec), in_channels_(pyramid_channels) {
  if (spec_.levels < 1 || spec_.levels > 4)
    throw std::invalid_argument("msf levels must be in 1..4, got " + std::to_string(spec_.levels));
  if (spec_.lateral_channels < 1 || spec_.out_channels < 1)
    throw std::invalid_argument("msf channel widths must be positive");
  const int c = spec_.lateral_channels;
  for (int k = first_level(); k < 4; ++k) {
    const std::string base = prefix + "l" + std::to_string(k) + ".";
    lateral_.push_back(make_conv(store, base + "lateral", in_channels_[k], c, 1, rng));
    smooth_.push_back(make_conv(store, base + "smooth", c, c, 3, rng));
  }
  reduce_ = make_conv(store, prefix + "reduce", c * spec_.levels, spec_.out_channels, 1, rng);
}

template <typename T>
Tensor<T> Msf<T>::fuse(const FeaturePyramid<T>& pyramid) const {
  if (pyramid.size() != 4)
    throw ShapeError("MSF expects a 4-level pyramid, got " + std::to_string(pyramid.size()));
  const int first = first_level();
  const int used = spec_.levels;

  std::vector<Tensor<T>> merged(used);
  for (int i = used - 1; i >= 0; --i) {
    Tensor<T> lateral = conv2d(pyramid[first + i], lateral_[i]);
    merged[i] = (i == used - 1) ? lateral : add(lateral, upsample_bilinear(merged[i + 1], 2));
  }
  std::vector<Tensor<T>> gathered;
  for (int i = 0; i < used; ++i)
    gathered.push_back(upsample_pow2(conv2d(merged[i], smooth_[i]), 1 << i));
  return conv2d(concat_channels<T>(gathered), reduce_);
}

template class Msf<float>;
template class Msf<double>;

}  // namespace c3po
