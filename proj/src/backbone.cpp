// SPDX-License-Identifier: Apache-2.0
#include "c3po/backbone.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

namespace c3po {
namespace {

/// Stem of two stride-2 3x3 convs (stride 4), then three stages whose first
/// conv has stride 2. ReLU after every conv. `depth` convs per stage.
template <typename T>
class ToyBackbone final : public Backbone<T> {
 public:
  ToyBackbone(const BackboneSpec& spec, int depth, ParamStore<T>& store, const std::string& prefix,
              Rng& rng)
      : widths_(spec.widths) {
    for (std::size_t i = 1; i < widths_.size(); ++i)
      if (widths_[i] < widths_[i - 1] || widths_[0] < 1)
        throw std::invalid_argument("backbone widths must be positive and non-decreasing");
    stages_.resize(4);
    stages_[0].push_back(make_conv(store, prefix + "stem.0", 3, widths_[0], 3, rng, true, 2));
    stages_[0].push_back(make_conv(store, prefix + "stem.1", widths_[0], widths_[0], 3, rng, true, 2));
    for (int s = 1; s < 4; ++s) {
      const std::string base = prefix + "stage" + std::to_string(s) + ".";
      stages_[s].push_back(make_conv(store, base + "0", widths_[s - 1], widths_[s], 3, rng, true, 2));
      for (int k = 1; k < depth; ++k)
        stages_[s].push_back(
            make_conv(store, base + std::to_string(k), widths_[s], widths_[s], 3, rng, true, 1));
    }
  }

  FeaturePyramid<T> encode(const Tensor<T>& image) const override {
    check_backbone_input(image.shape());
    FeaturePyramid<T> out;
    Tensor<T> x = image;
    for (const auto& stage : stages_) {
      for (const auto& conv : stage) x = relu(conv2d(x, conv));
      out.levels.push_back(x);
    }
    return out;
  }

  const std::array<int, 4>& widths() const override { return widths_; }

 private:
  std::array<int, 4> widths_;
  std::vector<std::vector<ConvParams<T>>> stages_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::pair<BackboneFactoryF, BackboneFactoryD>> entries;
};

template <int Depth>
std::pair<BackboneFactoryF, BackboneFactoryD> toy_factories() {
  return {[](const BackboneSpec& s, ParamStore<float>& p, const std::string& pre, Rng& r)
              -> std::unique_ptr<Backbone<float>> {
            return std::make_unique<ToyBackbone<float>>(s, Depth, p, pre, r);
          },
          [](const BackboneSpec& s, ParamStore<double>& p, const std::string& pre, Rng& r)
              -> std::unique_ptr<Backbone<double>> {
            return std::make_unique<ToyBackbone<double>>(s, Depth, p, pre, r);
          }};
}

Registry& registry() {
  static Registry r;
  static const bool seeded = [] {
    r.entries["toy"] = toy_factories<2>();
    r.entries["toy_deep"] = toy_factories<3>();
    return true;
  }();
  (void)seeded;
  return r;
}

}  // namespace

void check_backbone_input(const Shape& image) {
  if (image.c != 3) throw ShapeError("backbone expects 3-channel images, got " + image.str());
  if (image.h % 32 != 0 || image.w % 32 != 0) {
    const int ph = (32 - image.h % 32) % 32;
    const int pw = (32 - image.w % 32) % 32;
    throw ShapeError("image " + std::to_string(image.h) + "x" + std::to_string(image.w) +
                     " is not divisible by 32; pad by " + std::to_string(ph) + " rows and " +
                     std::to_string(pw) + " columns");
  }
}

void register_backbone(const std::string& name, BackboneFactoryF f32, BackboneFactoryD f64) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.entries[name] = {std::move(f32), std::move(f64)};
}

std::vector<std::string> backbone_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, f] : r.entries) names.push_back(name);
  return names;
}

template <typename T>
std::unique_ptr<Backbone<T>> make_backbone(const BackboneSpec& spec, ParamStore<T>& store,
                                           const std::string& prefix, Rng& rng) {
  auto& r = registry();
  std::pair<BackboneFactoryF, BackboneFactoryD> factories;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.entries.find(spec.name);
    if (it == r.entries.end()) throw std::invalid_argument("unknown backbone '" + spec.name + "'");
    factories = it->second;
  }
  if constexpr (std::is_same_v<T, float>)
    return factories.first(spec, store, prefix, rng);
  else
    return factories.second(spec, store, prefix, rng);
}

template <typename T>
SiameseEncoder<T>::SiameseEncoder(const BackboneSpec& spec, bool share_weights,
                                  ParamStore<T>& store, const std::string& prefix, Rng& rng) {
  if (share_weights) {
    first_ = make_backbone<T>(spec, store, prefix, rng);
  } else {
    first_ = make_backbone<T>(spec, store, prefix + "t0.", rng);
    second_ = make_backbone<T>(spec, store, prefix + "t1.", rng);
  }
}

template <typename T>
std::pair<FeaturePyramid<T>, FeaturePyramid<T>> SiameseEncoder<T>::encode_pair(
    const Tensor<T>& t0, const Tensor<T>& t1) const {
  if (t0.shape() != t1.shape()) throw shape_mismatch("encode_pair", t0.shape(), t1.shape());
  *calls_ += 2;
  const Backbone<T>& other = second_ ? *second_ : *first_;
  return {first_->encode(t0), other.encode(t1)};
}

template <typename T>
FeaturePyramid<T> SiameseEncoder<T>::encode(const Tensor<T>& image) const {
  *calls_ += 1;
  return first_->encode(image);
}

template std::unique_ptr<Backbone<float>> make_backbone(const BackboneSpec&, ParamStore<float>&,
                                                        const std::string&, Rng&);
template std::unique_ptr<Backbone<double>> make_backbone(const BackboneSpec&, ParamStore<double>&,
                                                         const std::string&, Rng&);
template class SiameseEncoder<float>;
template class SiameseEncoder<double>;

}  // namespace c3po
