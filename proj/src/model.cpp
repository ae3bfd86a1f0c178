// SPDX-License-Identifier: Apache-2.0
#include "c3po/model.hpp"

#include <map>
#include <stdexcept>

namespace c3po {

std::string_view fusion_name(FusionPosition p) {
  switch (p) {
    case FusionPosition::input: return "input";
    case FusionPosition::post_backbone: return "post_backbone";
    case FusionPosition::post_msf: return "post_msf";
    case FusionPosition::post_head: return "post_head";
  }
  return "?";
}

FusionPosition parse_fusion(std::string_view name) {
  for (auto p : {FusionPosition::input, FusionPosition::post_backbone, FusionPosition::post_msf,
                 FusionPosition::post_head})
    if (fusion_name(p) == name) return p;
  throw std::invalid_argument("unknown fusion position '" + std::string(name) +
                              "' (use input, post_backbone, post_msf, post_head)");
}

BranchConfig ModelConfig::branch_config() const {
  BranchConfig b = BranchConfig::parse(branches);
  b.share_change_conv = share_change_conv;
  b.share_info_conv = share_info_conv;
  return b;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& stage, const std::string& what) {
    throw std::invalid_argument(stage + ": " + what);
  };
  try {
    (void)branch_config();
  } catch (const std::invalid_argument& e) {
    fail("mtf", e.what());
  }
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (widths[i] < 1 || (i > 0 && widths[i] < widths[i - 1]))
      fail("backbone", "widths must be positive and non-decreasing");
  if (msf_levels < 1 || msf_levels > 4) fail("msf", "levels must be in 1..4");
  if (msf_channels < 1) fail("msf", "msf_channels must be positive");
  if (fused_channels < 4) fail("head", "fused_channels must be at least 4");
  if (num_classes < 2) fail("head", "num_classes must be at least 2");
  if (num_classes > 255) fail("head", "num_classes must fit in an 8-bit mask");
}

template <typename T>
ChangeNet<T>::ChangeNet(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const BranchConfig branches = config_.branch_config();
  encoder_ = std::make_unique<SiameseEncoder<T>>(BackboneSpec{config_.backbone, config_.widths},
                                                 config_.share_backbone, params_, "backbone.", rng);
  std::vector<int> mtf_channels;
  switch (config_.fusion) {
    case FusionPosition::input: mtf_channels = {3}; break;
    case FusionPosition::post_backbone:
      // Only the levels the spatial fusion reads, coarsest msf_levels of them.
      mtf_channels.assign(config_.widths.end() - config_.msf_levels, config_.widths.end());
      break;
    case FusionPosition::post_msf: mtf_channels = {config_.fused_channels}; break;
    case FusionPosition::post_head: mtf_channels = {config_.num_classes}; break;
  }
  mtf_ = std::make_unique<Mtf<T>>(branches, mtf_channels, params_, "mtf.", rng);
  msf_ = std::make_unique<Msf<T>>(
      MsfSpec{config_.msf_levels, config_.msf_channels, config_.fused_channels}, config_.widths,
      params_, "msf.", rng);
  head_ = std::make_unique<Head<T>>(
      HeadSpec{config_.head, config_.fused_channels, config_.num_classes}, params_, "head.", rng);
}

template <typename T>
Tensor<T> ChangeNet<T>::forward(const Tensor<T>& t0, const Tensor<T>& t1) const {
  return forward(t0, t1, mtf_->config());
}

template <typename T>
Tensor<T> ChangeNet<T>::forward(const Tensor<T>& t0, const Tensor<T>& t1,
                                const BranchConfig& active) const {
  if (t0.shape() != t1.shape()) throw shape_mismatch("ChangeNet::forward", t0.shape(), t1.shape());
  check_backbone_input(t0.shape());
  const int stride = msf_->output_stride();
  switch (config_.fusion) {
    case FusionPosition::input: {
      FeaturePyramid<T> fused = mtf_->fuse({{t0}}, {{t1}}, active);
      return head_->predict_logits(msf_->fuse(encoder_->encode(fused[0])), stride);
    }
    case FusionPosition::post_backbone: {
      auto [f0, f1] = encoder_->encode_pair(t0, t1);
      const auto skip = static_cast<std::ptrdiff_t>(4 - config_.msf_levels);
      FeaturePyramid<T> used0, used1;
      used0.levels.assign(f0.levels.begin() + skip, f0.levels.end());
      used1.levels.assign(f1.levels.begin() + skip, f1.levels.end());
      FeaturePyramid<T> fused;
      fused.levels.resize(static_cast<std::size_t>(skip));  // unread by the spatial fusion
      for (auto& level : mtf_->fuse(used0, used1, active).levels) fused.levels.push_back(level);
      return head_->predict_logits(msf_->fuse(fused), stride);
    }
    case FusionPosition::post_msf: {
      auto [f0, f1] = encoder_->encode_pair(t0, t1);
      FeaturePyramid<T> fused = mtf_->fuse({{msf_->fuse(f0)}}, {{msf_->fuse(f1)}}, active);
      return head_->predict_logits(fused[0], stride);
    }
    case FusionPosition::post_head: {
      auto [f0, f1] = encoder_->encode_pair(t0, t1);
      FeaturePyramid<T> fused = mtf_->fuse({{head_->class_logits(msf_->fuse(f0))}},
                                           {{head_->class_logits(msf_->fuse(f1))}}, active);
      return upsample_to_input(fused[0], stride);
    }
  }
  throw std::logic_error("unreachable");
}

template <typename T>
std::vector<std::string> load_parameters(ParamStore<T>& params, const NamedTensors& entries) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : entries) {
    if (name.starts_with("adam.")) continue;
    if (!params.contains(name)) throw CheckpointError("checkpoint entry '" + name + "' is not a model parameter");
    by_name[name] = &t;
  }
  std::vector<std::string> missing;
  for (auto& [name, p] : params.entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      if (!name.starts_with("mtf.")) throw CheckpointError("checkpoint lacks parameter '" + name + "'");
      missing.push_back(name);
      continue;
    }
    if (it->second->shape() != p.shape())
      throw CheckpointError("parameter '" + name + "': checkpoint shape " +
                            it->second->shape().str() + " vs model " + p.shape().str());
    auto src = it->second->data();
    Tensor<T> target = p;
    auto dst = target.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
  return missing;
}

template class ChangeNet<float>;
template class ChangeNet<double>;
template std::vector<std::string> load_parameters(ParamStore<float>&, const NamedTensors&);
template std::vector<std::string> load_parameters(ParamStore<double>&, const NamedTensors&);

}  // namespace c3po
