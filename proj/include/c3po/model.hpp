// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "c3po/backbone.hpp"
#include "c3po/checkpoint.hpp"
#include "c3po/head.hpp"
#include "c3po/msf.hpp"
#include "c3po/mtf.hpp"

namespace c3po {

/// Where the two temporal streams are merged.
enum class FusionPosition {
  input,          // MTF -> B -> MSF -> H
  post_backbone,  // B -> MTF -> MSF -> H
  post_msf,       // B -> MSF -> MTF -> H
  post_head,      // B -> MSF -> H -> MTF
};

[[nodiscard]] std::string_view fusion_name(FusionPosition p);
[[nodiscard]] FusionPosition parse_fusion(std::string_view name);

struct ModelConfig {
  std::string backbone = "toy";
  std::array<int, 4> widths{16, 32, 64, 128};
  std::string branches = "I+A+D+E";
  FusionPosition fusion = FusionPosition::post_backbone;
  int msf_levels = 4;
  int msf_channels = 32;
  int fused_channels = 64;
  HeadKind head = HeadKind::fcn;
  int num_classes = 2;
  bool share_backbone = true;
  bool share_info_conv = true;
  bool share_change_conv = true;
  bool use_weighted_loss = true;
  std::uint64_t seed = 0;

  [[nodiscard]] BranchConfig branch_config() const;
  /// Throws std::invalid_argument naming the offending stage.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Backbone, temporal fusion, spatial fusion and head wired per
/// `ModelConfig::fusion`. Parameters live under backbone.*, mtf.*, msf.* and
/// head.*.
template <typename T>
class ChangeNet {
 public:
  explicit ChangeNet(const ModelConfig& config);

  ChangeNet(const ChangeNet&) = delete;
  ChangeNet& operator=(const ChangeNet&) = delete;

  /// (N,3,H,W) pair -> (N,num_classes,H,W) logits.
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& t0, const Tensor<T>& t1) const;
  /// Same, with only `active` MTF branches switched on.
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& t0, const Tensor<T>& t1,
                                  const BranchConfig& active) const;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] ParamStore<T>& params() { return params_; }
  [[nodiscard]] const ParamStore<T>& params() const { return params_; }
  [[nodiscard]] const SiameseEncoder<T>& encoder() const { return *encoder_; }
  [[nodiscard]] const Mtf<T>& mtf() const { return *mtf_; }
  [[nodiscard]] const Msf<T>& msf() const { return *msf_; }
  [[nodiscard]] const Head<T>& head() const { return *head_; }

 private:
  ModelConfig config_;
  ParamStore<T> params_;
  std::unique_ptr<SiameseEncoder<T>> encoder_;
  std::unique_ptr<Mtf<T>> mtf_;
  std::unique_ptr<Msf<T>> msf_;
  std::unique_ptr<Head<T>> head_;
};

/// Copies checkpoint values into matching parameters. Entries under
/// "adam." are ignored. Parameters under mtf.* may be absent (they keep
/// their initialisation and are returned); any other missing name, unknown
/// name or shape mismatch throws CheckpointError.
template <typename T>
std::vector<std::string> load_parameters(ParamStore<T>& params, const NamedTensors& entries);

extern template class ChangeNet<float>;
extern template class ChangeNet<double>;

}  // namespace c3po
