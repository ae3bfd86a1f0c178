// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3po/tensor.hpp"

namespace c3po {

/// Binary parameter file:
///   "C3PO" | u8 version (1) | u32 count |
///   count x { u32 name_len | name bytes | u32 dims[4] | float32 payload }
/// All integers and floats little-endian.
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// Float32 round trip for double-precision tensors.
template <typename T>
NamedTensors to_float(const std::vector<std::pair<std::string, Tensor<T>>>& entries);

}  // namespace c3po
