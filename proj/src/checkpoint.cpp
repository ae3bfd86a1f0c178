// SPDX-License-Identifier: Apache-2.0
#include "c3po/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace c3po {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  std::memcpy(b.data(), &v, 4);
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw CheckpointError("truncated checkpoint at " + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out.write("C3PO", 4);
  out.put(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    auto data = t.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  out.flush();
  if (!out) throw CheckpointError("write failed for '" + path.string() + "'");
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "C3PO", 4) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic)");
  const int version = in.get();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = get_u32(in, "entry count");
  NamedTensors entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("truncated checkpoint at entry name");
    Shape s;
    s.n = static_cast<int>(get_u32(in, name));
    s.c = static_cast<int>(get_u32(in, name));
    s.h = static_cast<int>(get_u32(in, name));
    s.w = static_cast<int>(get_u32(in, name));
    std::vector<float> data(s.numel());
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float))))
      throw CheckpointError("truncated payload for '" + name + "'");
    entries.emplace_back(std::move(name), Tensor<float>(s, std::move(data)));
  }
  return entries;
}

template <typename T>
NamedTensors to_float(const std::vector<std::pair<std::string, Tensor<T>>>& entries) {
  NamedTensors out;
  for (const auto& [name, t] : entries) {
    auto d = t.data();
    out.emplace_back(name, Tensor<float>(t.shape(), std::vector<float>(d.begin(), d.end())));
  }
  return out;
}

template NamedTensors to_float(const std::vector<std::pair<std::string, Tensor<float>>>&);
template NamedTensors to_float(const std::vector<std::pair<std::string, Tensor<double>>>&);

}  // namespace c3po
