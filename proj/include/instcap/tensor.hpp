// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "instcap/error.hpp"

namespace instcap {

/// Dense float tensor. Latents use rank 5: (layer, time, height, width,
/// channel), row-major.
struct LatentTensor {
  std::vector<uint64_t> shape;
  std::vector<float> values;

  LatentTensor() = default;
  explicit LatentTensor(std::vector<uint64_t> s, float fill = 0.0f) : shape(std::move(s)), values(element_count(shape), fill) {}

  static size_t element_count(const std::vector<uint64_t>& s) {
    if (s.empty()) return 0;
    return static_cast<size_t>(std::accumulate(s.begin(), s.end(), uint64_t{1}, std::multiplies<>()));
  }

  size_t size() const { return values.size(); }
  bool operator==(const LatentTensor&) const = default;
};

/// Portable tensor file.
///
///   offset 0   4 bytes   magic "ICLT"
///   offset 4   u32       format version (1)
///   offset 8   u32       dtype (1 = float32)
///   offset 12  u32       rank R
///   offset 16  u64 x R   dimensions, outermost first
///   then       f32 x N   values, row-major, N = product of dimensions
///
/// All integers and floats are little-endian.
namespace tensor_file {

inline constexpr std::array<char, 4> kMagic = {'I', 'C', 'L', 'T'};
inline constexpr uint32_t kVersion = 1;
inline constexpr uint32_t kFloat32 = 1;

namespace detail {
template <typename T>
void put_le(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::DecodeError, "truncated tensor file");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}
}  // namespace detail

inline std::string encode(const LatentTensor& t) {
  if (LatentTensor::element_count(t.shape) != t.values.size())
    throw Error(ErrorKind::DecodeError, "tensor shape does not match value count");
  std::string out(kMagic.begin(), kMagic.end());
  detail::put_le<uint32_t>(out, kVersion);
  detail::put_le<uint32_t>(out, kFloat32);
  detail::put_le<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
  for (auto d : t.shape) detail::put_le<uint64_t>(out, d);
  out.reserve(out.size() + 4 * t.values.size());
  for (float f : t.values) detail::put_le<uint32_t>(out, std::bit_cast<uint32_t>(f));
  return out;
}

inline LatentTensor decode(std::string_view in) {
  if (in.size() < 16 || std::memcmp(in.data(), kMagic.data(), 4) != 0)
    throw Error(ErrorKind::DecodeError, "not a tensor file (bad magic)");
  size_t pos = 4;
  if (detail::get_le<uint32_t>(in, pos) != kVersion) throw Error(ErrorKind::DecodeError, "unsupported tensor file version");
  if (detail::get_le<uint32_t>(in, pos) != kFloat32) throw Error(ErrorKind::DecodeError, "unsupported tensor dtype");
  const auto rank = detail::get_le<uint32_t>(in, pos);
  if (rank > 16) throw Error(ErrorKind::DecodeError, "implausible tensor rank");
  LatentTensor t;
  for (uint32_t i = 0; i < rank; ++i) t.shape.push_back(detail::get_le<uint64_t>(in, pos));
  const size_t n = LatentTensor::element_count(t.shape);
  if (in.size() - pos != 4 * n) throw Error(ErrorKind::DecodeError, "tensor payload size does not match its shape");
  t.values.resize(n);
  for (size_t i = 0; i < n; ++i) {
    t.values[i] = std::bit_cast<float>(detail::get_le<uint32_t>(in, pos));
    if (!std::isfinite(t.values[i])) throw Error(ErrorKind::DecodeError, "tensor contains non-finite values");
  }
  return t;
}

inline void write(const std::filesystem::path& p, const LatentTensor& t) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write tensor file " + p.string());
  const auto bytes = encode(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline LatentTensor read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::DecodeError, "cannot read tensor file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

}  // namespace tensor_file
}  // namespace instcap
