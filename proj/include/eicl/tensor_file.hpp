#pragma once

// Binary tensor container shared with the extraction adapter.
//
//   offset 0   "EVEC"                     4 bytes magic
//   offset 4   0x01                       format version
//   offset 5   uint32 little-endian N     header byte count
//   offset 9   N bytes UTF-8 JSON header  {"shape":[...],"layout":"row-major",
//                                          "dtype":"f32","names":[...]?}
//   offset 9+N product(shape) float32 little-endian values
//
// Nothing may follow the payload.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eicl/error.hpp"

namespace eicl {

inline constexpr std::array<char, 4> kTensorMagic{'E', 'V', 'E', 'C'};
inline constexpr std::uint8_t kTensorVersion = 0x01;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;
  std::optional<std::vector<std::string>> names;

  [[nodiscard]] std::size_t element_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }

  bool operator==(const Tensor&) const = default;
};

namespace detail {

inline std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

// Serialises into the on-disk byte layout.
inline std::string encode_tensor(std::span<const std::size_t> shape, std::span<const float> values,
                                 const std::optional<std::vector<std::string>>& names = std::nullopt) {
  if (shape.empty()) throw ArgumentError("tensor shape must have at least one dimension");
  for (auto s : shape) {
    if (s == 0) throw ArgumentError("tensor shape entries must be positive");
  }
  if (detail::shape_product(shape) != values.size()) {
    throw ArgumentError("shape/length mismatch: shape product " +
                        std::to_string(detail::shape_product(shape)) + " vs " +
                        std::to_string(values.size()) + " values");
  }

  nlohmann::ordered_json header;
  header["shape"] = std::vector<std::size_t>(shape.begin(), shape.end());
  header["layout"] = "row-major";
  header["dtype"] = "f32";
  if (names) header["names"] = *names;
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(9 + header_text.size() + values.size() * 4);
  out.append(kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(static_cast<char>(kTensorVersion));
  detail::put_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (float f : values) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Tensor decode_tensor(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 9) throw ValidationError("truncated tensor file: missing preamble");
  if (std::memcmp(p, kTensorMagic.data(), 4) != 0) throw ValidationError("bad magic");
  if (p[4] != kTensorVersion) {
    throw ValidationError("unsupported tensor format version " + std::to_string(p[4]));
  }
  const std::uint32_t header_len = detail::get_u32_le(p + 5);
  if (bytes.size() < 9 + static_cast<std::size_t>(header_len)) {
    throw ValidationError("truncated tensor file: header length prefix exceeds file size");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(9, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tensor header: ") + e.what());
  }

  Tensor t;
  try {
    if (header.value("layout", "row-major") != "row-major") {
      throw ValidationError("unsupported layout " + header["layout"].dump());
    }
    if (header.value("dtype", "f32") != "f32") {
      throw ValidationError("unsupported dtype " + header["dtype"].dump());
    }
    for (const auto& dim : header.at("shape")) {
      const auto v = dim.get<std::int64_t>();
      if (v <= 0) throw ValidationError("tensor shape entries must be positive");
      t.shape.push_back(static_cast<std::size_t>(v));
    }
    if (t.shape.empty()) throw ValidationError("tensor shape must have at least one dimension");
    if (header.contains("names") && !header["names"].is_null()) {
      t.names = header["names"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tensor header: ") + e.what());
  }

  const std::size_t count = t.element_count();
  const std::size_t payload = bytes.size() - 9 - header_len;
  if (payload < count * 4) {
    throw ValidationError("truncated payload: expected " + std::to_string(count * 4) + " bytes, found " +
                          std::to_string(payload));
  }
  if (payload > count * 4) {
    throw ValidationError("shape/length mismatch: " + std::to_string(payload - count * 4) +
                          " trailing payload bytes");
  }
  t.values.resize(count);
  const unsigned char* data = p + 9 + header_len;
  for (std::size_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(detail::get_u32_le(data + 4 * i));
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, std::span<const std::size_t> shape,
                         std::span<const float> values,
                         const std::optional<std::vector<std::string>>& names = std::nullopt) {
  const std::string bytes = encode_tensor(shape, values, names);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline void write_tensor(const std::filesystem::path& path, std::initializer_list<std::size_t> shape,
                         std::span<const float> values,
                         const std::optional<std::vector<std::string>>& names = std::nullopt) {
  write_tensor(path, std::span<const std::size_t>(shape.begin(), shape.size()), values, names);
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_tensor(path, t.shape, t.values, t.names);
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace eicl
