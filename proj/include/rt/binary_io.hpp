#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rt/error.hpp"

namespace rt {

/// Little-endian byte sink used by every binary artifact.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> data);
  void text(std::string_view s);  // u32 length prefix + UTF-8 bytes
  void f32_array(std::span<const float> data);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader. Underflow raises `Error` with the
/// code given at construction so each format reports its own corruption kind.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, Errc on_truncation)
      : data_(data), on_truncation_(on_truncation) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string text();
  void f32_array(std::span<float> out);
  std::span<const std::uint8_t> take(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  Errc on_truncation_;
};

std::uint32_t crc32(std::span<const std::uint8_t> data);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

/// Framing shared by the checkpoint, cache, feature and classifier files:
///   8-byte ASCII magic | u32 version | payload | u32 CRC32(magic..payload)
struct FrameSpec {
  std::string_view magic;  // exactly 8 characters
  std::uint32_t version;
  Errc corrupt;            // raised on bad magic, truncation or CRC failure
};

std::vector<std::uint8_t> frame(const FrameSpec& spec, std::span<const std::uint8_t> payload);

/// Validates magic, then version (newer than `spec.version` is a
/// version_mismatch), then the CRC, and returns the payload bytes.
std::span<const std::uint8_t> unframe(const FrameSpec& spec, std::span<const std::uint8_t> file);

}  // namespace rt
