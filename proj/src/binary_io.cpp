#include "rt/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace rt {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_wav: return "MalformedWav";
    case Errc::unsupported_encoding: return "UnsupportedEncoding";
    case Errc::rate_mismatch: return "RateMismatch";
    case Errc::shape_error: return "ShapeError";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::invalid_class: return "InvalidClass";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_model: return "EmptyModel";
    case Errc::single_class: return "SingleClassError";
    case Errc::empty_validation: return "EmptyValidation";
    case Errc::empty_matrix: return "EmptyMatrix";
    case Errc::divergence: return "DivergenceError";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::io_error: return "IoError";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::corrupt_checkpoint: return "CorruptCheckpoint";
    case Errc::corrupt_cache: return "CorruptCache";
    case Errc::corrupt_file: return "CorruptFile";
    case Errc::usage: return "UsageError";
  }
  return "Error";
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::text(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::f32_array(std::span<const float> data) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    bytes_.insert(bytes_.end(), p, p + data.size_bytes());
  } else {
    for (float v : data) f32(v);
  }
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(on_truncation_, "unexpected end of data (need " + std::to_string(n) +
                                    " bytes at offset " + std::to_string(pos_) + ")");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::text() {
  const std::uint32_t n = u32();
  auto bytes = take(n);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

void ByteReader::f32_array(std::span<float> out) {
  auto bytes = take(out.size_bytes());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), bytes.data(), bytes.size());
  } else {
    ByteReader sub(bytes, on_truncation_);
    for (float& v : out) v = sub.f32();
  }
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(Errc::io_error, "read failed: " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

std::vector<std::uint8_t> frame(const FrameSpec& spec, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(spec.magic.data()), spec.magic.size()});
  w.u32(spec.version);
  w.raw(payload);
  const std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return w.bytes();
}

std::span<const std::uint8_t> unframe(const FrameSpec& spec, std::span<const std::uint8_t> file) {
  const std::size_t magic_len = spec.magic.size();
  if (file.size() < magic_len + 8 ||
      std::memcmp(file.data(), spec.magic.data(), magic_len) != 0) {
    throw Error(spec.corrupt, "bad magic, expected " + std::string(spec.magic));
  }
  ByteReader header(file.subspan(magic_len, 4), spec.corrupt);
  const std::uint32_t version = header.u32();
  if (version > spec.version) {
    throw Error(Errc::version_mismatch, "file version " + std::to_string(version) +
                                            " is newer than supported version " +
                                            std::to_string(spec.version));
  }
  const std::size_t body_end = file.size() - 4;
  ByteReader trailer(file.subspan(body_end), spec.corrupt);
  if (trailer.u32() != crc32(file.first(body_end))) {
    throw Error(spec.corrupt, "checksum mismatch");
  }
  return file.subspan(magic_len + 4, body_end - magic_len - 4);
}

}  // namespace rt
