#include "rt/audio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rt/binary_io.hpp"

namespace rt {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"healthy", "pneumonia", "copd"};

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

bool tag_is(std::span<const std::uint8_t> bytes, const char* tag) {
  return std::memcmp(bytes.data(), tag, 4) == 0;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string_view class_name(ClassId label) {
  if (label < 0 || label >= kNumClasses) {
    throw Error(Errc::invalid_class, "class id " + std::to_string(label));
  }
  return kClassNames[static_cast<std::size_t>(label)];
}

ClassId parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<ClassId>(i);
  }
  throw Error(Errc::invalid_class, "unknown label '" + std::string(name) + "'");
}

WavData parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, "RIFF") || !tag_is(bytes.subspan(8), "WAVE")) {
    throw Error(Errc::malformed_wav, "missing RIFF/WAVE header");
  }
  ByteReader riff(bytes.subspan(4, 4), Errc::malformed_wav);
  const std::uint32_t riff_size = riff.u32();
  if (riff_size < 4 || riff_size > bytes.size() - 8) {
    throw Error(Errc::malformed_wav, "RIFF size " + std::to_string(riff_size) +
                                         " exceeds file length");
  }

  ByteReader r(bytes.subspan(12, riff_size - 4), Errc::malformed_wav);
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (r.remaining() >= 8) {
    auto tag = r.take(4);
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) {
      throw Error(Errc::malformed_wav, "chunk '" + std::string(tag.begin(), tag.end()) +
                                           "' size exceeds file length");
    }
    auto body = r.take(size);
    if (size % 2 == 1 && r.remaining() > 0) r.take(1);  // pad byte

    if (tag_is(tag, "fmt ")) {
      if (size < 16) throw Error(Errc::malformed_wav, "fmt chunk too short");
      ByteReader f(body, Errc::malformed_wav);
      format = static_cast<std::uint16_t>(f.u8() | (f.u8() << 8));
      channels = static_cast<std::uint16_t>(f.u8() | (f.u8() << 8));
      rate = f.u32();
      f.u32();  // byte rate
      f.take(2);  // block align
      bits = static_cast<std::uint16_t>(f.u8() | (f.u8() << 8));
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(Errc::malformed_wav, "extensible fmt chunk too short");
        f.take(2 + 2 + 4);  // cbSize, valid bits, channel mask
        auto guid = f.take(2);
        format = static_cast<std::uint16_t>(guid[0] | (guid[1] << 8));
      }
      have_fmt = true;
    } else if (tag_is(tag, "data")) {
      data = body;
      have_data = true;
    }
  }

  if (!have_fmt || !have_data) throw Error(Errc::malformed_wav, "missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw Error(Errc::malformed_wav, "zero channels or rate");

  std::size_t bytes_per_sample = 0;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw Error(Errc::unsupported_encoding, "format code " + std::to_string(format) + " with " +
                                                std::to_string(bits) + " bits per sample");
  }

  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data.size() / frame_bytes;
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(n_frames);

  ByteReader d(data, Errc::malformed_wav);
  const double inv_channels = 1.0 / channels;
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      if (bytes_per_sample == 2) {
        const auto lo = d.u8();
        const auto hi = d.u8();
        const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        acc += v / 32768.0;
      } else {
        acc += d.f32();
      }
    }
    out.samples[i] = static_cast<float>(acc * inv_channels);
  }
  return out;
}

WavData parse_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_wav(std::span<const std::uint8_t>(bytes));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::uint8_t> wav_header(std::uint16_t format, int channels, int rate, int bits,
                                     std::size_t data_bytes) {
  ByteWriter w;
  const auto tag = [&](const char* t) {
    w.raw({reinterpret_cast<const std::uint8_t*>(t), 4});
  };
  const auto u16 = [&](std::uint16_t v) {
    w.u8(static_cast<std::uint8_t>(v));
    w.u8(static_cast<std::uint8_t>(v >> 8));
  };
  tag("RIFF");
  w.u32(static_cast<std::uint32_t>(4 + 8 + 16 + 8 + data_bytes));
  tag("WAVE");
  tag("fmt ");
  w.u32(16);
  u16(format);
  u16(static_cast<std::uint16_t>(channels));
  w.u32(static_cast<std::uint32_t>(rate));
  w.u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  tag("data");
  w.u32(static_cast<std::uint32_t>(data_bytes));
  return w.bytes();
}

}  // namespace

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  auto out = wav_header(kFormatPcm, 1, sample_rate, 16, samples.size() * 2);
  out.reserve(out.size() + samples.size() * 2);
  for (float s : samples) {
    const double scaled = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled));
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_float32(std::span<const float> samples, int sample_rate,
                                             int channels) {
  auto out = wav_header(kFormatFloat, channels, sample_rate, 32, samples.size() * 4);
  ByteWriter w;
  w.f32_array(samples);
  out.insert(out.end(), w.bytes().begin(), w.bytes().end());
  return out;
}

std::vector<float> resample_linear(std::span<const float> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw Error(Errc::invalid_config, "sample rates must be positive");
  }
  if (from_rate == to_rate || samples.empty()) return {samples.begin(), samples.end()};
  const auto n_out = static_cast<std::size_t>(
      (static_cast<std::uint64_t>(samples.size()) * static_cast<std::uint64_t>(to_rate)) /
      static_cast<std::uint64_t>(from_rate));
  std::vector<float> out(n_out);
  const double step = static_cast<double>(from_rate) / to_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = i * step;
    const auto j = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(j);
    const double a = samples[j];
    const double b = j + 1 < samples.size() ? samples[j + 1] : a;
    out[i] = static_cast<float>(a + frac * (b - a));
  }
  return out;
}

std::vector<AudioSegment> segment_recording(std::span<const float> samples,
                                            std::shared_ptr<const RecordingMeta> meta,
                                            std::size_t window_len) {
  if (window_len == 0) throw Error(Errc::invalid_config, "window length must be >= 1");
  if (!meta) throw Error(Errc::invalid_config, "segment_recording needs recording metadata");
  if (meta->sample_rate != kSampleRate) {
    throw Error(Errc::rate_mismatch, meta->file_path + " is " +
                                         std::to_string(meta->sample_rate) + " Hz, expected " +
                                         std::to_string(kSampleRate));
  }
  const std::size_t count = samples.size() / window_len;
  std::vector<AudioSegment> segments;
  segments.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    AudioSegment seg;
    seg.samples = Eigen::Map<const Eigen::VectorXf>(samples.data() + s * window_len,
                                                   static_cast<Eigen::Index>(window_len));
    if (!seg.samples.allFinite()) {
      throw Error(Errc::malformed_wav, meta->file_path + ": non-finite sample in window " +
                                           std::to_string(s));
    }
    seg.label = meta->label;
    seg.source = meta;
    seg.offset = s * window_len;
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Strip a UTF-8 BOM if present.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"file_path", "subject_id", "label"}) {
    throw Error(Errc::invalid_config, "manifest header must be file_path,subject_id,label");
  }

  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw Error(Errc::invalid_config, "manifest line " + std::to_string(line_no) +
                                            ": expected 3 fields");
    }
    ManifestEntry e;
    e.file_path = fields[0];
    if (e.file_path.is_relative()) e.file_path = base / e.file_path;
    e.subject_id = fields[1];
    e.label = parse_class(fields[2]);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "file_path,subject_id,label\n";
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    auto p = e.file_path;
    if (p.is_absolute() && !base.empty()) p = std::filesystem::relative(p, base);
    out << p.generic_string() << ',' << e.subject_id << ',' << class_name(e.label) << '\n';
  }
}

Recording load_recording(const ManifestEntry& entry, bool resample) {
  WavData wav = parse_wav(entry.file_path);
  auto meta = std::make_shared<RecordingMeta>();
  meta->file_path = entry.file_path.string();
  meta->subject_id = entry.subject_id;
  meta->label = entry.label;
  meta->sample_rate = wav.sample_rate;
  if (wav.sample_rate != kSampleRate) {
    if (!resample) {
      throw Error(Errc::rate_mismatch, meta->file_path + " is " +
                                           std::to_string(wav.sample_rate) +
                                           " Hz; pass --resample to convert");
    }
    wav.samples = resample_linear(wav.samples, wav.sample_rate, kSampleRate);
    meta->sample_rate = kSampleRate;
  }
  meta->n_samples = wav.samples.size();
  return {std::move(meta), std::move(wav.samples)};
}

std::string_view to_string(Normalization mode) {
  switch (mode) {
    case Normalization::none: return "none";
    case Normalization::standardize: return "standardize";
    case Normalization::minmax: return "minmax";
  }
  return "none";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::none;
  if (name == "standardize") return Normalization::standardize;
  if (name == "minmax") return Normalization::minmax;
  throw Error(Errc::invalid_config, "unknown normalization '" + std::string(name) + "'");
}

AudioSegment normalize_segment(const AudioSegment& segment, Normalization mode) {
  AudioSegment out = segment;
  out.samples = normalized(segment.samples, mode);
  return out;
}

}  // namespace rt
