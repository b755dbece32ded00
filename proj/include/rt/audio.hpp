#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rt/error.hpp"

namespace rt {

using ClassId = int;

inline constexpr int kNumClasses = 3;
inline constexpr int kSampleRate = 44100;
inline constexpr int kWindowLen = 44100;  // one second at kSampleRate
inline constexpr int kMatrixWidth = 210;  // 210 * 210 == 44100

/// healthy = 0, pneumonia = 1, copd = 2
std::string_view class_name(ClassId label);
ClassId parse_class(std::string_view name);

struct RecordingMeta {
  std::string file_path;
  std::string subject_id;
  ClassId label = 0;
  int sample_rate = kSampleRate;
  std::size_t n_samples = 0;
};

struct AudioSegment {
  Eigen::VectorXf samples;
  ClassId label = 0;
  std::shared_ptr<const RecordingMeta> source;
  std::size_t offset = 0;
};

struct WavData {
  int sample_rate = 0;
  std::vector<float> samples;  // mono, scaled to [-1, 1]
};

/// Accepts PCM16 (format 1) and IEEE float32 (format 3), including the
/// WAVE_FORMAT_EXTENSIBLE wrapper around either. Channels are averaged.
WavData parse_wav(std::span<const std::uint8_t> bytes);
WavData parse_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);
std::vector<std::uint8_t> encode_wav_float32(std::span<const float> samples, int sample_rate,
                                             int channels = 1);

std::vector<float> resample_linear(std::span<const float> samples, int from_rate, int to_rate);

/// Non-overlapping consecutive windows; the trailing partial window is dropped.
std::vector<AudioSegment> segment_recording(std::span<const float> samples,
                                            std::shared_ptr<const RecordingMeta> meta,
                                            std::size_t window_len = kWindowLen);

struct ManifestEntry {
  std::filesystem::path file_path;  // resolved against the manifest directory
  std::string subject_id;
  ClassId label = 0;
};

/// CSV with header `file_path,subject_id,label`.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

/// Reads the WAV behind a manifest entry. Recordings at a rate other than
/// 44100 Hz are linearly resampled when `resample` is set, else rejected.
struct Recording {
  std::shared_ptr<const RecordingMeta> meta;
  std::vector<float> samples;
};
Recording load_recording(const ManifestEntry& entry, bool resample);

enum class Normalization { none, standardize, minmax };

std::string_view to_string(Normalization mode);
Normalization parse_normalization(std::string_view name);

/// Per-segment normalization. Moments are accumulated in double regardless
/// of the scalar type. Constant input maps to all zeros under both
/// standardize and minmax.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalized(
    const Eigen::MatrixBase<Derived>& x, Normalization mode) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = x.size();
  if (mode == Normalization::none || n == 0) return x;

  const Eigen::VectorXd xd = x.template cast<double>();
  if (mode == Normalization::standardize) {
    const double mean = xd.mean();
    const double var = (xd.array() - mean).square().mean();
    if (!(var > 0.0)) return Vec::Zero(n);
    const double inv_std = 1.0 / std::sqrt(var);
    return ((xd.array() - mean) * inv_std).matrix().template cast<Scalar>();
  }
  const double lo = xd.minCoeff();
  const double hi = xd.maxCoeff();
  if (!(hi > lo)) return Vec::Zero(n);
  return ((xd.array() - lo) / (hi - lo)).matrix().template cast<Scalar>();
}

AudioSegment normalize_segment(const AudioSegment& segment, Normalization mode);

}  // namespace rt
