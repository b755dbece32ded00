#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rt/audio.hpp"

namespace rt {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SampleMatrix {
  RowMatrixXf data;
  ClassId label = 0;
};

/// data(r, c) == samples[r * width + c]
SampleMatrix reshape_to_matrix(const AudioSegment& segment, Eigen::Index width);

enum class SplitMode { stratified, random, subject };

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// |test| == round(test_fraction * N). Stratified mode allocates the test
/// count over classes by largest remainder, so every class is within one
/// sample of its proportional share. Subject mode moves whole subjects into
/// the test set until the target count is reached.
SplitIndices make_split_indices(std::span<const ClassId> labels,
                                std::span<const std::string> subjects, double test_fraction,
                                std::uint64_t seed, SplitMode mode = SplitMode::stratified);

struct DatasetSplit {
  std::vector<SampleMatrix> train;
  std::vector<SampleMatrix> test;
  std::uint64_t seed = 0;
};

DatasetSplit make_split(std::span<const SampleMatrix> segments, double test_fraction,
                        std::uint64_t seed, bool stratified = true);

/// Segment cache: `RSHT0001` | u32 version | u32 count | u32 window_len |
/// count x (u8 label, f32 x window_len) | u32 CRC32.
struct CachedSegment {
  ClassId label = 0;
  Eigen::VectorXf samples;
};

void write_segment_cache(const std::filesystem::path& path, std::span<const AudioSegment> segments);
std::vector<CachedSegment> read_segment_cache(const std::filesystem::path& path);

/// `segment_id,subset` with subset in {train,test}, one row per segment in
/// cache order.
void write_split_csv(const std::filesystem::path& path, const SplitIndices& split,
                     std::size_t total);
SplitIndices read_split_csv(const std::filesystem::path& path);

}  // namespace rt
