#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rt/audio.hpp"

namespace rt {

/// Pure-tone corpus: class c is sin(2 pi f_c t) plus uniform noise in
/// [-noise, noise], scaled by 1 / (1 + noise) to stay inside [-1, 1].
struct SyntheticSpec {
  int n_per_class = 50;
  std::vector<double> frequencies{200.0, 400.0, 800.0};  // Hz, one per class
  double noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class-major order: all segments of class 0, then class 1, ...
std::vector<AudioSegment> generate_synthetic(const SyntheticSpec& spec);

struct SyntheticCorpus {
  std::filesystem::path manifest;
  std::filesystem::path cache;
  std::size_t segments = 0;
};

/// Writes one float32 WAV per segment under `dir/wav/`, a manifest and a
/// segment cache.
SyntheticCorpus write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace rt
