#include "rt/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "rt/binary_io.hpp"
#include "rt/dataset.hpp"

namespace rt {

void SyntheticSpec::validate() const {
  if (n_per_class < 1) throw Error(Errc::invalid_config, "n_per_class must be >= 1");
  if (frequencies.size() != static_cast<std::size_t>(kNumClasses)) {
    throw Error(Errc::invalid_config, "need exactly " + std::to_string(kNumClasses) + " class frequencies");
  }
  const std::set<double> distinct(frequencies.begin(), frequencies.end());
  if (distinct.size() != frequencies.size()) {
    throw Error(Errc::invalid_config, "class frequencies must be pairwise distinct");
  }
  for (double f : frequencies) {
    if (!(f > 0.0 && f < kSampleRate / 2.0)) {
      throw Error(Errc::invalid_config, "frequency must lie in (0, Nyquist)");
    }
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(Errc::invalid_config, "noise must be >= 0");
}

std::vector<AudioSegment> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const double gain = 1.0 / (1.0 + spec.noise);

  std::vector<AudioSegment> out;
  out.reserve(static_cast<std::size_t>(spec.n_per_class * kNumClasses));
  for (int c = 0; c < kNumClasses; ++c) {
    const double w = 2.0 * std::numbers::pi * spec.frequencies[static_cast<std::size_t>(c)] / kSampleRate;
    for (int i = 0; i < spec.n_per_class; ++i) {
      auto meta = std::make_shared<RecordingMeta>();
      meta->subject_id = "synth-" + std::string(class_name(c)) + "-" + std::to_string(i);
      meta->label = c;
      meta->sample_rate = kSampleRate;
      meta->n_samples = kWindowLen;

      AudioSegment seg;
      seg.samples.resize(kWindowLen);
      for (int n = 0; n < kWindowLen; ++n) {
        const double noise = spec.noise > 0.0 ? spec.noise * uniform(rng) : 0.0;
        seg.samples[n] = static_cast<float>(gain * (std::sin(w * n) + noise));
      }
      seg.label = c;
      seg.source = std::move(meta);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

SyntheticCorpus write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  auto segments = generate_synthetic(spec);
  std::filesystem::create_directories(dir / "wav");

  std::vector<ManifestEntry> manifest;
  for (auto& seg : segments) {
    const std::string name = seg.source->subject_id + ".wav";
    const auto path = dir / "wav" / name;
    write_file(path, encode_wav_float32({seg.samples.data(), static_cast<std::size_t>(seg.samples.size())},
                                        kSampleRate));
    auto meta = std::make_shared<RecordingMeta>(*seg.source);
    meta->file_path = path.string();
    seg.source = meta;
    manifest.push_back({std::filesystem::path("wav") / name, meta->subject_id, seg.label});
  }

  SyntheticCorpus corpus{dir / "manifest.csv", dir / "segments.rsht", segments.size()};
  write_manifest(corpus.manifest, manifest);
  write_segment_cache(corpus.cache, segments);
  return corpus;
}

}  // namespace rt
