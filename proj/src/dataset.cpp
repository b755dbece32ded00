#include "rt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "rt/binary_io.hpp"

namespace rt {

namespace {

constexpr FrameSpec kCacheFrame{"RSHT0001", 1, Errc::corrupt_cache};

std::size_t test_count(std::size_t n, double test_fraction) {
  if (n == 0) throw Error(Errc::empty_dataset, "cannot split an empty dataset");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::invalid_config, "test_fraction must lie in (0, 1)");
  }
  return static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
}

}  // namespace

SampleMatrix reshape_to_matrix(const AudioSegment& segment, Eigen::Index width) {
  if (width <= 0 || width * width != segment.samples.size()) {
    throw Error(Errc::shape_error, "cannot reshape " + std::to_string(segment.samples.size()) +
                                       " samples into a " + std::to_string(width) + "x" +
                                       std::to_string(width) + " matrix");
  }
  SampleMatrix m;
  m.data = Eigen::Map<const RowMatrixXf>(segment.samples.data(), width, width);
  m.label = segment.label;
  return m;
}

std::string_view to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::stratified: return "stratified";
    case SplitMode::random: return "random";
    case SplitMode::subject: return "subject";
  }
  return "stratified";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "stratified") return SplitMode::stratified;
  if (name == "random") return SplitMode::random;
  if (name == "subject") return SplitMode::subject;
  throw Error(Errc::invalid_config, "unknown split mode '" + std::string(name) + "'");
}

SplitIndices make_split_indices(std::span<const ClassId> labels,
                                std::span<const std::string> subjects, double test_fraction,
                                std::uint64_t seed, SplitMode mode) {
  const std::size_t n = labels.size();
  const std::size_t n_test = test_count(n, test_fraction);
  std::mt19937_64 rng(seed);
  std::vector<char> is_test(n, 0);

  if (mode == SplitMode::random) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
  } else if (mode == SplitMode::stratified) {
    std::map<ClassId, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

    struct Quota {
      ClassId label;
      std::size_t count;
      double remainder;
    };
    std::vector<Quota> quotas;
    std::size_t allocated = 0;
    for (const auto& [label, members] : by_class) {
      const double share = static_cast<double>(n_test) * static_cast<double>(members.size()) /
                           static_cast<double>(n);
      const auto base = static_cast<std::size_t>(std::floor(share));
      quotas.push_back({label, base, share - static_cast<double>(base)});
      allocated += base;
    }
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return quotas[a].remainder > quotas[b].remainder;
    });
    for (std::size_t i = 0; allocated < n_test; i = (i + 1) % order.size()) {
      ++quotas[order[i]].count;
      ++allocated;
    }
    for (const auto& q : quotas) {
      auto members = by_class[q.label];
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t i = 0; i < q.count; ++i) is_test[members[i]] = 1;
    }
  } else {
    if (subjects.size() != n) {
      throw Error(Errc::length_mismatch, "subject split needs one subject id per segment");
    }
    std::vector<std::string> unique;
    std::map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < n; ++i) {
      auto& members = by_subject[subjects[i]];
      if (members.empty()) unique.push_back(subjects[i]);
      members.push_back(i);
    }
    std::shuffle(unique.begin(), unique.end(), rng);
    std::size_t taken = 0;
    for (const auto& s : unique) {
      if (taken >= n_test) break;
      for (std::size_t i : by_subject[s]) is_test[i] = 1;
      taken += by_subject[s].size();
    }
  }

  SplitIndices split;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? split.test : split.train).push_back(i);
  return split;
}

DatasetSplit make_split(std::span<const SampleMatrix> segments, double test_fraction,
                        std::uint64_t seed, bool stratified) {
  std::vector<ClassId> labels;
  labels.reserve(segments.size());
  for (const auto& s : segments) labels.push_back(s.label);
  const auto idx = make_split_indices(labels, {}, test_fraction, seed,
                                      stratified ? SplitMode::stratified : SplitMode::random);
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i : idx.train) split.train.push_back(segments[i]);
  for (std::size_t i : idx.test) split.test.push_back(segments[i]);
  return split;
}

void write_segment_cache(const std::filesystem::path& path, std::span<const AudioSegment> segments) {
  const std::size_t window = segments.empty() ? 0 : static_cast<std::size_t>(segments[0].samples.size());
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(segments.size()));
  w.u32(static_cast<std::uint32_t>(window));
  for (const auto& s : segments) {
    if (static_cast<std::size_t>(s.samples.size()) != window) {
      throw Error(Errc::shape_error, "segments in one cache must share a window length");
    }
    w.u8(static_cast<std::uint8_t>(s.label));
    w.f32_array({s.samples.data(), window});
  }
  write_file(path, frame(kCacheFrame, w.bytes()));
}

std::vector<CachedSegment> read_segment_cache(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(unframe(kCacheFrame, bytes), Errc::corrupt_cache);
  const std::uint32_t count = r.u32();
  const std::uint32_t window = r.u32();
  std::vector<CachedSegment> out(count);
  for (auto& s : out) {
    s.label = r.u8();
    if (s.label >= kNumClasses) throw Error(Errc::corrupt_cache, "label out of range");
    s.samples.resize(window);
    r.f32_array({s.samples.data(), window});
  }
  if (r.remaining() != 0) throw Error(Errc::corrupt_cache, "trailing bytes after segments");
  return out;
}

void write_split_csv(const std::filesystem::path& path, const SplitIndices& split,
                     std::size_t total) {
  std::vector<const char*> subset(total, nullptr);
  for (std::size_t i : split.train) subset.at(i) = "train";
  for (std::size_t i : split.test) subset.at(i) = "test";
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "segment_id,subset\n";
  for (std::size_t i = 0; i < total; ++i) {
    if (!subset[i]) throw Error(Errc::invalid_config, "split does not cover segment " + std::to_string(i));
    out << i << ',' << subset[i] << '\n';
  }
}

SplitIndices read_split_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open split file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("segment_id,subset", 0) != 0) {
    throw Error(Errc::corrupt_file, path.string() + ": expected header segment_id,subset");
  }
  SplitIndices split;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(Errc::corrupt_file, "bad split row: " + line);
    const std::size_t id = std::stoull(line.substr(0, comma));
    const auto subset = line.substr(comma + 1);
    if (subset == "train") {
      split.train.push_back(id);
    } else if (subset == "test") {
      split.test.push_back(id);
    } else {
      throw Error(Errc::corrupt_file, "bad subset '" + subset + "'");
    }
  }
  return split;
}

}  // namespace rt
