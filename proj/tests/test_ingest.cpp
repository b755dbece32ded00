#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "support.hpp"

#include "rt/audio.hpp"
#include "rt/binary_io.hpp"
#include "rt/dataset.hpp"

using namespace rt;
using test::thrown_code;

namespace {

std::vector<std::uint8_t> pcm16_payload(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> b;
  for (auto s : v) test::put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

std::vector<std::uint8_t> f32_payload(const std::vector<float>& v) {
  std::vector<std::uint8_t> b(v.size() * 4);
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

std::shared_ptr<RecordingMeta> meta_with_rate(int rate, std::size_t n) {
  auto m = std::make_shared<RecordingMeta>();
  m->file_path = "mem.wav";
  m->subject_id = "s";
  m->sample_rate = rate;
  m->n_samples = n;
  return m;
}

AudioSegment segment_of(std::vector<float> v, ClassId label = 0) {
  AudioSegment s;
  s.samples = Eigen::Map<Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(v.size()));
  s.label = label;
  return s;
}

}  // namespace

TEST_CASE("pcm16 samples scale by 1/32768") {
  const auto wav = parse_wav(test::wav_bytes(1, 1, 44100, 16, pcm16_payload({0, 32767, -32768})));
  CHECK(wav.sample_rate == 44100);
  REQUIRE(wav.samples.size() == 3);
  CHECK(wav.samples[0] == 0.0f);
  CHECK(wav.samples[1] == 32767.0f / 32768.0f);
  CHECK(wav.samples[2] == -1.0f);
}

TEST_CASE("stereo channels are averaged") {
  const auto wav = parse_wav(test::wav_bytes(3, 2, 44100, 32, f32_payload({1.0f, 0.0f, 1.0f, 0.0f, -0.5f, 0.5f})));
  REQUIRE(wav.samples.size() == 3);
  CHECK(wav.samples[0] == 0.5f);
  CHECK(wav.samples[1] == 0.5f);
  CHECK(wav.samples[2] == 0.0f);
}

TEST_CASE("chunk size beyond the end of file is malformed") {
  auto bytes = test::wav_bytes(1, 1, 44100, 16, pcm16_payload({1, 2, 3, 4}));
  // data chunk size field sits right before the 8 payload bytes
  const std::size_t size_at = bytes.size() - 8 - 4;
  bytes[size_at] = 0x40;
  CHECK(thrown_code([&] { parse_wav(bytes); }) == Errc::malformed_wav);

  auto truncated = test::wav_bytes(1, 1, 44100, 16, pcm16_payload({1, 2, 3, 4}));
  truncated.resize(truncated.size() - 3);
  CHECK(thrown_code([&] { parse_wav(truncated); }) == Errc::malformed_wav);

  const std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0};
  CHECK(thrown_code([&] { parse_wav(junk); }) == Errc::malformed_wav);
}

TEST_CASE("compressed codecs are unsupported") {
  // format 6 is A-law
  const auto bytes = test::wav_bytes(6, 1, 8000, 8, {1, 2, 3, 4});
  CHECK(thrown_code([&] { parse_wav(bytes); }) == Errc::unsupported_encoding);
}

TEST_CASE("encoders round-trip through the parser") {
  std::vector<float> s = {0.0f, 0.25f, -0.5f, 0.999f};
  const auto f = parse_wav(encode_wav_float32(s, 44100));
  CHECK(f.samples == s);
  const auto p = parse_wav(encode_wav_pcm16(s, 22050));
  CHECK(p.sample_rate == 22050);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(p.samples[i] - s[i]) <= 1.0f / 32768.0f);
}

TEST_CASE("segmentation counts whole windows") {
  const std::vector<float> twenty_s(882000, 0.25f);
  CHECK(segment_recording(twenty_s, meta_with_rate(44100, twenty_s.size())).size() == 20);

  const std::vector<float> short_rec(44099, 0.0f);
  CHECK(segment_recording(short_rec, meta_with_rate(44100, short_rec.size())).empty());

  CHECK(thrown_code([&] { segment_recording(twenty_s, meta_with_rate(22050, twenty_s.size())); }) ==
        Errc::rate_mismatch);
}

TEST_CASE("103 recordings totalling 2055 windows give 2055 segments") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> extra(0, kWindowLen - 1);
  std::size_t total = 0, expected = 0;
  for (int r = 0; r < 103; ++r) {
    const std::size_t windows = r < 98 ? 20 : 19;
    expected += windows;
    const std::vector<float> rec(windows * kWindowLen + static_cast<std::size_t>(extra(rng)), 0.1f);
    const auto segs = segment_recording(rec, meta_with_rate(44100, rec.size()));
    total += segs.size();
  }
  CHECK(expected == 2055);
  CHECK(total == 2055);
}

TEST_CASE("concatenated segments reproduce a prefix of the recording") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> rec(3 * 1000 + 417);
  for (auto& x : rec) x = u(rng);
  const auto segs = segment_recording(rec, meta_with_rate(44100, rec.size()), 1000);
  REQUIRE(segs.size() == 3);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    CHECK(segs[s].offset == s * 1000);
    for (Eigen::Index i = 0; i < 1000; ++i) CHECK(segs[s].samples[i] == rec[s * 1000 + static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("linear resampling preserves a ramp") {
  std::vector<float> ramp(100);
  std::iota(ramp.begin(), ramp.end(), 0.0f);
  const auto up = resample_linear(ramp, 22050, 44100);
  REQUIRE(up.size() >= 198);
  for (std::size_t i = 0; i + 2 < up.size(); ++i) CHECK(up[i] == doctest::Approx(i * 0.5).epsilon(1e-6));
}

TEST_CASE("manifest loading resolves paths and rejects rate mismatch") {
  test::ScratchDir dir("manifest");
  std::vector<float> tone(44100 * 2 + 10, 0.5f);
  write_file(dir / "a.wav", encode_wav_float32(tone, 44100));
  write_file(dir / "b.wav", encode_wav_float32(tone, 22050));
  {
    std::ofstream m(dir / "m.csv");
    m << "file_path,subject_id,label\na.wav,101,copd\nb.wav,102,healthy\n";
  }
  const auto entries = read_manifest(dir / "m.csv");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].label == parse_class("copd"));
  CHECK(entries[1].subject_id == "102");

  const auto a = load_recording(entries[0], false);
  CHECK(a.samples.size() == tone.size());
  CHECK(thrown_code([&] { load_recording(entries[1], false); }) == Errc::rate_mismatch);
  const auto b = load_recording(entries[1], true);
  CHECK(b.meta->sample_rate == 44100);
  CHECK(segment_recording(b.samples, b.meta).size() == 4);

  std::ofstream(dir / "bad.csv") << "path,label\nx.wav,copd\n";
  CHECK(thrown_code([&] { read_manifest(dir / "bad.csv"); }) == Errc::invalid_config);
  std::ofstream(dir / "badlabel.csv") << "file_path,subject_id,label\na.wav,1,asthma\n";
  CHECK(thrown_code([&] { read_manifest(dir / "badlabel.csv"); }) == Errc::invalid_class);
}

TEST_CASE("reshape is row-major and checks the width") {
  const auto m = reshape_to_matrix(segment_of({1, 2, 3, 4}), 2);
  CHECK(m.data(0, 0) == 1);
  CHECK(m.data(0, 1) == 2);
  CHECK(m.data(1, 0) == 3);
  CHECK(m.data(1, 1) == 4);

  std::vector<float> v(kWindowLen);
  std::iota(v.begin(), v.end(), 0.0f);
  const auto seg = segment_of(v);
  const auto big = reshape_to_matrix(seg, kMatrixWidth);
  CHECK(big.data.rows() == 210);
  CHECK(big.data.cols() == 210);
  const Eigen::Map<const Eigen::VectorXf> flat(big.data.data(), big.data.size());
  CHECK(flat == seg.samples);
  CHECK(thrown_code([&] { reshape_to_matrix(seg, 200); }) == Errc::shape_error);
}

TEST_CASE("normalization modes") {
  const auto z = normalize_segment(segment_of({1, 1, 1, 1}), Normalization::standardize);
  CHECK(z.samples == Eigen::VectorXf::Zero(4));
  const auto mm = normalize_segment(segment_of({0, 2}), Normalization::minmax);
  CHECK(mm.samples[0] == 0.0f);
  CHECK(mm.samples[1] == 1.0f);
  CHECK(normalize_segment(segment_of({3, -2}), Normalization::none).samples == segment_of({3, -2}).samples);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(3.0, 5.0);
  Eigen::VectorXd x(5000);
  for (auto& v : x) v = g(rng);
  const Eigen::VectorXd y = normalized(x, Normalization::standardize);
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(sd - 1.0) < 1e-12);
}

TEST_CASE("split of 2055 segments is 1849/206") {
  std::vector<ClassId> labels(2055);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<ClassId>(i % 7 == 0 ? 0 : i % 3);
  for (auto mode : {SplitMode::stratified, SplitMode::random}) {
    const auto s = make_split_indices(labels, {}, 206.0 / 2055.0, 5, mode);
    CHECK(s.train.size() == 1849);
    CHECK(s.test.size() == 206);
  }
}

TEST_CASE("stratified split takes 3 per class from 90 segments") {
  std::vector<ClassId> labels(90);
  for (std::size_t i = 0; i < 90; ++i) labels[i] = static_cast<ClassId>(i / 30);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = make_split_indices(labels, {}, 0.1, seed);
    int per_class[3] = {0, 0, 0};
    for (auto i : s.test) ++per_class[labels[i]];
    CHECK(per_class[0] == 3);
    CHECK(per_class[1] == 3);
    CHECK(per_class[2] == 3);
  }
}

TEST_CASE("splits partition the data and are reproducible") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng() % 300;
    std::vector<ClassId> labels(n);
    std::vector<std::string> subjects(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<ClassId>(rng() % 3);
      subjects[i] = "p" + std::to_string(rng() % 12);
    }
    const double frac = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    for (auto mode : {SplitMode::stratified, SplitMode::random, SplitMode::subject}) {
      const auto a = make_split_indices(labels, subjects, frac, 42, mode);
      const auto b = make_split_indices(labels, subjects, frac, 42, mode);
      CHECK(a.train == b.train);
      CHECK(a.test == b.test);
      std::set<std::size_t> all(a.train.begin(), a.train.end());
      for (auto i : a.test) CHECK(all.insert(i).second);
      CHECK(all.size() == n);
      CHECK(std::is_sorted(a.train.begin(), a.train.end()));
      if (mode == SplitMode::subject) {
        std::set<std::string> train_subjects;
        for (auto i : a.train) train_subjects.insert(subjects[i]);
        for (auto i : a.test) CHECK(train_subjects.count(subjects[i]) == 0);
      } else {
        CHECK(a.test.size() == static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
      }
    }
  }
}

TEST_CASE("split rejects empty input and bad fractions") {
  CHECK(thrown_code([] { make_split_indices({}, {}, 0.1, 0); }) == Errc::empty_dataset);
  const std::vector<ClassId> labels = {0, 1, 2};
  CHECK(thrown_code([&] { make_split_indices(labels, {}, 0.0, 0); }) == Errc::invalid_config);
  CHECK(thrown_code([&] { make_split_indices(labels, {}, 1.0, 0); }) == Errc::invalid_config);
}

TEST_CASE("make_split keeps sample contents") {
  std::vector<SampleMatrix> data;
  for (int i = 0; i < 30; ++i) {
    SampleMatrix s;
    s.data = RowMatrixXf::Constant(2, 2, static_cast<float>(i));
    s.label = i % 3;
    data.push_back(s);
  }
  const auto split = make_split(data, 0.2, 1);
  CHECK(split.train.size() == 24);
  CHECK(split.test.size() == 6);
  std::set<float> seen;
  for (const auto& s : split.train) seen.insert(s.data(0, 0));
  for (const auto& s : split.test) seen.insert(s.data(0, 0));
  CHECK(seen.size() == 30);
}

TEST_CASE("segment cache and split csv round-trip") {
  test::ScratchDir dir("cache");
  std::vector<AudioSegment> segs;
  for (int i = 0; i < 4; ++i) segs.push_back(segment_of({0.5f * i, -1.0f, 0.25f, 1.0f}, i % 3));
  write_segment_cache(dir / "c.rsht", segs);
  const auto back = read_segment_cache(dir / "c.rsht");
  REQUIRE(back.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(back[static_cast<std::size_t>(i)].label == i % 3);
    CHECK(back[static_cast<std::size_t>(i)].samples == segs[static_cast<std::size_t>(i)].samples);
  }

  auto bytes = read_file(dir / "c.rsht");
  bytes[0] = 'X';
  write_file(dir / "bad.rsht", bytes);
  CHECK(thrown_code([&] { read_segment_cache(dir / "bad.rsht"); }) == Errc::corrupt_cache);
  bytes = read_file(dir / "c.rsht");
  bytes[20] ^= 0x01;
  write_file(dir / "flip.rsht", bytes);
  CHECK(thrown_code([&] { read_segment_cache(dir / "flip.rsht"); }) == Errc::corrupt_cache);

  SplitIndices split{{0, 2, 3}, {1}};
  write_split_csv(dir / "split.csv", split, 4);
  const auto again = read_split_csv(dir / "split.csv");
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);
}
