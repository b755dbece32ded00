#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

#include "rt/binary_io.hpp"
#include "rt/checkpoint.hpp"
#include "rt/features.hpp"
#include "rt/pipeline.hpp"

using namespace rt;
using test::thrown_code;
namespace fs = std::filesystem;

namespace {

// Small enough to train 40 epochs in seconds; same 210x210 input.
const char* kSmallArch = "input 1x210x210; conv 2x11; relu; pool 4; pool 5; flatten 200; dense 3";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RT_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// Synthetic corpus, ingest and a config file for the small architecture,
/// shared by the CLI cases.
struct Workspace {
  test::ScratchDir dir{"pipeline"};
  fs::path config = dir / "config.json";

  Workspace() {
    SyntheticSpec spec;
    spec.n_per_class = 10;
    cmd_synth(spec, dir / "corpus");
    std::ofstream(config) << R"({"architecture": ")" << kSmallArch << R"(", "train": {"lr": 0.01}, "threads": 1})";
  }

  fs::path path(const std::string& name) const { return dir / name; }
  int cli(const std::string& args) const { return run_cli(args, dir / "cli.log"); }
  std::string log() const { return slurp(dir / "cli.log"); }
};

}  // namespace

TEST_CASE("run config defaults, JSON overrides and validation") {
  RunConfig c;
  CHECK(c.window_len == 44100);
  CHECK(c.matrix_width == 210);
  CHECK(c.test_fraction == 206.0 / 2055.0);
  CHECK(c.knn.k == 3);
  CHECK(c.train.epochs == 40);
  c.validate();

  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);

  const auto o = config_from_json(nlohmann::json::parse(R"({"seed": 9, "train": {"epochs": 5}, "svm": {"kernel": "linear"}})"));
  CHECK(o.seed == 9);
  CHECK(o.train.epochs == 5);
  CHECK(o.train.lr == 0.01);
  CHECK(o.svm.kernel == KernelType::linear);

  RunConfig bad = c;
  bad.matrix_width = 200;
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::invalid_config);
  bad = c;
  bad.test_fraction = 1.0;
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::invalid_config);
  bad = c;
  bad.train.epochs = 0;
  CHECK(thrown_code([&] { bad.validate(); }) == Errc::invalid_config);
  CHECK(thrown_code([] { config_from_json(nlohmann::json::parse(R"({"seed": "x"})")); }) == Errc::invalid_config);
  CHECK(thrown_code([] { parse_method("forest"); }) == Errc::usage);
}

TEST_CASE("synthetic corpus shape and separability") {
  SyntheticSpec spec;
  const auto segs = generate_synthetic(spec);
  REQUIRE(segs.size() == 150);
  int per_class[3] = {0, 0, 0};
  int oracle_hits = 0;
  for (const auto& s : segs) {
    ++per_class[s.label];
    CHECK(s.samples.size() == kWindowLen);
    CHECK(s.samples.cwiseAbs().maxCoeff() <= 1.0f);
    oracle_hits += test::spectral_peak_class(s.samples, spec.frequencies, kSampleRate) == s.label;
  }
  CHECK(per_class[0] == 50);
  CHECK(per_class[1] == 50);
  CHECK(per_class[2] == 50);
  CHECK(oracle_hits == 150);

  SyntheticSpec quiet;
  quiet.n_per_class = 3;
  quiet.noise = 0.0;
  const auto a = generate_synthetic(quiet);
  quiet.seed = 1234;
  const auto b = generate_synthetic(quiet);
  CHECK(a[0].samples == a[1].samples);
  CHECK(a[0].samples == b[2].samples);
  CHECK(a[3].samples != a[0].samples);

  SyntheticSpec dup;
  dup.frequencies = {200, 200, 800};
  CHECK(thrown_code([&] { dup.validate(); }) == Errc::invalid_config);
  SyntheticSpec neg;
  neg.noise = -0.1;
  CHECK(thrown_code([&] { neg.validate(); }) == Errc::invalid_config);
}

TEST_CASE("ingest writes cache and split, deterministically") {
  Workspace w;
  REQUIRE(w.cli("ingest --manifest " + q(w.path("corpus/manifest.csv")) + " --out " + q(w.path("a"))) == 0);
  REQUIRE(w.cli("ingest --manifest " + q(w.path("corpus/manifest.csv")) + " --out " + q(w.path("b"))) == 0);
  CHECK(read_segment_cache(w.path("a/segments.rsht")).size() == 30);
  CHECK(count_lines(w.path("a/split.csv")) == 31);
  CHECK(slurp(w.path("a/split.csv")) == slurp(w.path("b/split.csv")));
  CHECK(slurp(w.path("a/segments.rsht")) == slurp(w.path("b/segments.rsht")));
  CHECK(fs::exists(w.path("a/config.json")));
  CHECK(fs::exists(w.path("a/run.log")));

  std::ofstream(w.path("empty.csv")) << "file_path,subject_id,label\n";
  CHECK(w.cli("ingest --manifest " + q(w.path("empty.csv")) + " --out " + q(w.path("c"))) == 2);
  CHECK(w.log().find("EmptyDataset") != std::string::npos);
}

TEST_CASE("train, extract, classify and report through the CLI") {
  Workspace w;
  const std::string cfg = " --config " + q(w.config);
  REQUIRE(w.cli("ingest --manifest " + q(w.path("corpus/manifest.csv")) + " --out " + q(w.path("in")) + cfg) == 0);
  const std::string cache = q(w.path("in/segments.rsht"));

  REQUIRE(w.cli("train --cache " + cache + " --out " + q(w.path("tr")) + cfg) == 0);
  CHECK(fs::exists(w.path("tr/model.rsck")));
  CHECK(count_lines(w.path("tr/history.csv")) == 41);
  REQUIRE(w.cli("train --cache " + cache + " --epochs 5 --out " + q(w.path("tr5")) + cfg) == 0);
  CHECK(count_lines(w.path("tr5/history.csv")) == 6);
  const auto echoed = nlohmann::json::parse(slurp(w.path("tr5/config.json")));
  CHECK(echoed["train"]["epochs"] == 5);
  CHECK(echoed["architecture"] == Architecture::parse(kSmallArch).to_string());

  auto bytes = read_file(w.path("in/segments.rsht"));
  bytes[0] = 'Q';
  write_file(w.path("broken.rsht"), bytes);
  CHECK(w.cli("train --cache " + q(w.path("broken.rsht")) + " --split " + q(w.path("in/split.csv")) + " --out " +
              q(w.path("x")) + cfg) == 2);
  CHECK(w.log().find("CorruptCache") != std::string::npos);

  const std::string ckpt = q(w.path("tr/model.rsck"));
  REQUIRE(w.cli("extract --checkpoint " + ckpt + " --cache " + cache + " --out " + q(w.path("f1")) + cfg) == 0);
  REQUIRE(w.cli("extract --checkpoint " + ckpt + " --cache " + cache + " --out " + q(w.path("f2")) + cfg) == 0);
  CHECK(slurp(w.path("f1/features.rsft")) == slurp(w.path("f2/features.rsft")));
  const auto fset = read_feature_file(w.path("f1/features.rsft"));
  CHECK(fset.values.rows() == 30);
  CHECK(fset.values.cols() == 200);

  // width-100 cache against a width-210 checkpoint
  std::vector<AudioSegment> narrow(2);
  for (auto& s : narrow) s.samples = Eigen::VectorXf::Ones(100 * 100);
  write_segment_cache(w.path("narrow.rsht"), narrow);
  CHECK(w.cli("extract --checkpoint " + ckpt + " --cache " + q(w.path("narrow.rsht")) + " --out " + q(w.path("f3"))) == 2);
  CHECK(w.log().find("ShapeError") != std::string::npos);

  const std::string feats = " --features " + q(w.path("f1/features.rsft")) + " --split " + q(w.path("in/split.csv"));
  for (const char* m : {"knn", "svm", "dt"}) {
    REQUIRE(w.cli(std::string("classify") + feats + " --method " + m + " --out " + q(w.path("cl")) + cfg) == 0);
    CHECK(fs::exists(w.path(std::string("cl/model_") + m + ".rscl")));
  }
  const auto knn = load_report(w.path("cl/report_knn.json"));
  CHECK(knn.method == "KNN");
  CHECK(knn.params["k"] == 3);
  const auto dt = load_report(w.path("cl/report_dt.json"));
  CHECK(dt.train_accuracy == 1.0);
  CHECK(dt.params["prune"] == false);
  REQUIRE(w.cli("classify" + feats + " --method dt --prune --out " + q(w.path("pr")) + cfg) == 0);
  CHECK(load_report(w.path("pr/report_dt.json")).params["prune"] == true);
  CHECK(w.cli("classify" + feats + " --method forest --out " + q(w.path("cl")) + cfg) == 64);
  CHECK(w.cli("classify" + feats + " --method knn --k 2 --out " + q(w.path("k2")) + cfg) == 0);
  CHECK(load_report(w.path("k2/report_knn.json")).params["k"] == 2);

  const std::string all = q(w.path("tr/report_cnn.json")) + " " + q(w.path("cl/report_knn.json")) + " " +
                          q(w.path("cl/report_svm.json")) + " " + q(w.path("cl/report_dt.json"));
  REQUIRE(w.cli("report " + all + " --out " + q(w.path("rep"))) == 0);
  std::istringstream table(slurp(w.path("rep/table.txt")));
  std::vector<std::string> lines;
  for (std::string l; std::getline(table, l);) lines.push_back(l);
  REQUIRE(lines.size() == 6);
  CHECK(lines[2].rfind("CNN", 0) == 0);
  CHECK(lines[3].rfind("KNN", 0) == 0);
  CHECK(lines[4].rfind("SVM", 0) == 0);
  CHECK(lines[5].rfind("DT", 0) == 0);
  CHECK(count_lines(w.path("rep/table.csv")) == 5);

  REQUIRE(w.cli("report " + q(w.path("cl/report_knn.json"))) == 0);
  CHECK(count_lines(w.path("cli.log")) == 3);
  REQUIRE(w.cli("report " + q(w.path("cl/report_knn.json")) + " " + q(w.path("k2/report_knn.json"))) == 0);
  CHECK(w.log().find("warning: duplicate method 'KNN'") != std::string::npos);
  CHECK(w.log().find("KNN#2") != std::string::npos);
}

TEST_CASE("usage errors exit 64") {
  Workspace w;
  CHECK(w.cli("") == 64);
  CHECK(w.cli("frobnicate") == 64);
  CHECK(w.cli("train --no-such-flag") == 64);
  CHECK(w.cli("report") == 64);
  CHECK(w.cli("--help") == 0);
}

TEST_CASE("subject split keeps subjects disjoint") {
  test::ScratchDir dir("subjects");
  std::vector<ManifestEntry> m;
  std::vector<float> two_windows(2 * kWindowLen, 0.1f);
  for (int i = 0; i < 12; ++i) {
    const std::string name = "r" + std::to_string(i) + ".wav";
    write_file(dir / name, encode_wav_float32(two_windows, kSampleRate));
    m.push_back({name, "p" + std::to_string(i / 2), i % 3});
  }
  write_manifest(dir / "m.csv", m);
  RunConfig cfg;
  cfg.split_mode = SplitMode::subject;
  cfg.test_fraction = 0.25;
  cfg.out = dir / "out";
  const auto r = cmd_ingest(dir / "m.csv", cfg);
  CHECK(r.segments == 24);
  // 2 segments per recording, 4 per subject
  CHECK(r.split.test.size() % 4 == 0);
  CHECK(!r.split.test.empty());
}
