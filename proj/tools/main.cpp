#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "rt/pipeline.hpp"
#include "rt/runtime.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> k;
  std::optional<std::string> kernel;
  std::optional<double> c;
  std::optional<std::string> out;
  bool prune = false;
  CLI::Option* prune_flag = nullptr;
  bool resample = false;
  CLI::Option* resample_flag = nullptr;
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Random seed");
  cmd.add_option("--out", o.out, "Output directory");
}

rt::RunConfig effective_config(const Overrides& o) {
  rt::RunConfig cfg = o.config.empty() ? rt::RunConfig{} : rt::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.k) cfg.knn.k = *o.k;
  if (o.kernel) cfg.svm.kernel = rt::parse_kernel(*o.kernel);
  if (o.c) cfg.svm.c = *o.c;
  if (o.out) cfg.out = *o.out;
  if (o.prune_flag && o.prune_flag->count() > 0) cfg.dt.prune = o.prune;
  if (o.resample_flag && o.resample_flag->count() > 0) cfg.resample = o.resample;
  return cfg;
}

// Progress goes to stderr; timestamps only to <out>/run.log.
rt::ProgressLog make_log(const fs::path& dir) {
  return [dir](const std::string& line) {
    std::cerr << line << '\n';
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream log(dir / "run.log", std::ios::app);
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
  };
}

}  // namespace

int main(int argc, char** argv) {
  rt::configure_allocator();
  CLI::App app{"Audio-as-image CNN with classical classifiers on its pooled features"};
  app.require_subcommand(1);
  Overrides o;

  std::string manifest;
  auto* ingest = app.add_subcommand("ingest", "Segment a manifest of WAV files into a cache and split");
  ingest->add_option("--manifest", manifest, "CSV with file_path,subject_id,label")->required();
  o.resample_flag = ingest->add_flag("--resample,!--no-resample", o.resample, "Resample non-44100 Hz input");
  add_common(*ingest, o);

  std::string cache, split;
  auto* train = app.add_subcommand("train", "Train the CNN on a segment cache");
  train->add_option("--cache", cache, "Segment cache")->required();
  train->add_option("--split", split, "split.csv (default: next to the cache)");
  train->add_option("--epochs", o.epochs, "Training epochs");
  add_common(*train, o);

  std::string checkpoint;
  auto* extract = app.add_subcommand("extract", "Write pooled-layer features for every segment");
  extract->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  extract->add_option("--cache", cache, "Segment cache")->required();
  add_common(*extract, o);

  std::string features, method;
  auto* classify = app.add_subcommand("classify", "Fit knn, svm or dt on extracted features");
  classify->add_option("--features", features, "Feature file")->required();
  classify->add_option("--split", split, "split.csv (default: next to the features)");
  classify->add_option("--method", method, "knn | svm | dt")->required();
  classify->add_option("--k", o.k, "KNN neighbours");
  classify->add_option("--kernel", o.kernel, "SVM kernel: linear | rbf");
  classify->add_option("--c", o.c, "SVM box constraint");
  o.prune_flag = classify->add_flag("--prune,!--no-prune", o.prune, "Reduced-error pruning for dt");
  add_common(*classify, o);

  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "Combine report JSON files into one table");
  report->add_option("reports", report_files, "Report files, in row order")->required();
  report->add_option("--out", o.out, "Directory for table.txt and table.csv");

  rt::SyntheticSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the pure-tone test corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n-per-class", spec.n_per_class, "Segments per class");
  synth->add_option("--noise", spec.noise, "Uniform noise amplitude");
  synth->add_option("--freqs", spec.frequencies, "One frequency per class (Hz)")->delimiter(',');
  synth->add_option("--seed", spec.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rt::kExitOk : rt::kExitUsage;
  }

  try {
    if (*synth) {
      const auto corpus = rt::cmd_synth(spec, synth_out);
      std::cout << corpus.segments << " segments\n" << corpus.manifest.string() << '\n' << corpus.cache.string() << '\n';
      return rt::kExitOk;
    }
    if (*report) {
      std::optional<fs::path> out;
      if (o.out) out = *o.out;
      const auto r = rt::cmd_report({report_files.begin(), report_files.end()}, out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << r.table.text;
      return rt::kExitOk;
    }

    const rt::RunConfig cfg = effective_config(o);
    const auto log = make_log(cfg.out);
    const std::optional<fs::path> split_path = split.empty() ? std::nullopt : std::optional<fs::path>(split);
    if (*ingest) {
      rt::cmd_ingest(manifest, cfg, log);
    } else if (*train) {
      const auto r = rt::cmd_train(cache, split_path, cfg, log);
      std::cout << r.checkpoint.string() << '\n';
    } else if (*extract) {
      std::cout << rt::cmd_extract(checkpoint, cache, cfg, log).string() << '\n';
    } else if (*classify) {
      const auto r = rt::cmd_classify(features, split_path, rt::parse_method(method), cfg, log);
      std::cout << r.report_path.string() << '\n';
    }
    return rt::kExitOk;
  } catch (const rt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rt::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rt::kExitDataError;
  }
}
