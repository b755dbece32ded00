#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rt/audio.hpp"
#include "rt/dataset.hpp"
#include "rt/evaluation.hpp"
#include "rt/svm.hpp"
#include "rt/synthetic.hpp"
#include "rt/training.hpp"
#include "rt/tree.hpp"

namespace rt {

struct KnnConfig {
  int k = 3;
};

struct DtConfig {
  bool prune = false;
  double validation_fraction = 0.2;  // share of the train split held out for pruning
  TreeParams growth;
};

/// Everything a run needs. The JSON form mirrors the field names; missing
/// keys keep their defaults.
struct RunConfig {
  int window_len = kWindowLen;
  int matrix_width = kMatrixWidth;
  double test_fraction = 206.0 / 2055.0;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::standardize;
  SplitMode split_mode = SplitMode::stratified;
  bool resample = false;
  std::string architecture = Architecture::reference().to_string();
  TrainConfig train;
  KnnConfig knn;
  SvmParams svm;
  DtConfig dt;
  int threads = 0;  // 0: RESHAPE_TRANSFER_THREADS or hardware concurrency
  std::filesystem::path out = ".";

  void validate() const;
  int worker_count() const;
  /// TrainConfig with the run seed and thread count applied.
  TrainConfig train_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Keys present in `j` override the corresponding fields of `base`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
/// Writes the effective configuration to `<cfg.out>/config.json`.
void echo_config(const RunConfig& cfg);

using ProgressLog = std::function<void(const std::string&)>;

struct IngestResult {
  std::size_t recordings = 0;
  std::size_t segments = 0;
  SplitIndices split;
  std::filesystem::path cache;
  std::filesystem::path split_csv;
};

/// Parses and segments every manifest entry; writes `segments.rsht` and
/// `split.csv` into cfg.out.
IngestResult cmd_ingest(const std::filesystem::path& manifest, const RunConfig& cfg,
                        const ProgressLog& log = {});

struct TrainOutcome {
  std::filesystem::path checkpoint;
  std::filesystem::path history_csv;
  std::filesystem::path report;
  EpochHistory history;
  EvalReport cnn_report;
};

/// Trains the CNN on the train rows of the split. Without an explicit split
/// file, `split.csv` next to the cache is used, else a fresh stratified split.
/// Writes `model.rsck`, `history.csv` and `report_cnn.json`.
TrainOutcome cmd_train(const std::filesystem::path& cache,
                       const std::optional<std::filesystem::path>& split_csv, const RunConfig& cfg,
                       const ProgressLog& log = {});

/// Writes `features.rsft`: flatten-layer activations for every cached segment.
std::filesystem::path cmd_extract(const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& cache, const RunConfig& cfg,
                                  const ProgressLog& log = {});

enum class Method { knn, svm, dt };
std::string_view to_string(Method m);
/// Throws a usage error for unknown names.
Method parse_method(std::string_view name);

struct ClassifyOutcome {
  std::filesystem::path model;
  std::filesystem::path report_path;
  EvalReport report;
};

/// Fits one classical model on the train rows of the feature file and
/// writes `model_<method>.rscl` and `report_<method>.json`.
ClassifyOutcome cmd_classify(const std::filesystem::path& features,
                             const std::optional<std::filesystem::path>& split_csv, Method method,
                             const RunConfig& cfg, const ProgressLog& log = {});

struct ReportOutcome {
  RenderedTable table;
  std::vector<std::string> warnings;
};

/// Renders the reports in the given order. With `out`, also writes
/// `table.txt` and `table.csv` there.
ReportOutcome cmd_report(const std::vector<std::filesystem::path>& reports,
                         const std::optional<std::filesystem::path>& out);

SyntheticCorpus cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace rt
