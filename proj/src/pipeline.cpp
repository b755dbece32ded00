#include "rt/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "rt/binary_io.hpp"
#include "rt/checkpoint.hpp"
#include "rt/classifier_io.hpp"
#include "rt/features.hpp"
#include "rt/knn.hpp"
#include "rt/parallel.hpp"

namespace rt {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  if (window_len < 1 || matrix_width < 1) throw Error(Errc::invalid_config, "window_len and matrix_width must be positive");
  if (static_cast<long>(matrix_width) * matrix_width != window_len) {
    throw Error(Errc::invalid_config, "matrix_width^2 (" + std::to_string(matrix_width) + "^2) != window_len (" +
                                          std::to_string(window_len) + ")");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(Errc::invalid_config, "test_fraction must lie in (0, 1)");
  const Architecture arch = Architecture::parse(architecture);
  const Shape& in = arch.input_shape();
  if (in.size() != 3 || in[0] != 1 || in[1] != matrix_width || in[2] != matrix_width) {
    throw Error(Errc::invalid_config, "architecture input " + shape_string(in) + " does not take a " +
                                          std::to_string(matrix_width) + "x" + std::to_string(matrix_width) +
                                          " matrix");
  }
  if (arch.num_classes() != kNumClasses) {
    throw Error(Errc::invalid_config, "architecture must end in " + std::to_string(kNumClasses) + " outputs");
  }
  train.validate();
  if (knn.k < 1) throw Error(Errc::invalid_config, "knn.k must be >= 1");
  if (!(svm.c > 0.0)) throw Error(Errc::invalid_config, "svm.c must be > 0");
  if (!(svm.tol > 0.0)) throw Error(Errc::invalid_config, "svm.tol must be > 0");
  if (!(dt.validation_fraction > 0.0 && dt.validation_fraction < 1.0)) {
    throw Error(Errc::invalid_config, "dt.validation_fraction must lie in (0, 1)");
  }
  if (threads < 0) throw Error(Errc::invalid_config, "threads must be >= 0");
}

int RunConfig::worker_count() const { return threads > 0 ? threads : default_threads(); }

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = worker_count();
  return t;
}

json to_json(const RunConfig& c) {
  return {{"window_len", c.window_len},
          {"matrix_width", c.matrix_width},
          {"test_fraction", c.test_fraction},
          {"seed", c.seed},
          {"normalization", std::string(to_string(c.normalization))},
          {"split_mode", std::string(to_string(c.split_mode))},
          {"resample", c.resample},
          {"architecture", c.architecture},
          {"train",
           {{"epochs", c.train.epochs},
            {"lr", c.train.lr},
            {"momentum", c.train.momentum},
            {"batch_size", c.train.batch_size},
            {"double_precision", c.train.double_precision}}},
          {"knn", {{"k", c.knn.k}}},
          {"svm",
           {{"kernel", std::string(to_string(c.svm.kernel))},
            {"c", c.svm.c},
            {"gamma", c.svm.gamma},
            {"tol", c.svm.tol},
            {"max_iterations", c.svm.max_iterations}}},
          {"dt",
           {{"prune", c.dt.prune},
            {"validation_fraction", c.dt.validation_fraction},
            {"min_samples_split", c.dt.growth.min_samples_split},
            {"min_samples_leaf", c.dt.growth.min_samples_leaf},
            {"max_depth", c.dt.growth.max_depth}}},
          {"threads", c.threads},
          {"out", c.out.string()}};
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const json& j, RunConfig c) {
  try {
    if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
    take(j, "window_len", c.window_len);
    take(j, "matrix_width", c.matrix_width);
    take(j, "test_fraction", c.test_fraction);
    take(j, "seed", c.seed);
    if (j.contains("normalization")) c.normalization = parse_normalization(j.at("normalization").get<std::string>());
    if (j.contains("split_mode")) c.split_mode = parse_split_mode(j.at("split_mode").get<std::string>());
    take(j, "resample", c.resample);
    take(j, "architecture", c.architecture);
    if (j.contains("train")) {
      const json& t = j.at("train");
      take(t, "epochs", c.train.epochs);
      take(t, "lr", c.train.lr);
      take(t, "momentum", c.train.momentum);
      take(t, "batch_size", c.train.batch_size);
      take(t, "double_precision", c.train.double_precision);
    }
    if (j.contains("knn")) take(j.at("knn"), "k", c.knn.k);
    if (j.contains("svm")) {
      const json& s = j.at("svm");
      if (s.contains("kernel")) c.svm.kernel = parse_kernel(s.at("kernel").get<std::string>());
      take(s, "c", c.svm.c);
      take(s, "gamma", c.svm.gamma);
      take(s, "tol", c.svm.tol);
      take(s, "max_iterations", c.svm.max_iterations);
    }
    if (j.contains("dt")) {
      const json& d = j.at("dt");
      take(d, "prune", c.dt.prune);
      take(d, "validation_fraction", c.dt.validation_fraction);
      take(d, "min_samples_split", c.dt.growth.min_samples_split);
      take(d, "min_samples_leaf", c.dt.growth.min_samples_leaf);
      take(d, "max_depth", c.dt.growth.max_depth);
    }
    take(j, "threads", c.threads);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  const std::string text = to_json(cfg).dump(2) + "\n";
  write_file(cfg.out / "config.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

namespace {

void note(const ProgressLog& log, const std::string& line) {
  if (log) log(line);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<ClassId> cache_labels(const std::vector<CachedSegment>& cache) {
  std::vector<ClassId> labels;
  labels.reserve(cache.size());
  for (const auto& s : cache) labels.push_back(s.label);
  return labels;
}

SplitIndices resolve_split(const std::optional<fs::path>& explicit_path, const fs::path& sibling_of,
                           std::span<const ClassId> labels, const RunConfig& cfg) {
  fs::path path;
  if (explicit_path) {
    path = *explicit_path;
  } else if (fs::exists(sibling_of.parent_path() / "split.csv")) {
    path = sibling_of.parent_path() / "split.csv";
  }
  if (path.empty()) return make_split_indices(labels, {}, cfg.test_fraction, cfg.seed, SplitMode::stratified);

  SplitIndices split = read_split_csv(path);
  if (split.train.size() + split.test.size() != labels.size()) {
    throw Error(Errc::length_mismatch, path.string() + " covers " +
                                           std::to_string(split.train.size() + split.test.size()) +
                                           " segments, data has " + std::to_string(labels.size()));
  }
  if (split.train.empty() || split.test.empty()) {
    throw Error(Errc::empty_dataset, path.string() + " leaves the train or test subset empty");
  }
  return split;
}

SampleMatrix to_sample(const CachedSegment& s, Index width, Normalization mode) {
  if (s.samples.size() != width * width) {
    throw Error(Errc::shape_error, "cached segment of " + std::to_string(s.samples.size()) +
                                       " samples cannot form a " + std::to_string(width) + "x" +
                                       std::to_string(width) + " matrix");
  }
  AudioSegment seg;
  seg.samples = normalized(s.samples, mode);
  seg.label = s.label;
  return reshape_to_matrix(seg, width);
}

std::vector<SampleMatrix> gather_samples(const std::vector<CachedSegment>& cache,
                                         std::span<const std::size_t> rows, Index width,
                                         Normalization mode) {
  std::vector<SampleMatrix> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(to_sample(cache.at(i), width, mode));
  return out;
}

std::vector<ClassId> labels_of(std::span<const SampleMatrix> data) {
  std::vector<ClassId> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.label);
  return out;
}

double fraction_correct(std::span<const ClassId> truth, std::span<const ClassId> pred) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace

IngestResult cmd_ingest(const fs::path& manifest, const RunConfig& cfg, const ProgressLog& log) {
  cfg.validate();
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw Error(Errc::empty_dataset, manifest.string() + " lists no recordings");

  std::vector<std::vector<AudioSegment>> per_file(entries.size());
  parallel_for(entries.size(), cfg.worker_count(), [&](std::size_t i) {
    Recording rec = load_recording(entries[i], cfg.resample);
    per_file[i] = segment_recording(rec.samples, rec.meta, static_cast<std::size_t>(cfg.window_len));
  });

  std::vector<AudioSegment> segments;
  for (auto& v : per_file) {
    for (auto& s : v) segments.push_back(std::move(s));
  }
  if (segments.empty()) throw Error(Errc::empty_dataset, "no recording is long enough for one window");
  note(log, "ingest: " + std::to_string(entries.size()) + " recordings -> " +
                std::to_string(segments.size()) + " segments");

  std::vector<ClassId> labels;
  std::vector<std::string> subjects;
  for (const auto& s : segments) {
    labels.push_back(s.label);
    subjects.push_back(s.source->subject_id);
  }

  IngestResult r;
  r.recordings = entries.size();
  r.segments = segments.size();
  r.split = make_split_indices(labels, subjects, cfg.test_fraction, cfg.seed, cfg.split_mode);
  fs::create_directories(cfg.out);
  r.cache = cfg.out / "segments.rsht";
  r.split_csv = cfg.out / "split.csv";
  write_segment_cache(r.cache, segments);
  write_split_csv(r.split_csv, r.split, segments.size());
  echo_config(cfg);
  note(log, "ingest: split " + std::to_string(r.split.train.size()) + " train / " +
                std::to_string(r.split.test.size()) + " test");
  return r;
}

TrainOutcome cmd_train(const fs::path& cache_path, const std::optional<fs::path>& split_csv,
                       const RunConfig& cfg, const ProgressLog& log) {
  cfg.validate();
  const auto cache = read_segment_cache(cache_path);
  if (cache.empty()) throw Error(Errc::empty_dataset, cache_path.string() + " holds no segments");
  const auto labels = cache_labels(cache);
  const SplitIndices split = resolve_split(split_csv, cache_path, labels, cfg);

  const Architecture arch = Architecture::parse(cfg.architecture);
  DatasetSplit data;
  data.seed = cfg.seed;
  data.train = gather_samples(cache, split.train, cfg.matrix_width, cfg.normalization);
  data.test = gather_samples(cache, split.test, cfg.matrix_width, cfg.normalization);

  const TrainConfig tc = cfg.train_config();
  const auto on_epoch = [&](const EpochRecord& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %d/%d  loss %.4f  train %.3f  test %.3f", e.epoch, tc.epochs,
                  e.mean_loss, e.train_accuracy, e.test_accuracy);
    note(log, buf);
  };

  ModelCheckpoint ckpt{Network<float>(arch), cfg.seed, cfg.normalization, {}};
  if (tc.double_precision) {
    auto result = train(Network<double>::initialized(arch, cfg.seed), data, tc, on_epoch);
    ckpt.model = result.model.cast<float>();
    ckpt.history = std::move(result.history);
  } else {
    auto result = train(Network<float>::initialized(arch, cfg.seed), data, tc, on_epoch);
    ckpt.model = std::move(result.model);
    ckpt.history = std::move(result.history);
  }

  TrainOutcome out;
  fs::create_directories(cfg.out);
  out.checkpoint = cfg.out / "model.rsck";
  out.history_csv = cfg.out / "history.csv";
  out.report = cfg.out / "report_cnn.json";
  save_checkpoint(ckpt, out.checkpoint);
  write_text(out.history_csv, epoch_curve(ckpt.history));

  const auto truth = labels_of(data.test);
  const auto pred = predict_all(ckpt.model, std::span<const SampleMatrix>(data.test), tc.threads);
  const auto train_pred = predict_all(ckpt.model, std::span<const SampleMatrix>(data.train), tc.threads);
  const auto train_truth = labels_of(data.train);
  out.cnn_report = make_report("CNN", fraction_correct(train_truth, train_pred),
                               confusion(truth, pred, kNumClasses));
  out.cnn_report.params = {{"epochs", tc.epochs},
                           {"lr", tc.lr},
                           {"momentum", tc.momentum},
                           {"batch_size", tc.batch_size},
                           {"seed", cfg.seed},
                           {"architecture", arch.to_string()}};
  save_report(out.cnn_report, out.report);
  out.history = ckpt.history;
  echo_config(cfg);
  return out;
}

fs::path cmd_extract(const fs::path& checkpoint, const fs::path& cache_path, const RunConfig& cfg,
                     const ProgressLog& log) {
  const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
  const auto cache = read_segment_cache(cache_path);
  const Architecture& arch = ckpt.model.architecture();
  const Index width = arch.input_shape()[1];

  FeatureSet fs_out;
  fs_out.values.resize(static_cast<Index>(cache.size()), arch.feature_width());
  fs_out.labels = cache_labels(cache);
  if (!cache.empty()) {
    // fail fast on a width mismatch before spawning workers
    (void)to_sample(cache.front(), width, ckpt.normalization);
  }
  parallel_for(cache.size(), cfg.worker_count(), [&](std::size_t i) {
    const SampleMatrix m = to_sample(cache[i], width, ckpt.normalization);
    const Tensor<float> f = ckpt.model.features(ckpt.model.input_from(m.data));
    fs_out.values.row(static_cast<Index>(i)) = f.values().transpose();
  });

  fs::create_directories(cfg.out);
  const fs::path path = cfg.out / "features.rsft";
  write_feature_file(path, fs_out);
  note(log, "extract: " + std::to_string(cache.size()) + " x " + std::to_string(arch.feature_width()) +
                " features");
  return path;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::knn: return "knn";
    case Method::svm: return "svm";
    case Method::dt: return "dt";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "knn") return Method::knn;
  if (name == "svm") return Method::svm;
  if (name == "dt") return Method::dt;
  throw Error(Errc::usage, "unknown method '" + std::string(name) + "' (expected knn, svm or dt)");
}

ClassifyOutcome cmd_classify(const fs::path& features, const std::optional<fs::path>& split_csv,
                             Method method, const RunConfig& cfg, const ProgressLog& log) {
  cfg.validate();
  const FeatureSet set = read_feature_file(features);
  if (set.labels.empty()) throw Error(Errc::empty_dataset, features.string() + " holds no rows");
  const SplitIndices split = resolve_split(split_csv, features, set.labels, cfg);

  const FeatureMatrix x_train = gather_rows(set, split.train);
  const FeatureMatrix x_test = gather_rows(set, split.test);
  const auto y_train = gather_labels(set, split.train);
  const auto y_test = gather_labels(set, split.test);
  const int threads = cfg.worker_count();

  ClassifierBundle bundle{KnnModel{}, std::nullopt};
  json params;
  std::string label;
  switch (method) {
    case Method::knn: {
      bundle.scaler = Standardizer::fit(x_train);
      bundle.model = knn_fit(bundle.scaler->apply(x_train), y_train, cfg.knn.k);
      params = {{"k", cfg.knn.k}, {"standardized", true}};
      label = "KNN";
      break;
    }
    case Method::svm: {
      bundle.scaler = Standardizer::fit(x_train);
      SvmModel m = svm_fit(bundle.scaler->apply(x_train), y_train, cfg.svm);
      params = {{"kernel", std::string(to_string(m.kernel.type))},
                {"c", m.c},
                {"gamma", m.kernel.gamma},
                {"tol", cfg.svm.tol},
                {"converged", m.converged},
                {"standardized", true}};
      if (!m.converged) note(log, "classify: warning: SVM hit max_iterations before converging");
      bundle.model = std::move(m);
      label = "SVM";
      break;
    }
    case Method::dt: {
      TreeModel tree;
      if (cfg.dt.prune) {
        const SplitIndices inner =
            make_split_indices(y_train, {}, cfg.dt.validation_fraction, cfg.seed, SplitMode::stratified);
        FeatureMatrix grow(static_cast<Index>(inner.train.size()), x_train.cols());
        FeatureMatrix val(static_cast<Index>(inner.test.size()), x_train.cols());
        std::vector<ClassId> y_grow, y_val;
        for (std::size_t i = 0; i < inner.train.size(); ++i) {
          grow.row(static_cast<Index>(i)) = x_train.row(static_cast<Index>(inner.train[i]));
          y_grow.push_back(y_train[inner.train[i]]);
        }
        for (std::size_t i = 0; i < inner.test.size(); ++i) {
          val.row(static_cast<Index>(i)) = x_train.row(static_cast<Index>(inner.test[i]));
          y_val.push_back(y_train[inner.test[i]]);
        }
        tree = tree_prune(tree_fit(grow, y_grow, cfg.dt.growth), val, y_val);
      } else {
        tree = tree_fit(x_train, y_train, cfg.dt.growth);
      }
      params = {{"prune", cfg.dt.prune},
                {"nodes", tree.nodes.size()},
                {"leaves", tree.leaf_count()},
                {"depth", tree.depth()}};
      if (cfg.dt.prune) params["validation_fraction"] = cfg.dt.validation_fraction;
      bundle.model = std::move(tree);
      label = "DT";
      break;
    }
  }

  const auto train_pred = bundle.predict(x_train, threads);
  const auto test_pred = bundle.predict(x_test, threads);

  ClassifyOutcome out;
  out.report = make_report(label, fraction_correct(y_train, train_pred), confusion(y_test, test_pred, kNumClasses));
  out.report.params = std::move(params);
  fs::create_directories(cfg.out);
  const std::string m(to_string(method));
  out.model = cfg.out / ("model_" + m + ".rscl");
  out.report_path = cfg.out / ("report_" + m + ".json");
  save_classifier(bundle, out.model);
  save_report(out.report, out.report_path);
  echo_config(cfg);
  char buf[128];
  std::snprintf(buf, sizeof buf, "classify %s: train %.3f  test %.3f", m.c_str(), out.report.train_accuracy,
                out.report.test_accuracy);
  note(log, buf);
  return out;
}

ReportOutcome cmd_report(const std::vector<fs::path>& paths, const std::optional<fs::path>& out) {
  if (paths.empty()) throw Error(Errc::usage, "report needs at least one report file");
  std::vector<EvalReport> reports;
  for (const auto& p : paths) reports.push_back(load_report(p));
  ReportOutcome r;
  r.warnings = disambiguate_methods(reports);
  r.table = report_table(reports);
  if (out) {
    fs::create_directories(*out);
    write_text(*out / "table.txt", r.table.text);
    write_text(*out / "table.csv", r.table.csv);
  }
  return r;
}

SyntheticCorpus cmd_synth(const SyntheticSpec& spec, const fs::path& out) {
  return write_synthetic_corpus(spec, out);
}

}  // namespace rt
