#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rt/audio.hpp"
#include "rt/training.hpp"

namespace rt {

/// counts(t, p): samples of true class t predicted as p.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  std::int64_t total() const { return counts.sum(); }
  int classes() const { return static_cast<int>(counts.rows()); }
};

ConfusionMatrix confusion(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                          int num_classes);

enum class Averaging { weighted, macro };

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Eigen::VectorXd class_precision;
  Eigen::VectorXd class_recall;
  Eigen::VectorXd class_f1;
  bool zero_division = false;  // some per-class ratio had a zero denominator and was set to 0
};

/// Per-class P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), each 0 when its
/// denominator is 0, averaged by class support (weighted) or uniformly.
Metrics metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::weighted);

struct EvalReport {
  std::string method;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix confusion;
  bool zero_division = false;
  nlohmann::json params = nlohmann::json::object();
};

/// Test-set metrics from `test_confusion` plus the given train accuracy.
EvalReport make_report(std::string method, double train_accuracy,
                       const ConfusionMatrix& test_confusion,
                       Averaging averaging = Averaging::weighted);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

struct RenderedTable {
  std::string text;
  std::string csv;  // method,train_acc,test_acc,precision,recall,f1
};

/// Five metric columns in fixed order, three decimals.
RenderedTable report_table(std::span<const EvalReport> reports);

/// Renames repeated method names to NAME#2, NAME#3, ...; returns one
/// warning line per rename.
std::vector<std::string> disambiguate_methods(std::vector<EvalReport>& reports);

/// `epoch,train_acc,test_acc`, one row per epoch.
std::string epoch_curve(const EpochHistory& history);

}  // namespace rt
