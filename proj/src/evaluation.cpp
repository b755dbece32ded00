#include "rt/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rt {

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

ConfusionMatrix confusion(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                          int num_classes) {
  if (truth.size() != predicted.size()) {
    throw Error(Errc::length_mismatch, std::to_string(truth.size()) + " true labels vs " +
                                           std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  cm.counts.setZero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const ClassId t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw Error(Errc::invalid_class, "label pair (" + std::to_string(t) + ", " +
                                           std::to_string(p) + ") outside " +
                                           std::to_string(num_classes) + " classes");
    }
    ++cm.counts(t, p);
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm, Averaging averaging) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw Error(Errc::empty_matrix, "confusion matrix has no samples");
  const Eigen::Index c = cm.counts.rows();
  const Eigen::VectorXd tp = cm.counts.diagonal().cast<double>();
  const Eigen::VectorXd support = cm.counts.rowwise().sum().cast<double>();
  const Eigen::VectorXd predicted = cm.counts.colwise().sum().transpose().cast<double>();

  Metrics m;
  m.class_precision.setZero(c);
  m.class_recall.setZero(c);
  m.class_f1.setZero(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    if (predicted[k] > 0) m.class_precision[k] = tp[k] / predicted[k]; else m.zero_division = true;
    if (support[k] > 0) m.class_recall[k] = tp[k] / support[k]; else m.zero_division = true;
    const double pr = m.class_precision[k] + m.class_recall[k];
    if (pr > 0) m.class_f1[k] = 2.0 * m.class_precision[k] * m.class_recall[k] / pr;
  }

  const double n = static_cast<double>(total);
  m.accuracy = tp.sum() / n;
  if (averaging == Averaging::weighted) {
    m.precision = support.dot(m.class_precision) / n;
    m.recall = support.dot(m.class_recall) / n;
    m.f1 = support.dot(m.class_f1) / n;
  } else {
    m.precision = m.class_precision.mean();
    m.recall = m.class_recall.mean();
    m.f1 = m.class_f1.mean();
  }
  return m;
}

EvalReport make_report(std::string method, double train_accuracy,
                       const ConfusionMatrix& test_confusion, Averaging averaging) {
  const Metrics m = metrics(test_confusion, averaging);
  EvalReport r;
  r.method = std::move(method);
  r.train_accuracy = train_accuracy;
  r.test_accuracy = m.accuracy;
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  r.confusion = test_confusion;
  r.zero_division = m.zero_division;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json cm = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.confusion.counts.cols(); ++j) row.push_back(r.confusion.counts(i, j));
    cm.push_back(std::move(row));
  }
  return {{"method", r.method},
          {"train_accuracy", r.train_accuracy},
          {"test_accuracy", r.test_accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"confusion", cm},
          {"zero_division", r.zero_division},
          {"params", r.params}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.train_accuracy = j.at("train_accuracy").get<double>();
    r.test_accuracy = j.at("test_accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    if (j.contains("confusion")) {
      const auto& cm = j.at("confusion");
      const auto n = static_cast<Eigen::Index>(cm.size());
      r.confusion.counts.setZero(n, n);
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
          r.confusion.counts(a, b) = cm.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)).get<std::int64_t>();
        }
      }
    }
    r.zero_division = j.value("zero_division", false);
    r.params = j.value("params", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_file, std::string("report JSON: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << to_json(report).dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open report " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::corrupt_file, path.string() + ": " + e.what());
  }
}

RenderedTable report_table(std::span<const EvalReport> reports) {
  static const std::vector<std::string> headers = {"Method",    "Train Accuracies", "Test Accuracies",
                                                   "Precision", "Recall",           "f1 score"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.method, fixed3(r.train_accuracy), fixed3(r.test_accuracy),
                    fixed3(r.precision), fixed3(r.recall), fixed3(r.f1)});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }

  std::ostringstream text;
  const auto emit = [&](const std::vector<std::string>& cells) {
    std::string line = pad_right(cells[0], width[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) line += "  " + pad_left(cells[c], width[c]);
    text << line << '\n';
  };
  emit(headers);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) rule += (c ? "  " : "") + std::string(width[c], '-');
  text << rule << '\n';
  for (const auto& row : rows) emit(row);

  std::ostringstream csv;
  csv << "method,train_acc,test_acc,precision,recall,f1\n";
  for (const auto& row : rows) {
    csv << row[0];
    for (std::size_t c = 1; c < row.size(); ++c) csv << ',' << row[c];
    csv << '\n';
  }
  return {text.str(), csv.str()};
}

std::vector<std::string> disambiguate_methods(std::vector<EvalReport>& reports) {
  std::vector<std::string> warnings;
  std::map<std::string, int> seen;
  for (auto& r : reports) {
    const int n = ++seen[r.method];
    if (n > 1) {
      const std::string renamed = r.method + "#" + std::to_string(n);
      warnings.push_back("duplicate method '" + r.method + "' renamed to '" + renamed + "'");
      r.method = renamed;
    }
  }
  return warnings;
}

std::string epoch_curve(const EpochHistory& history) {
  std::ostringstream out;
  out << "epoch,train_acc,test_acc\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", e.epoch, e.train_accuracy, e.test_accuracy);
    out << buf;
  }
  return out.str();
}

}  // namespace rt
