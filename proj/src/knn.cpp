#include "rt/knn.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "rt/parallel.hpp"

namespace rt {

KnnModel knn_fit(FeatureMatrix features, std::span<const ClassId> labels, int k) {
  if (features.rows() == 0) throw Error(Errc::empty_model, "knn needs at least one training row");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(Errc::length_mismatch, "knn features and labels differ in length");
  }
  if (k < 1 || k > features.rows()) {
    throw Error(Errc::invalid_config, "k=" + std::to_string(k) + " with " +
                                          std::to_string(features.rows()) + " training rows");
  }
  return {std::move(features), {labels.begin(), labels.end()}, k};
}

ClassId knn_predict_one(const KnnModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query) {
  if (model.points.rows() == 0) throw Error(Errc::empty_model, "knn model is empty");
  if (query.size() != model.points.cols()) {
    throw Error(Errc::dimension_mismatch, "query has " + std::to_string(query.size()) +
                                              " features, model " +
                                              std::to_string(model.points.cols()));
  }
  const Eigen::Index n = model.points.rows();
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    dist[static_cast<std::size_t>(i)] = {(model.points.row(i) - query).squaredNorm(), i};
  }
  const auto k = static_cast<std::size_t>(model.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::map<ClassId, int> votes;
  for (std::size_t i = 0; i < k; ++i) ++votes[model.labels[static_cast<std::size_t>(dist[i].second)]];
  int top = 0;
  for (const auto& [label, count] : votes) top = std::max(top, count);
  for (std::size_t i = 0; i < k; ++i) {
    const ClassId label = model.labels[static_cast<std::size_t>(dist[i].second)];
    if (votes[label] == top) return label;
  }
  return model.labels[static_cast<std::size_t>(dist[0].second)];
}

std::vector<ClassId> knn_predict(const KnnModel& model, const FeatureMatrix& queries, int threads) {
  std::vector<ClassId> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = knn_predict_one(model, queries.row(static_cast<Eigen::Index>(i)));
  });
  return out;
}

}  // namespace rt
