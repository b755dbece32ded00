#pragma once

#include <span>
#include <vector>

#include "rt/features.hpp"

namespace rt {

struct KnnModel {
  FeatureMatrix points;
  std::vector<ClassId> labels;
  int k = 3;
};

KnnModel knn_fit(FeatureMatrix features, std::span<const ClassId> labels, int k = 3);

/// Majority label among the k nearest training rows by Euclidean distance.
/// Equal distances rank the lower training index first; a tied vote goes to
/// the tied class whose member appears first in that ranking (the single
/// nearest neighbour when its class is among the tied).
ClassId knn_predict_one(const KnnModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query);
std::vector<ClassId> knn_predict(const KnnModel& model, const FeatureMatrix& queries, int threads = 1);

}  // namespace rt
