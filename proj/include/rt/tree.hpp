#pragma once

#include <span>
#include <vector>

#include "rt/features.hpp"

namespace rt {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;     // taken when value <= threshold
  int right = -1;
  ClassId label = 0;        // majority of `counts`, lowest class on ties
  std::vector<int> counts;  // training samples per class that reached this node

  bool is_leaf() const { return feature < 0; }
};

struct TreeParams {
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int max_depth = 0;  // 0 = unbounded
};

/// Nodes are stored in pre-order; the root is node 0.
struct TreeModel {
  std::vector<TreeNode> nodes;
  Eigen::Index dim = 0;
  int num_classes = 0;

  std::size_t leaf_count() const;
  int depth() const;
};

double gini(std::span<const int> counts);

/// CART growth: each node takes the (feature, threshold) pair with the
/// lowest weighted Gini impurity, thresholds being midpoints between
/// consecutive distinct values. Ties keep the lowest feature index, then the
/// lowest threshold. Growth stops at pure nodes, nodes smaller than
/// min_samples_split, max_depth, or when no feature varies.
TreeModel tree_fit(const FeatureMatrix& features, std::span<const ClassId> labels,
                   const TreeParams& params = {});

ClassId tree_predict_one(const TreeModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query);
std::vector<ClassId> tree_predict(const TreeModel& model, const FeatureMatrix& queries);

/// Reduced-error pruning: repeatedly collapses the internal node whose
/// replacement by its majority leaf gives the highest validation accuracy,
/// as long as that accuracy is not below the current one. Among equally good
/// candidates the first in pre-order wins. Returns a compacted copy.
TreeModel tree_prune(const TreeModel& model, const FeatureMatrix& validation,
                     std::span<const ClassId> labels);

}  // namespace rt
