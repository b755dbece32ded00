#include "rt/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace rt {

namespace {

ClassId majority(std::span<const int> counts) {
  return static_cast<ClassId>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// n_s * gini(side) == n_s - sum_c count_c^2 / n_s
double weighted_impurity(std::span<const int> counts, int n) {
  if (n == 0) return 0.0;
  double sq = 0.0;
  for (int c : counts) sq += static_cast<double>(c) * c;
  return n - sq / n;
}

class Grower {
 public:
  Grower(const FeatureMatrix& x, std::span<const ClassId> y, const TreeParams& p, int classes)
      : x_(x), y_(y), params_(p), classes_(classes) {}

  int grow(std::vector<Eigen::Index>& rows, int depth, std::vector<TreeNode>& nodes) {
    TreeNode node;
    node.counts.assign(static_cast<std::size_t>(classes_), 0);
    for (Eigen::Index r : rows) ++node.counts[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])];
    node.label = majority(node.counts);
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);

    const auto n = static_cast<int>(rows.size());
    const bool pure = std::count(node.counts.begin(), node.counts.end(), 0) >= classes_ - 1;
    if (pure || n < params_.min_samples_split ||
        (params_.max_depth > 0 && depth >= params_.max_depth)) {
      return id;
    }

    const auto split = best_split(rows, node.counts);
    if (split.feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (Eigen::Index r : rows) {
      (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes[static_cast<std::size_t>(id)].feature = split.feature;
    nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int l = grow(left, depth + 1, nodes);
    nodes[static_cast<std::size_t>(id)].left = l;
    const int r = grow(right, depth + 1, nodes);
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
  };

  Split best_split(const std::vector<Eigen::Index>& rows, const std::vector<int>& total) const {
    const auto n = static_cast<int>(rows.size());
    const double eps = 1e-12 * n;
    double best = std::numeric_limits<double>::infinity();
    Split split;
    std::vector<std::pair<double, ClassId>> vals(rows.size());
    std::vector<int> left(static_cast<std::size_t>(classes_)), right(left.size());

    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        vals[i] = {x_(rows[i], f), y_[static_cast<std::size_t>(rows[i])]};
      }
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (vals.front().first == vals.back().first) continue;

      std::fill(left.begin(), left.end(), 0);
      right = total;
      for (int p = 0; p + 1 < n; ++p) {
        const auto c = static_cast<std::size_t>(vals[static_cast<std::size_t>(p)].second);
        ++left[c];
        --right[c];
        const double lo = vals[static_cast<std::size_t>(p)].first;
        const double hi = vals[static_cast<std::size_t>(p) + 1].first;
        if (lo == hi) continue;
        const int nl = p + 1, nr = n - nl;
        if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
        const double score = weighted_impurity(left, nl) + weighted_impurity(right, nr);
        if (score < best - eps) {
          best = score;
          split.feature = static_cast<int>(f);
          double t = lo + (hi - lo) / 2.0;
          if (!(t >= lo && t < hi)) t = lo;  // adjacent doubles
          split.threshold = t;
        }
      }
    }
    return split;
  }

  const FeatureMatrix& x_;
  std::span<const ClassId> y_;
  TreeParams params_;
  int classes_;
};

int leaf_for(const TreeModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  int id = 0;
  while (!m.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& n = m.nodes[static_cast<std::size_t>(id)];
    id = q[n.feature] <= n.threshold ? n.left : n.right;
  }
  return id;
}

void copy_preorder(const std::vector<TreeNode>& src, int id, std::vector<TreeNode>& dst) {
  TreeNode node = src[static_cast<std::size_t>(id)];
  const int out = static_cast<int>(dst.size());
  dst.push_back(node);
  if (node.is_leaf()) {
    dst.back().left = dst.back().right = -1;
    return;
  }
  const int l = static_cast<int>(dst.size());
  copy_preorder(src, node.left, dst);
  const int r = static_cast<int>(dst.size());
  copy_preorder(src, node.right, dst);
  dst[static_cast<std::size_t>(out)].left = l;
  dst[static_cast<std::size_t>(out)].right = r;
}

}  // namespace

double gini(std::span<const int> counts) {
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  return n == 0 ? 0.0 : weighted_impurity(counts, n) / n;
}

std::size_t TreeModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int TreeModel::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

TreeModel tree_fit(const FeatureMatrix& features, std::span<const ClassId> labels,
                   const TreeParams& params) {
  if (features.rows() == 0) throw Error(Errc::empty_dataset, "tree needs training rows");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(Errc::length_mismatch, "tree features and labels differ in length");
  }
  for (ClassId l : labels) {
    if (l < 0) throw Error(Errc::invalid_class, "negative class id");
  }
  TreeModel model;
  model.dim = features.cols();
  model.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(features.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Grower(features, labels, params, model.num_classes).grow(rows, 0, model.nodes);
  return model;
}

ClassId tree_predict_one(const TreeModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query) {
  if (model.nodes.empty()) throw Error(Errc::empty_model, "tree has no nodes");
  if (query.size() != model.dim) {
    throw Error(Errc::dimension_mismatch, "query has " + std::to_string(query.size()) +
                                              " features, tree " + std::to_string(model.dim));
  }
  return model.nodes[static_cast<std::size_t>(leaf_for(model, query))].label;
}

std::vector<ClassId> tree_predict(const TreeModel& model, const FeatureMatrix& queries) {
  std::vector<ClassId> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out.push_back(tree_predict_one(model, queries.row(i)));
  return out;
}

TreeModel tree_prune(const TreeModel& model, const FeatureMatrix& validation,
                     std::span<const ClassId> labels) {
  if (validation.rows() == 0) throw Error(Errc::empty_validation, "pruning needs validation rows");
  if (static_cast<std::size_t>(validation.rows()) != labels.size()) {
    throw Error(Errc::length_mismatch, "validation features and labels differ in length");
  }
  if (validation.cols() != model.dim) {
    throw Error(Errc::dimension_mismatch, "validation width differs from tree");
  }

  TreeModel t = model;
  const std::size_t n = labels.size();

  // Root-to-leaf path of every validation sample in the current tree.
  std::vector<std::vector<int>> paths(n);
  for (std::size_t i = 0; i < n; ++i) {
    int id = 0;
    paths[i].push_back(id);
    while (!t.nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const TreeNode& node = t.nodes[static_cast<std::size_t>(id)];
      id = validation(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
      paths[i].push_back(id);
    }
  }

  std::vector<long> delta(t.nodes.size());
  while (true) {
    std::fill(delta.begin(), delta.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool correct = t.nodes[static_cast<std::size_t>(paths[i].back())].label == labels[i];
      for (std::size_t d = 0; d + 1 < paths[i].size(); ++d) {
        const int id = paths[i][d];
        delta[static_cast<std::size_t>(id)] +=
            static_cast<long>(t.nodes[static_cast<std::size_t>(id)].label == labels[i]) -
            static_cast<long>(correct);
      }
    }

    // Reachable internal nodes in pre-order.
    int best = -1;
    long best_delta = std::numeric_limits<long>::min();
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const TreeNode& node = t.nodes[static_cast<std::size_t>(id)];
      if (node.is_leaf()) continue;
      const long d = delta[static_cast<std::size_t>(id)];
      if (d > best_delta || (d == best_delta && id < best)) {
        best_delta = d;
        best = id;
      }
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
    if (best < 0 || best_delta < 0) break;

    t.nodes[static_cast<std::size_t>(best)].feature = -1;
    for (auto& path : paths) {
      const auto it = std::find(path.begin(), path.end(), best);
      if (it != path.end()) path.erase(it + 1, path.end());
    }
  }

  TreeModel out;
  out.dim = t.dim;
  out.num_classes = t.num_classes;
  copy_preorder(t.nodes, 0, out.nodes);
  return out;
}

}  // namespace rt
