#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "rt/features.hpp"
#include "rt/knn.hpp"
#include "rt/svm.hpp"
#include "rt/tree.hpp"

namespace test {

/// Exhaustive scan: all distances in long double, stable order by
/// (distance, index), majority over the first k, ties to the tied class
/// met first in that order.
inline rt::ClassId knn_oracle(const rt::FeatureMatrix& points, const std::vector<rt::ClassId>& labels,
                              const Eigen::RowVectorXd& q, int k) {
  std::vector<std::pair<long double, std::size_t>> d;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    long double s = 0;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      const long double diff = static_cast<long double>(points(i, j)) - q[j];
      s += diff * diff;
    }
    d.emplace_back(s, static_cast<std::size_t>(i));
  }
  std::stable_sort(d.begin(), d.end());
  std::map<rt::ClassId, int> votes;
  for (int i = 0; i < k; ++i) ++votes[labels[d[static_cast<std::size_t>(i)].second]];
  int best = 0;
  for (const auto& [c, n] : votes) best = std::max(best, n);
  for (int i = 0; i < k; ++i) {
    const rt::ClassId c = labels[d[static_cast<std::size_t>(i)].second];
    if (votes[c] == best) return c;
  }
  return -1;
}

struct KnnTrial {
  int queries = 0;
  int mismatches = 0;
};

/// 200 random 5-D training points in 3 classes and 50 queries per seed.
inline KnnTrial knn_trial(std::uint64_t seed, int k = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  rt::FeatureMatrix pts(200, 5);
  std::vector<rt::ClassId> labels(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<rt::ClassId>(rng() % 3);
    for (Eigen::Index j = 0; j < 5; ++j) pts(i, j) = g(rng) + 0.8 * labels[static_cast<std::size_t>(i)];
  }
  rt::FeatureMatrix qs(50, 5);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) qs(i, j) = g(rng) + 0.8;
  }
  const auto model = rt::knn_fit(pts, labels, k);
  const auto pred = rt::knn_predict(model, qs);
  KnnTrial t;
  for (Eigen::Index i = 0; i < 50; ++i) {
    ++t.queries;
    t.mismatches += pred[static_cast<std::size_t>(i)] != knn_oracle(pts, labels, qs.row(i), k);
  }
  return t;
}

/// XOR corners; returns training accuracy of the fitted model.
inline double xor_accuracy(rt::KernelType kernel) {
  rt::FeatureMatrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<rt::ClassId> y = {0, 0, 1, 1};
  rt::SvmParams p;
  p.kernel = kernel;
  p.gamma = 1.0;
  p.c = 10.0;
  const auto m = rt::svm_fit(x, y, p);
  const auto pred = rt::svm_predict(m, x);
  int hits = 0;
  for (std::size_t i = 0; i < 4; ++i) hits += pred[i] == y[i];
  return hits / 4.0;
}

/// Gini-optimal threshold on the 1-D fixture [1,2,3,4] -> [A,A,B,B],
/// enumerated by hand over the three midpoints.
inline double hand_enumerated_root_threshold() {
  const double xs[4] = {1, 2, 3, 4};
  const int ys[4] = {0, 0, 1, 1};
  double best_t = 0, best = 1e9;
  for (int cut = 1; cut < 4; ++cut) {
    const double t = (xs[cut - 1] + xs[cut]) / 2.0;
    double impurity = 0;
    for (int side = 0; side < 2; ++side) {
      int n = 0, a = 0;
      for (int i = 0; i < 4; ++i) {
        if ((xs[i] <= t) == (side == 0)) {
          ++n;
          a += ys[i] == 0;
        }
      }
      const double pa = static_cast<double>(a) / n, pb = 1.0 - pa;
      impurity += n / 4.0 * (1.0 - pa * pa - pb * pb);
    }
    if (impurity < best) {
      best = impurity;
      best_t = t;
    }
  }
  return best_t;
}

inline double fitted_root_threshold() {
  rt::FeatureMatrix x(4, 1);
  x << 1, 2, 3, 4;
  const std::vector<rt::ClassId> y = {0, 0, 1, 1};
  const auto tree = rt::tree_fit(x, y);
  return tree.nodes.at(0).threshold;
}

/// Goertzel power at each candidate frequency; the class is the index of
/// the strongest one. Independent of every pipeline stage.
inline int spectral_peak_class(const Eigen::VectorXf& x, const std::vector<double>& freqs, double rate) {
  int best = -1;
  double best_power = -1.0;
  for (std::size_t c = 0; c < freqs.size(); ++c) {
    const double w = 2.0 * std::numbers::pi * freqs[c] / rate;
    const double coeff = 2.0 * std::cos(w);
    double s1 = 0.0, s2 = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
      const double s0 = x[n] + coeff * s1 - s2;
      s2 = s1;
      s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    if (power > best_power) {
      best_power = power;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace test
