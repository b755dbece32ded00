#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "rt/features.hpp"

namespace rt {

enum class KernelType { linear, rbf };

std::string_view to_string(KernelType kernel);
KernelType parse_kernel(std::string_view name);

struct Kernel {
  KernelType type = KernelType::rbf;
  double gamma = 1.0;

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
    if (type == KernelType::linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

struct SvmParams {
  KernelType kernel = KernelType::rbf;
  double gamma = 0.0;  // <= 0 selects 1 / (dim * variance of the training matrix)
  double c = 1.0;
  double tol = 1e-3;   // stop when the maximal KKT violation gap drops below tol
  long max_iterations = 10'000'000;
};

/// Soft-margin binary machine for one class pair: `positive` is +1.
struct BinarySvm {
  ClassId positive = 0;
  ClassId negative = 1;
  FeatureMatrix support_vectors;
  Eigen::VectorXd alpha;  // dual coefficients in [0, C], one per support vector
  Eigen::VectorXd coef;   // alpha_i * y_i
  double rho = 0.0;       // f(x) = sum coef_i K(sv_i, x) - rho
  bool converged = true;
  long iterations = 0;

  double decision(const Kernel& kernel, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// One-vs-one ensemble over every class pair.
struct SvmModel {
  Kernel kernel;
  double c = 1.0;
  Eigen::Index dim = 0;
  std::vector<ClassId> classes;    // ascending
  std::vector<BinarySvm> machines; // pairs (classes[a], classes[b]) with a < b, lexicographic
  bool converged = true;
};

/// Solves each pairwise dual with SMO (maximal-violating-pair selection with
/// second-order choice of the partner index). Throws SingleClassError when
/// fewer than two classes are present. When a pair hits max_iterations the
/// best-effort machine is kept and `converged` is cleared.
SvmModel svm_fit(const FeatureMatrix& features, std::span<const ClassId> labels,
                 const SvmParams& params = {});

/// Pairwise vote; ties go to the class with the larger summed decision value
/// in its favour, then to the lower class id.
ClassId svm_predict_one(const SvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query);
std::vector<ClassId> svm_predict(const SvmModel& model, const FeatureMatrix& queries, int threads = 1);

}  // namespace rt
