#include "rt/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rt/parallel.hpp"

namespace rt {

namespace {

constexpr double kTau = 1e-12;

Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const FeatureMatrix& x) {
  Eigen::MatrixXd gram = x * x.transpose();
  if (kernel.type == KernelType::linear) return gram;
  const Eigen::VectorXd sq = gram.diagonal();
  Eigen::MatrixXd k(gram.rows(), gram.cols());
  for (Eigen::Index j = 0; j < gram.cols(); ++j) {
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
      const double d2 = std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j));
      k(i, j) = std::exp(-kernel.gamma * d2);
    }
  }
  return k;
}

struct DualSolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;
  bool converged = true;
  long iterations = 0;
};

// Dual: min 1/2 a'Qa - e'a  s.t. 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
DualSolution solve_dual(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double c, double tol,
                        long max_iterations) {
  const Eigen::Index n = y.size();
  DualSolution s;
  s.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd& a = s.alpha;

  const auto at_upper = [&](Eigen::Index t) { return a[t] >= c; };
  const auto at_lower = [&](Eigen::Index t) { return a[t] <= 0.0; };
  const auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * k(i, j); };

  s.converged = false;
  for (; s.iterations < max_iterations; ++s.iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!at_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n && i >= 0; ++t) {
      double grad_diff = 0.0, quad = 0.0;
      if (y[t] > 0) {
        if (at_lower(t)) continue;
        gmax2 = std::max(gmax2, grad[t]);
        grad_diff = gmax + grad[t];
        quad = k(i, i) + k(t, t) - 2.0 * y[i] * q(i, t);
      } else {
        if (at_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad[t]);
        grad_diff = gmax - grad[t];
        quad = k(i, i) + k(t, t) + 2.0 * y[i] * q(i, t);
      }
      if (grad_diff > 0.0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) {
      s.converged = true;
      break;
    }

    const double old_ai = a[i], old_aj = a[j];
    if (y[i] != y[j]) {
      double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) { a[j] = 0.0; a[i] = diff; }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) { a[i] = c; a[j] = c - diff; }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) { a[i] = c; a[j] = sum - c; }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) { a[j] = c; a[i] = sum - c; }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double dai = a[i] - old_ai, daj = a[j] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(i, t) * dai + q(j, t) * daj;
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (at_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  s.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  return s;
}

}  // namespace

std::string_view to_string(KernelType kernel) {
  return kernel == KernelType::linear ? "linear" : "rbf";
}

KernelType parse_kernel(std::string_view name) {
  if (name == "linear") return KernelType::linear;
  if (name == "rbf") return KernelType::rbf;
  throw Error(Errc::invalid_config, "unknown kernel '" + std::string(name) + "'");
}

double BinarySvm::decision(const Kernel& kernel, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double f = -rho;
  for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
    f += coef[i] * kernel(support_vectors.row(i), x);
  }
  return f;
}

SvmModel svm_fit(const FeatureMatrix& features, std::span<const ClassId> labels,
                 const SvmParams& params) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(Errc::length_mismatch, "svm features and labels differ in length");
  }
  if (!(params.c > 0.0)) throw Error(Errc::invalid_config, "C must be positive");
  if (!(params.tol > 0.0)) throw Error(Errc::invalid_config, "tol must be positive");
  const std::set<ClassId> present(labels.begin(), labels.end());
  if (present.size() < 2) {
    throw Error(Errc::single_class, "svm needs at least two classes, got " +
                                        std::to_string(present.size()));
  }

  SvmModel model;
  model.c = params.c;
  model.dim = features.cols();
  model.classes.assign(present.begin(), present.end());
  model.kernel.type = params.kernel;
  model.kernel.gamma = params.gamma;
  if (params.kernel == KernelType::rbf && !(params.gamma > 0.0)) {
    const double mean = features.mean();
    const double var = (features.array() - mean).square().mean();
    const double denom = static_cast<double>(features.cols()) * var;
    model.kernel.gamma = denom > 0.0 ? 1.0 / denom : 1.0;
  }

  for (std::size_t a = 0; a < model.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == model.classes[a] || labels[i] == model.classes[b]) {
          rows.push_back(static_cast<Eigen::Index>(i));
        }
      }
      FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), features.cols());
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        x.row(static_cast<Eigen::Index>(r)) = features.row(rows[r]);
        y[static_cast<Eigen::Index>(r)] = labels[static_cast<std::size_t>(rows[r])] == model.classes[a] ? 1.0 : -1.0;
      }

      const auto sol = solve_dual(kernel_matrix(model.kernel, x), y, params.c, params.tol,
                                  params.max_iterations);
      BinarySvm m;
      m.positive = model.classes[a];
      m.negative = model.classes[b];
      m.rho = sol.rho;
      m.converged = sol.converged;
      m.iterations = sol.iterations;
      std::vector<Eigen::Index> sv;
      for (Eigen::Index t = 0; t < y.size(); ++t) {
        if (sol.alpha[t] > 0.0) sv.push_back(t);
      }
      m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
      m.alpha.resize(static_cast<Eigen::Index>(sv.size()));
      m.coef.resize(static_cast<Eigen::Index>(sv.size()));
      for (std::size_t s = 0; s < sv.size(); ++s) {
        const auto e = static_cast<Eigen::Index>(s);
        m.support_vectors.row(e) = x.row(sv[s]);
        m.alpha[e] = sol.alpha[sv[s]];
        m.coef[e] = sol.alpha[sv[s]] * y[sv[s]];
      }
      model.converged = model.converged && m.converged;
      model.machines.push_back(std::move(m));
    }
  }
  return model;
}

ClassId svm_predict_one(const SvmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& query) {
  if (query.size() != model.dim) {
    throw Error(Errc::dimension_mismatch, "query has " + std::to_string(query.size()) +
                                              " features, model " + std::to_string(model.dim));
  }
  if (model.machines.empty()) throw Error(Errc::empty_model, "svm model has no machines");
  const std::size_t n = model.classes.size();
  std::vector<int> votes(n, 0);
  std::vector<double> margin(n, 0.0);
  std::size_t m = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b, ++m) {
      const double f = model.machines[m].decision(model.kernel, query);
      ++votes[f > 0.0 ? a : b];
      margin[a] += f;
      margin[b] -= f;
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best])) best = c;
  }
  return model.classes[best];
}

std::vector<ClassId> svm_predict(const SvmModel& model, const FeatureMatrix& queries, int threads) {
  std::vector<ClassId> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = svm_predict_one(model, queries.row(static_cast<Eigen::Index>(i)));
  });
  return out;
}

}  // namespace rt
