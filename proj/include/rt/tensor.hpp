#pragma once

#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rt/error.hpp"

namespace rt {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major N-d array. Values live in an Eigen column vector so whole
/// tensors compose with Eigen expressions; `matrix()` reinterprets the
/// storage for GEMM-backed kernels.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(Vector::Zero(shape_size(shape_))) {}

  Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw Error(Errc::shape_error, "value count " + std::to_string(values_.size()) +
                                         " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  // Row-major element access for rank-3 tensors [c, y, x].
  Scalar& operator()(Index c, Index y, Index x) { return values_[(c * shape_[1] + y) * shape_[2] + x]; }
  Scalar operator()(Index c, Index y, Index x) const {
    return values_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Column-major view of the flat storage: element (r, c) is value[c * rows + r].
  Eigen::Map<Matrix> matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return {values_.data(), rows, cols};
  }
  Eigen::Map<const Matrix> matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return {values_.data(), rows, cols};
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>());
  }

  bool all_finite() const { return values_.allFinite(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  void check_view(Index rows, Index cols) const {
    if (rows * cols != values_.size()) {
      throw Error(Errc::shape_error, "cannot view " + shape_string(shape_) + " as " +
                                         std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Shape shape_;
  Vector values_;
};

}  // namespace rt
