#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tsrep/error.hpp"

namespace tsrep {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor. Storage is an Eigen column vector so whole-tensor
/// arithmetic can use Eigen expressions; `matrix(rows, cols)` reinterprets
/// the buffer as a row-major matrix without copying.
template <typename Scalar>
class DenseTensor {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMajorMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix<Scalar>>;

  DenseTensor() = default;

  explicit DenseTensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)) {
    for (Index e : shape_) {
      if (e < 0) throw DimensionError("negative extent in " + shape_str(shape_));
    }
    data_ = Storage::Constant(shape_numel(shape_), fill);
  }

  DenseTensor(Shape shape, std::vector<Scalar> values) : shape_(std::move(shape)) {
    if (shape_numel(shape_) != static_cast<Index>(values.size())) {
      throw DimensionError("shape " + shape_str(shape_) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    data_ = Eigen::Map<const Storage>(values.data(), values.size());
  }

  DenseTensor(Shape shape, std::initializer_list<Scalar> values)
      : DenseTensor(std::move(shape), std::vector<Scalar>(values)) {}

  DenseTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("shape " + shape_str(shape_) + " does not hold " +
                           std::to_string(data_.size()) + " values");
    }
  }

  static DenseTensor zeros_like(const DenseTensor& other) { return DenseTensor(other.shape_); }

  static DenseTensor scalar(Scalar v) { return DenseTensor(Shape{}, std::vector<Scalar>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                           shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(axis)];
  }
  Index size() const noexcept { return data_.size(); }

  Storage& vec() noexcept { return data_; }
  const Storage& vec() const noexcept { return data_; }
  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }
  std::span<Scalar> span() noexcept { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> span() const noexcept {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Scalar& operator[](Index i) { return data_[i]; }
  const Scalar& operator[](Index i) const { return data_[i]; }

  Index offset(std::initializer_list<Index> idx) const {
    if (static_cast<Index>(idx.size()) != rank()) {
      throw DimensionError("index rank mismatch for " + shape_str(shape_));
    }
    Index off = 0;
    std::size_t a = 0;
    for (Index i : idx) {
      off = off * shape_[a] + i;
      ++a;
    }
    return off;
  }
  Scalar& at(std::initializer_list<Index> idx) { return data_[offset(idx)]; }
  const Scalar& at(std::initializer_list<Index> idx) const { return data_[offset(idx)]; }

  /// Value of a rank-0 or single-element tensor.
  Scalar item() const {
    if (size() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  DenseTensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return DenseTensor(std::move(shape), data_);
  }

  MatrixMap matrix(Index rows, Index cols) {
    if (rows * cols != size()) throw DimensionError("matrix view size mismatch");
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    if (rows * cols != size()) throw DimensionError("matrix view size mismatch");
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  bool all_finite() const { return data_.allFinite(); }

  /// Bitwise value equality including shape.
  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.shape_ == b.shape_ &&
           std::equal(a.data_.data(), a.data_.data() + a.data_.size(), b.data_.data());
  }

 private:
  Shape shape_;
  Storage data_;
};

using Tensor = DenseTensor<double>;

/// Largest elementwise absolute difference; throws if shapes differ.
template <typename Scalar>
Scalar max_abs_diff(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.size() == 0) return Scalar(0);
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

}  // namespace tsrep
