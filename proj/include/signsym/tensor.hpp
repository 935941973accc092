#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "signsym/errors.hpp"

namespace signsym {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array with an explicit shape.
///
/// Storage is a flat Eigen array so elementwise work composes as Eigen
/// expressions through values(); rank-2 views for products come from
/// matrix(), which treats dimension 0 as rows and folds the rest into columns.
/// A default-constructed tensor is "absent" (no shape, no data) and is used
/// for optional slots such as the missing weight of a pooling layer.
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Storage::Constant(static_cast<Eigen::Index>(element_count(shape_)), fill);
  }

  BasicTensor(Shape shape, Storage values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (static_cast<std::size_t>(data_.size()) != element_count(shape_))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& values)
      : BasicTensor(std::move(shape),
                    Storage(Eigen::Map<const Storage>(values.data(), static_cast<Eigen::Index>(values.size())))) {}

  static BasicTensor vector(std::initializer_list<Scalar> values) {
    return BasicTensor({values.size()}, std::vector<Scalar>(values));
  }

  static BasicTensor from_rows(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    std::vector<Scalar> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& row : rows) {
      if (row.size() != cols) throw DimensionError("ragged rows in tensor literal");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return BasicTensor({rows.size(), cols}, flat);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  bool absent() const { return shape_.empty(); }

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> span() { return {data_.data(), size()}; }
  std::span<const Scalar> span() const { return {data_.data(), size()}; }

  Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }
  Scalar operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

  Scalar& operator()(std::size_t r, std::size_t c) { return data_[static_cast<Eigen::Index>(r * cols() + c)]; }
  Scalar operator()(std::size_t r, std::size_t c) const {
    return data_[static_cast<Eigen::Index>(r * cols() + c)];
  }

  /// Leading dimension (batch rows for activations).
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() ? size() / rows() : 0; }

  MatrixMap matrix() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }

  /// Row i as a 1-D tensor (or trailing-shape tensor when rank > 2).
  BasicTensor row(std::size_t i) const {
    Shape tail(shape_.begin() + 1, shape_.end());
    if (tail.empty()) tail = {1};
    const auto n = static_cast<Eigen::Index>(cols());
    return BasicTensor(std::move(tail), Storage(data_.segment(static_cast<Eigen::Index>(i) * n, n)));
  }

  BasicTensor reshaped(Shape shape) const {
    if (element_count(shape) != size())
      throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return BasicTensor(std::move(shape), data_);
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    if (a.shape_ != b.shape_) return false;
    return std::equal(a.data_.data(), a.data_.data() + a.data_.size(), b.data_.data());
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (auto d : shape_)
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape_));
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
void require_finite(const BasicTensor<Scalar>& t, std::string_view what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite value in input");
}

template <typename Scalar>
void require_same_shape(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, std::string_view what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

/// a[m×k] · b[k×n].
template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  require_finite(a, "matmul");
  require_finite(b, "matmul");
  BasicTensor<Scalar> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> transpose(const BasicTensor<Scalar>& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + to_string(a.shape()));
  require_finite(a, "transpose");
  BasicTensor<Scalar> out({a.dim(1), a.dim(0)});
  out.matrix() = a.matrix().transpose();
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> hadamard(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_same_shape(a, b, "hadamard");
  require_finite(a, "hadamard");
  require_finite(b, "hadamard");
  return BasicTensor<Scalar>(a.shape(), typename BasicTensor<Scalar>::Storage(a.values() * b.values()));
}

/// Elementwise sign with sign(0) = 0.
template <typename Scalar>
BasicTensor<Scalar> sign_of(const BasicTensor<Scalar>& a) {
  require_finite(a, "sign_of");
  return BasicTensor<Scalar>(a.shape(), typename BasicTensor<Scalar>::Storage(a.values().sign()));
}

template <typename Scalar>
BasicTensor<Scalar> abs_of(const BasicTensor<Scalar>& a) {
  require_finite(a, "abs_of");
  return BasicTensor<Scalar>(a.shape(), typename BasicTensor<Scalar>::Storage(a.values().abs()));
}

template <typename Scalar>
BasicTensor<Scalar> zeros_like(const BasicTensor<Scalar>& a) {
  return BasicTensor<Scalar>(a.shape());
}

/// 64-bit FNV-1a over the shape and raw value bytes; stable across runs.
template <typename Scalar>
std::uint64_t content_hash(const BasicTensor<Scalar>& t, std::uint64_t h = 0xcbf29ce484222325ULL) {
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::uint64_t d : t.shape()) mix(&d, sizeof d);
  mix(t.data(), t.size() * sizeof(Scalar));
  return h;
}

}  // namespace signsym
