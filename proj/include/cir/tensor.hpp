#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cir/error.hpp"

namespace cir {

// Dense row-major tensor. Rank is whatever the shape says; most code uses
// rank 1 (vectors) and rank 2 (row-major matrices).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<std::size_t> shape, T fill = T(0));
  BasicTensor(std::vector<std::size_t> shape, std::vector<T> data);

  static BasicTensor vector(std::initializer_list<T> values);
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view helpers; valid for rank-2 tensors.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  std::span<T> row(std::size_t r);
  std::span<const T> row(std::size_t r) const;

  void fill(T value);
  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

template <typename T>
void require_shape(const BasicTensor<T>& t, const std::vector<std::size_t>& shape,
                   const char* what) {
  if (t.shape() != shape) {
    fail(ErrorKind::kDimension, std::string(what) + ": expected shape " +
                                    shape_string(shape) + ", got " +
                                    shape_string(t.shape()));
  }
}

}  // namespace cir
