#include "cir/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace cir {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
BasicTensor<T>::BasicTensor(std::vector<std::size_t> shape, T fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_product(shape_) == data_.size(), ErrorKind::kDimension,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::vector(std::initializer_list<T> values) {
  return BasicTensor({values.size()}, std::vector<T>(values));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::matrix(
    std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::kDimension, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return BasicTensor({r, c}, std::move(data));
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  require(axis < shape_.size(), ErrorKind::kDimension,
          "axis " + std::to_string(axis) + " out of range for shape " +
              shape_string(shape_));
  return shape_[axis];
}

template <typename T>
std::span<T> BasicTensor<T>::row(std::size_t r) {
  const std::size_t c = shape_.size() == 2 ? shape_[1] : data_.size();
  return std::span<T>(data_).subspan(r * c, c);
}

template <typename T>
std::span<const T> BasicTensor<T>::row(std::size_t r) const {
  const std::size_t c = shape_.size() == 2 ? shape_[1] : data_.size();
  return std::span<const T>(data_).subspan(r * c, c);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T x) { return std::isfinite(x); });
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace cir
