#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcr/errors.hpp"

namespace gcr {

template <class T>
concept Scalar = std::floating_point<T>;

inline std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array. Rank 0 is a scalar, rank 1 a vector, rank 2 a matrix.
template <Scalar T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor vector(std::initializer_list<T> values) {
    return Tensor({values.size()}, std::vector<T>(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) noexcept { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const noexcept {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <Scalar T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <Scalar T>
T norm2(std::span<const T> a) {
  const T s = dot(a, a);
  constexpr T lo = std::numeric_limits<T>::min() / std::numeric_limits<T>::epsilon();
  if (s > lo && s <= std::numeric_limits<T>::max()) return std::sqrt(s);
  // squares would underflow or overflow: rescale first
  T big = 0;
  for (T x : a) big = std::max(big, std::abs(x));
  if (!(big > 0) || !std::isfinite(big)) return big;
  T acc = 0;
  for (T x : a) acc += (x / big) * (x / big);
  return big * std::sqrt(acc);
}

/// Plain-value cosine similarity. Throws DegenerateInputError on zero-norm input.
template <Scalar T>
T cosine(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  const T na = norm2(a);
  const T nb = norm2(b);
  if (!(na > 0) || !(nb > 0)) throw DegenerateInputError("cosine: zero-norm input");
  return dot(a, b) / (na * nb);
}

}  // namespace gcr
