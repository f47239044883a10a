#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace bmpmace {

using complex_t = std::complex<double>;

/// Dense row-major 2D array. Value semantics; copies own their storage.
template <typename T>
class Array2D {
 public:
  using value_type = T;

  Array2D() = default;
  Array2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Array2D(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Array2D: data size does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const Array2D& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  Array2D& operator+=(const Array2D& o) {
    check_shape(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Array2D& operator-=(const Array2D& o) {
    check_shape(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  template <typename S>
  Array2D& operator*=(const S& s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Array2D operator+(Array2D a, const Array2D& b) { return a += b; }
  friend Array2D operator-(Array2D a, const Array2D& b) { return a -= b; }
  template <typename S>
  friend Array2D operator*(Array2D a, const S& s) { return a *= s; }
  template <typename S>
  friend Array2D operator*(const S& s, Array2D a) { return a *= s; }

  bool operator==(const Array2D& o) const = default;

  void check_shape(const Array2D& o, const char* where) const {
    if (!same_shape(o))
      throw std::invalid_argument(std::string(where) + ": shape mismatch (" + std::to_string(rows_) + "x" +
                                  std::to_string(cols_) + " vs " + std::to_string(o.rows_) + "x" +
                                  std::to_string(o.cols_) + ")");
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using ComplexImage = Array2D<complex_t>;
using RealImage = Array2D<double>;

/// Squared 2-norm, summed in index order.
template <typename T>
double squared_norm(const Array2D<T>& a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return s;
}

template <typename T>
double norm2(const Array2D<T>& a) {
  return std::sqrt(squared_norm(a));
}

/// <a, b> = sum conj(a) * b
inline complex_t inner(const ComplexImage& a, const ComplexImage& b) {
  a.check_shape(b, "inner");
  complex_t s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

template <typename T>
bool all_finite(const Array2D<T>& a) {
  for (const auto& v : a) {
    if constexpr (std::is_same_v<T, complex_t>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    } else {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

/// Element-wise product; shapes must match.
template <typename A, typename B>
auto hadamard(const Array2D<A>& a, const Array2D<B>& b) {
  using R = decltype(std::declval<A>() * std::declval<B>());
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("hadamard: shape mismatch");
  Array2D<R> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline RealImage magnitude(const ComplexImage& a) {
  RealImage out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i]);
  return out;
}

inline ComplexImage to_complex(const RealImage& a) {
  ComplexImage out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  return out;
}

/// A stack of equally shaped 2D arrays indexed by scan location.
template <typename T>
using Stack = std::vector<Array2D<T>>;

using PatchStack = Stack<complex_t>;
using ProbeStack = Stack<complex_t>;

template <typename T>
double squared_norm(const Stack<T>& s) {
  double acc = 0.0;
  for (const auto& a : s) acc += squared_norm(a);
  return acc;
}

template <typename T>
double norm2(const Stack<T>& s) {
  return std::sqrt(squared_norm(s));
}

}  // namespace bmpmace
