#pragma once

// Orthonormal 2D DFT backed by FFTW.
//
// Plans are created once per (rows, cols, direction) under a lock with
// FFTW_ESTIMATE | FFTW_UNALIGNED, so a given shape always runs the same
// codelets regardless of buffer alignment. Execution uses the new-array
// interface, which FFTW guarantees is thread-safe.

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "bmpmace/array2d.hpp"

namespace bmpmace {

namespace detail {

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t rows, std::size_t cols, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    ComplexImage scratch(rows, cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

inline ComplexImage transform(ComplexImage field, int sign) {
  if (field.empty()) return field;
  fftw_plan p = FftPlanCache::instance().get(field.rows(), field.cols(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(field.data());
  fftw_execute_dft(p, buf, buf);
  field *= 1.0 / std::sqrt(static_cast<double>(field.size()));
  return field;
}

}  // namespace detail

/// Unitary forward DFT, DC at (0,0).
inline ComplexImage dft2(ComplexImage field) { return detail::transform(std::move(field), FFTW_FORWARD); }

/// Unitary inverse DFT, DC at (0,0).
inline ComplexImage idft2(ComplexImage field) { return detail::transform(std::move(field), FFTW_BACKWARD); }

/// Moves index 0 to the array center (floor(n/2)); matches numpy.fft.fftshift.
template <typename T>
Array2D<T> fftshift(const Array2D<T>& a) {
  Array2D<T> out(a.rows(), a.cols());
  const std::size_t sr = a.rows() / 2, sc = a.cols() / 2;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out((r + sr) % a.rows(), (c + sc) % a.cols()) = a(r, c);
  return out;
}

/// Inverse of fftshift; matches numpy.fft.ifftshift.
template <typename T>
Array2D<T> ifftshift(const Array2D<T>& a) {
  Array2D<T> out(a.rows(), a.cols());
  const std::size_t sr = a.rows() / 2, sc = a.cols() / 2;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a((r + sr) % a.rows(), (c + sc) % a.cols());
  return out;
}

// The reconstruction operators work in the centered convention: the spatial
// origin and the DC bin both sit at the array center. This is what the
// detector records, and it makes F* y come out centered in the probe frame.

/// Centered unitary DFT: fftshift(dft2(ifftshift(f))).
inline ComplexImage cdft2(const ComplexImage& field) { return fftshift(dft2(ifftshift(field))); }

/// Inverse of cdft2.
inline ComplexImage cidft2(const ComplexImage& field) { return fftshift(idft2(ifftshift(field))); }

}  // namespace bmpmace
