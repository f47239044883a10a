#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "bmpmace/array2d.hpp"

namespace bmpmace {

/// Regularizer for element-wise inversion: 1e-6 * sqrt(mean |d|^2).
///
/// `mean_energy` overrides the mean squared magnitude computed from `d`.
/// An all-zero input gives the smallest normal double instead of 0 so the
/// quotient stays defined (and evaluates to 0).
template <typename T>
double stable_inverse_epsilon(const Array2D<T>& d, std::optional<double> mean_energy = std::nullopt) {
  const double ms = mean_energy ? *mean_energy : (d.empty() ? 0.0 : squared_norm(d) / double(d.size()));
  const double eps = 1e-6 * std::sqrt(ms);
  return eps > 0.0 ? eps : std::numeric_limits<double>::min();
}

/// d* / (|d|^2 + eps), element-wise.
inline ComplexImage stable_inverse(const ComplexImage& d, std::optional<double> mean_energy = std::nullopt) {
  const double eps = stable_inverse_epsilon(d, mean_energy);
  ComplexImage out(d.rows(), d.cols());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = std::conj(d[i]) / (std::norm(d[i]) + eps);
  return out;
}

/// Real-valued variant, d / (d^2 + eps).
inline RealImage stable_inverse(const RealImage& d, std::optional<double> mean_energy = std::nullopt) {
  const double eps = stable_inverse_epsilon(d, mean_energy);
  RealImage out(d.rows(), d.cols());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] / (d[i] * d[i] + eps);
  return out;
}

}  // namespace bmpmace
