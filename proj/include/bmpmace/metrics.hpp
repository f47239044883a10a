#pragma once

#include <cmath>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/parallel.hpp"

namespace bmpmace {

struct MetricReport {
  double nrmse = 0.0;
  complex_t optimal_scale{1.0, 0.0};
  double forward_nrmse = 0.0;
};

/// argmin_c ||c x_hat - x|| = <x_hat, x> / <x_hat, x_hat>.
inline complex_t optimal_scale(const ComplexImage& x_hat, const ComplexImage& x) {
  const double denom = squared_norm(x_hat);
  if (!(denom > 0.0)) throw std::invalid_argument("optimal_scale: estimate is zero");
  return inner(x_hat, x) / denom;
}

/// min_c ||c x_hat - x|| / ||x||, the gain- and phase-invariant error.
inline double nrmse(const ComplexImage& x_hat, const ComplexImage& x) {
  x_hat.check_shape(x, "nrmse");
  const double ref = norm2(x);
  if (!(ref > 0.0)) throw std::invalid_argument("nrmse: ground truth is zero");
  if (!(squared_norm(x_hat) > 0.0)) return 1.0;
  const complex_t c = optimal_scale(x_hat, x);
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err += std::norm(c * x_hat[i] - x[i]);
  return std::sqrt(err) / ref;
}

/// NRMSE between measured amplitudes and sqrt(sum_k |F D_k P_j x_hat|^2) over
/// the whole scan, with the gain restricted to positive reals.
inline double forward_nrmse(const ComplexImage& x_hat, const ProbeSet& probes, const MeasurementSet& meas) {
  if (meas.size() == 0) throw DataError(DataError::Kind::malformed, "forward_nrmse: empty measurement set");
  probes.validate(meas.grid.patch_size());
  const std::size_t J = meas.size();
  Stack<double> model(J);
  parallel_for(J, [&](std::size_t j) {
    RealImage m = diffraction_intensity(x_hat, probes, meas.grid, j);
    for (auto& v : m) v = std::sqrt(v);
    model[j] = std::move(m);
  });
  double cross = 0.0, model_sq = 0.0, ref_sq = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < model[j].size(); ++i) {
      cross += model[j][i] * meas.y[j][i];
      model_sq += model[j][i] * model[j][i];
      ref_sq += meas.y[j][i] * meas.y[j][i];
    }
  }
  if (!(ref_sq > 0.0)) throw DataError(DataError::Kind::malformed, "forward_nrmse: measurements are all zero");
  const double c = model_sq > 0.0 ? std::max(cross / model_sq, 0.0) : 0.0;
  double err = 0.0;
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t i = 0; i < model[j].size(); ++i) {
      const double d = c * model[j][i] - meas.y[j][i];
      err += d * d;
    }
  return std::sqrt(err / ref_sq);
}

}  // namespace bmpmace
