#pragma once

#include <cmath>
#include <numbers>

#include "bmpmace/errors.hpp"
#include "bmpmace/fft.hpp"

namespace bmpmace {

struct FresnelParams {
  double wavelength = 0.0;      ///< meters
  double distance = 0.0;        ///< meters
  double sample_spacing = 0.0;  ///< meters per pixel

  void validate() const {
    if (!(wavelength > 0.0) || !(distance > 0.0) || !(sample_spacing > 0.0))
      throw ConfigError("FresnelParams: wavelength, distance and sample_spacing must be strictly positive");
  }
};

/// Signed DFT frequency of bin i for length n, in cycles per meter.
inline double dft_frequency(std::size_t i, std::size_t n, double spacing) {
  const auto k = static_cast<double>(i < (n + 1) / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n));
  return k / (static_cast<double>(n) * spacing);
}

/// Fresnel transfer-function propagation: F*{ F{field} . exp(-i pi eta z (fu^2 + fv^2)) }.
/// The constant phase exp(i 2 pi z / eta) is omitted.
inline ComplexImage fresnel_propagate(const ComplexImage& field, const FresnelParams& params) {
  params.validate();
  if (field.rows() != field.cols()) throw ConfigError("fresnel_propagate: field must be square");
  ComplexImage spectrum = dft2(field);
  const double k = std::numbers::pi * params.wavelength * params.distance;
  for (std::size_t r = 0; r < spectrum.rows(); ++r) {
    const double fv = dft_frequency(r, spectrum.rows(), params.sample_spacing);
    for (std::size_t c = 0; c < spectrum.cols(); ++c) {
      const double fu = dft_frequency(c, spectrum.cols(), params.sample_spacing);
      spectrum(r, c) *= std::polar(1.0, -k * (fu * fu + fv * fv));
    }
  }
  return idft2(std::move(spectrum));
}

}  // namespace bmpmace
