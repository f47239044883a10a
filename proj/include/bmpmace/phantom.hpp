#pragma once

// Synthetic objects and probes for simulation studies.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/fresnel.hpp"

namespace bmpmace {

struct PhantomParams {
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t shapes = 12;
  double min_magnitude = 0.5;
  double max_magnitude = 1.0;
  double max_phase = 1.0;  ///< radians; phases are drawn from [-max_phase, max_phase]
  std::uint64_t seed = 0;
};

/// Piecewise-constant complex transmittance: a uniform background overlaid
/// with random discs and rectangles, later shapes painted over earlier ones.
inline ComplexImage make_phantom(const PhantomParams& p) {
  if (p.rows == 0 || p.cols == 0) throw ConfigError("make_phantom: empty shape");
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto mag = [&] { return p.min_magnitude + (p.max_magnitude - p.min_magnitude) * unit(rng); };
  auto phase = [&] { return p.max_phase * (2.0 * unit(rng) - 1.0); };

  ComplexImage x(p.rows, p.cols, std::polar(p.max_magnitude, 0.0));
  const double extent = double(std::min(p.rows, p.cols));
  for (std::size_t s = 0; s < p.shapes; ++s) {
    const complex_t value = std::polar(mag(), phase());
    const double cr = unit(rng) * double(p.rows), cc = unit(rng) * double(p.cols);
    const double size = extent * (0.08 + 0.22 * unit(rng));
    const bool disc = unit(rng) < 0.5;
    const double aspect = 0.5 + unit(rng);
    for (std::size_t r = 0; r < p.rows; ++r) {
      for (std::size_t c = 0; c < p.cols; ++c) {
        const double dr = double(r) - cr, dc = double(c) - cc;
        const bool inside = disc ? (dr * dr + dc * dc <= size * size)
                                 : (std::abs(dr) <= size && std::abs(dc) <= size * aspect);
        if (inside) x(r, c) = value;
      }
    }
  }
  return x;
}

struct ProbeParams {
  std::size_t size = 16;
  double width = 4.0;      ///< Gaussian sigma in pixels
  double curvature = 0.0;  ///< quadratic phase, radians per pixel^2
  double center_row = -1;  ///< negative: array center
  double center_col = -1;
  double peak = 1.0;
  int hermite_order = 0;  ///< 0 or 1; order 1 multiplies by the column offset
};

/// Gaussian illumination with a quadratic (defocus) phase.
inline ComplexImage make_gaussian_probe(const ProbeParams& p) {
  if (p.size == 0 || !(p.width > 0.0)) throw ConfigError("make_gaussian_probe: invalid parameters");
  if (p.hermite_order != 0 && p.hermite_order != 1) throw ConfigError("make_gaussian_probe: hermite_order must be 0 or 1");
  const double half = double(p.size) / 2.0;
  const double r0 = p.center_row < 0 ? half : p.center_row;
  const double c0 = p.center_col < 0 ? half : p.center_col;
  ComplexImage d(p.size, p.size);
  for (std::size_t r = 0; r < p.size; ++r)
    for (std::size_t c = 0; c < p.size; ++c) {
      const double rr = (double(r) - r0) * (double(r) - r0) + (double(c) - c0) * (double(c) - c0);
      d(r, c) = std::polar(p.peak * std::exp(-rr / (2.0 * p.width * p.width)), p.curvature * rr);
      if (p.hermite_order == 1) d(r, c) *= (double(c) - c0) / p.width;
    }
  return d;
}

/// A focused Gaussian spot carried to a defocus plane; this gives a broad,
/// structured illumination whose far field is not dominated by a single peak.
inline ComplexImage make_defocused_probe(const ProbeParams& p, const FresnelParams& defocus) {
  return fresnel_propagate(make_gaussian_probe(p), defocus);
}

/// Two incoherent modes whose energies split `main_fraction : 1 - main_fraction`
/// while keeping the energy of `main` as the total.
inline std::vector<ComplexImage> split_mode_energy(ComplexImage main, ComplexImage secondary, double main_fraction) {
  if (!(main_fraction > 0.0 && main_fraction <= 1.0)) throw ConfigError("split_mode_energy: fraction must be in (0, 1]");
  const double total = squared_norm(main);
  main *= std::sqrt(main_fraction);
  const double es = squared_norm(secondary);
  if (!(es > 0.0)) throw ConfigError("split_mode_energy: secondary mode has zero energy");
  secondary *= std::sqrt((1.0 - main_fraction) * total / es);
  return {std::move(main), std::move(secondary)};
}

}  // namespace bmpmace
