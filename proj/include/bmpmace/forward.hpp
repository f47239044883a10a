#pragma once

// Multi-mode far-field forward model and Poisson measurement simulation.
//
// Diffraction patterns are kept in detector layout: the DC bin sits at
// (N_p/2, N_p/2). Apart from that permutation the model is
// I_j = sum_k |F (d_k . P_j x)|^2 with F the unitary DFT.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/fft.hpp"
#include "bmpmace/parallel.hpp"
#include "bmpmace/scan_grid.hpp"

namespace bmpmace {

/// K mutually incoherent probe modes of equal shape.
struct ProbeSet {
  std::vector<ComplexImage> modes;

  std::size_t count() const noexcept { return modes.size(); }
  std::size_t patch_size() const noexcept { return modes.empty() ? 0 : modes.front().rows(); }

  double total_energy() const {
    double e = 0.0;
    for (const auto& m : modes) e += squared_norm(m);
    return e;
  }

  void validate(std::size_t patch_size) const {
    if (modes.empty()) throw ConfigError("ProbeSet: at least one mode is required");
    for (const auto& m : modes)
      if (m.rows() != patch_size || m.cols() != patch_size)
        throw std::invalid_argument("ProbeSet: mode shape does not match patch size");
  }
};

/// Amplitude-domain measurements y_j = sqrt(counts), one per anchor.
struct MeasurementSet {
  Stack<double> y;
  ScanGrid grid;

  std::size_t size() const noexcept { return y.size(); }

  void validate() const {
    if (y.size() != grid.size())
      throw DataError(DataError::Kind::shape_mismatch, "MeasurementSet: " + std::to_string(y.size()) +
                                                           " measurements for " + std::to_string(grid.size()) +
                                                           " anchors");
    const std::size_t n = grid.patch_size();
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j].rows() != n || y[j].cols() != n)
        throw DataError(DataError::Kind::shape_mismatch,
                        "MeasurementSet: measurement " + std::to_string(j) + " does not match the patch size");
      for (double v : y[j])
        if (!(v >= 0.0) || !std::isfinite(v))
          throw DataError(DataError::Kind::malformed,
                          "MeasurementSet: measurement " + std::to_string(j) + " has a negative or non-finite value");
    }
  }
};

struct SimParams {
  double photon_rate = 1e4;  ///< r_p, counts at the brightest detector pixel
  double dark_level = 0.5;   ///< lambda, mean dark counts per pixel
  std::uint64_t seed = 0;
  bool noiseless = false;  ///< replace Pois(mu) by mu

  void validate() const {
    if (!(photon_rate > 0.0)) throw ConfigError("SimParams: photon_rate must be positive");
    if (!(dark_level >= 0.0)) throw ConfigError("SimParams: dark_level must be non-negative");
  }
};

/// Exit wave spectra F(d_k . v) for every mode, detector layout.
inline std::vector<ComplexImage> mode_spectra(const ComplexImage& patch, const ProbeSet& probes) {
  std::vector<ComplexImage> out;
  out.reserve(probes.count());
  for (const auto& d : probes.modes) out.push_back(cdft2(hadamard(d, patch)));
  return out;
}

/// sum_k |spectrum_k|^2
inline RealImage incoherent_sum(const std::vector<ComplexImage>& spectra) {
  RealImage out(spectra.front().rows(), spectra.front().cols());
  for (const auto& s : spectra)
    for (std::size_t i = 0; i < s.size(); ++i) out[i] += std::norm(s[i]);
  return out;
}

inline RealImage patch_intensity(const ComplexImage& patch, const ProbeSet& probes) {
  return incoherent_sum(mode_spectra(patch, probes));
}

/// I_j = sum_k |F D_k P_j x|^2
inline RealImage diffraction_intensity(const ComplexImage& x, const ProbeSet& probes, const ScanGrid& grid,
                                       std::size_t j) {
  probes.validate(grid.patch_size());
  return patch_intensity(extract_patch(x, grid, j), probes);
}

inline RealImage noiseless_magnitude(const ComplexImage& x, const ProbeSet& probes, const ScanGrid& grid,
                                     std::size_t j) {
  RealImage y = diffraction_intensity(x, probes, grid, j);
  for (auto& v : y) v = std::sqrt(v);
  return y;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, location) so locations can be sampled in any order.
inline std::mt19937_64 location_rng(std::uint64_t seed, std::size_t j) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(j)));
}

}  // namespace detail

/// y_j = sqrt(Pois(r_p I_j / max_i ||I_i||_inf + lambda)).
/// The normalization is one scalar over the whole scan. If every intensity is
/// zero the signal term is taken as zero.
inline MeasurementSet simulate_measurements(const ComplexImage& x, const ProbeSet& probes, const ScanGrid& grid,
                                            const SimParams& params) {
  params.validate();
  probes.validate(grid.patch_size());
  if (x.rows() != grid.image_rows() || x.cols() != grid.image_cols())
    throw std::invalid_argument("simulate_measurements: image shape does not match grid");

  const std::size_t J = grid.size();
  Stack<double> intensity(J);
  parallel_for(J, [&](std::size_t j) { intensity[j] = diffraction_intensity(x, probes, grid, j); });

  double peak = 0.0;
  for (const auto& I : intensity)
    for (double v : I) peak = std::max(peak, v);
  const double gain = peak > 0.0 ? params.photon_rate / peak : 0.0;

  MeasurementSet out{Stack<double>(J), grid};
  parallel_for(J, [&](std::size_t j) {
    auto rng = detail::location_rng(params.seed, j);
    RealImage y(intensity[j].rows(), intensity[j].cols());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double mean = gain * intensity[j][i] + params.dark_level;
      double counts = mean;
      if (!params.noiseless) {
        counts = mean > 0.0 ? double(std::poisson_distribution<std::int64_t>(mean)(rng)) : 0.0;
      }
      y[i] = std::sqrt(counts);
    }
    out.y[j] = std::move(y);
  });
  return out;
}

}  // namespace bmpmace
