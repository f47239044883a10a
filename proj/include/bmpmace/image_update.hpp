#pragma once

// Image side of the consensus iteration: per-location data-fitting agents,
// the probe-weighted averaging projection, and the relaxed reflection step.

#include <algorithm>
#include <cmath>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/fft.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/parallel.hpp"
#include "bmpmace/scan_grid.hpp"
#include "bmpmace/stable_inverse.hpp"

namespace bmpmace {

struct ImageSideConfig {
  double alpha1 = 0.6;
  double kappa = 1.25;
  double rho = 0.5;

  void validate() const {
    if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw ConfigError("alpha1 must lie in [0, 1]");
    if (!(kappa >= 1.0 && kappa <= 2.0)) throw ConfigError("kappa must lie in [1, 2]");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  }
};

/// w_k = ||d_k||^2 / sum_m ||d_m||^2 (total mode energy).
///
/// The last weight is 1 minus the ascending sum of the others, which makes the
/// ascending floating-point sum of all weights exactly 1.
inline std::vector<double> probe_energy_weights(const ProbeSet& probes) {
  std::vector<double> w(probes.count());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) total += (w[k] = squared_norm(probes.modes[k]));
  if (!(total > 0.0)) throw ConfigError("probe_energy_weights: probes have zero total energy");
  double head = 0.0;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) head += (w[k] /= total);
  w.back() = std::max(0.0, 1.0 - head);
  return w;
}

/// y . stable_inverse(amplitude), the Fourier-magnitude replacement ratio.
inline RealImage magnitude_ratio(const RealImage& y, const RealImage& amplitude) {
  RealImage ratio = stable_inverse(amplitude);
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] *= y[i];
  return ratio;
}

inline RealImage amplitude_of(const std::vector<ComplexImage>& spectra) {
  RealImage a = incoherent_sum(spectra);
  for (auto& v : a) v = std::sqrt(v);
  return a;
}

namespace detail {

/// Per-mode patch estimates given precomputed stable probe inverses.
inline std::vector<ComplexImage> patch_estimates(const ComplexImage& v, const ProbeSet& probes,
                                                 const std::vector<ComplexImage>& probe_inverses, const RealImage& y,
                                                 double* residual_sq = nullptr) {
  auto spectra = mode_spectra(v, probes);
  const RealImage amp = amplitude_of(spectra);
  const RealImage ratio = magnitude_ratio(y, amp);
  if (residual_sq) {
    double r = 0.0;
    for (std::size_t i = 0; i < amp.size(); ++i) r += (y[i] - amp[i]) * (y[i] - amp[i]);
    *residual_sq = r;
  }
  std::vector<ComplexImage> out;
  out.reserve(probes.count());
  for (std::size_t k = 0; k < probes.count(); ++k) {
    auto& s = spectra[k];
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= ratio[i];
    out.push_back(hadamard(probe_inverses[k], cidft2(s)));
  }
  return out;
}

inline std::vector<ComplexImage> probe_inverses(const ProbeSet& probes) {
  std::vector<ComplexImage> inv;
  inv.reserve(probes.count());
  for (const auto& d : probes.modes) inv.push_back(stable_inverse(d));
  return inv;
}

inline ComplexImage combine_agent(const ComplexImage& v, const std::vector<ComplexImage>& estimates,
                                  const std::vector<double>& weights, double alpha1) {
  ComplexImage out = v * (1.0 - alpha1);
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const double c = alpha1 * weights[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * estimates[k][i];
  }
  return out;
}

}  // namespace detail

/// D_{k,eps}^{-1} F*( y . F D_k v / sqrt(sum_m |F D_m v|^2) ), denominator stabilized.
inline ComplexImage patch_agent_mode(const ComplexImage& v, const ProbeSet& probes, std::size_t k, const RealImage& y) {
  if (k >= probes.count()) throw std::out_of_range("patch_agent_mode: mode index out of range");
  probes.validate(v.rows());
  return detail::patch_estimates(v, probes, detail::probe_inverses(probes), y)[k];
}

/// (1 - alpha1) v + alpha1 sum_k w_k v~_k
inline ComplexImage patch_agent(const ComplexImage& v, const ProbeSet& probes, const RealImage& y,
                                const ImageSideConfig& cfg) {
  cfg.validate();
  probes.validate(v.rows());
  const auto est = detail::patch_estimates(v, probes, detail::probe_inverses(probes), y);
  return detail::combine_agent(v, est, probe_energy_weights(probes), cfg.alpha1);
}

/// F^I over the whole stack. Optionally reports sum_j ||y_j - model amplitude||^2.
inline PatchStack image_agents(const PatchStack& v, const ProbeSet& probes, const MeasurementSet& meas,
                               const ImageSideConfig& cfg, double* residual_sq = nullptr) {
  cfg.validate();
  probes.validate(meas.grid.patch_size());
  if (v.size() != meas.size()) throw std::invalid_argument("image_agents: stack size does not match measurements");
  const auto inv = detail::probe_inverses(probes);
  const auto weights = probe_energy_weights(probes);
  PatchStack out(v.size());
  std::vector<double> res(v.size(), 0.0);
  parallel_for(v.size(), [&](std::size_t j) {
    const auto est = detail::patch_estimates(v[j], probes, inv, meas.y[j], &res[j]);
    out[j] = detail::combine_agent(v[j], est, weights, cfg.alpha1);
  });
  if (residual_sq) {
    double total = 0.0;
    for (double r : res) total += r;
    *residual_sq = total;
  }
  return out;
}

struct ConsensusImage {
  ComplexImage image;       ///< the averaged full image
  PatchStack patches;       ///< [P_0 image, ..., P_{J-1} image]
  std::size_t uncovered = 0;  ///< pixels with no probe weight; set to zero
};

/// Probe-weighted average of overlapping patches,
/// v_bar = sum_k w_k Lambda_k^{-1} sum_j P_j^T |d_k|^kappa v_j.
///
/// Lambda_k^{-1} is an exact reciprocal wherever Lambda_k exceeds 1e-12 of its
/// mean non-zero value and zero elsewhere; the mode sum is renormalized by the
/// weights of the modes that actually cover each pixel. Both keep the operator
/// an exact projection.
inline ConsensusImage consensus_image(const PatchStack& stack, const ProbeSet& probes, const ScanGrid& grid,
                                      double kappa) {
  if (stack.size() != grid.size()) throw std::invalid_argument("consensus_image: stack size does not match grid");
  probes.validate(grid.patch_size());
  for (const auto& p : stack)
    if (p.rows() != grid.patch_size() || p.cols() != grid.patch_size())
      throw std::invalid_argument("consensus_image: patch shape mismatch");

  const auto weights = probe_energy_weights(probes);
  const std::size_t rows = grid.image_rows(), cols = grid.image_cols();
  ComplexImage image(rows, cols);
  RealImage covered_weight(rows, cols);

  for (std::size_t k = 0; k < probes.count(); ++k) {
    if (weights[k] == 0.0) continue;
    RealImage pw(grid.patch_size(), grid.patch_size());
    for (std::size_t i = 0; i < pw.size(); ++i) pw[i] = std::pow(std::abs(probes.modes[k][i]), kappa);

    RealImage lambda(rows, cols);
    ComplexImage numer(rows, cols);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      insert_patch_adjoint(pw, grid, j, lambda);
      insert_patch_adjoint(hadamard(pw, stack[j]), grid, j, numer);
    }

    double sum = 0.0;
    std::size_t nonzero = 0;
    for (double l : lambda)
      if (l > 0.0) sum += l, ++nonzero;
    if (nonzero == 0) continue;
    const double cutoff = 1e-12 * sum / double(nonzero);

    for (std::size_t i = 0; i < image.size(); ++i) {
      if (lambda[i] > cutoff) {
        image[i] += weights[k] * (numer[i] / lambda[i]);
        covered_weight[i] += weights[k];
      }
    }
  }

  ConsensusImage out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (covered_weight[i] > 0.0) {
      // Exact when every mode covers the pixel (weights sum to one).
      if (covered_weight[i] != 1.0) image[i] /= covered_weight[i];
    } else {
      image[i] = 0.0;
      ++out.uncovered;
    }
  }
  out.patches = extract_patches(image, grid);
  out.image = std::move(image);
  return out;
}

struct ImageStepResult {
  PatchStack v;  ///< updated Mann state
  PatchStack w;  ///< F^I(v)
  PatchStack z;  ///< G^I(2w - v)
  ComplexImage consensus;  ///< image behind z
  std::size_t uncovered = 0;
  double residual_sq = 0.0;  ///< sum_j ||y_j - |model|||^2 at the input state
};

/// w = F^I(v); z = G^I(2w - v); v' = v + 2 rho (z - w).
inline ImageStepResult mann_image_step(const PatchStack& v, const ProbeSet& probes, const MeasurementSet& meas,
                                       const ImageSideConfig& cfg) {
  ImageStepResult out;
  out.w = image_agents(v, probes, meas, cfg, &out.residual_sq);
  PatchStack reflected(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) reflected[j] = 2.0 * out.w[j] - v[j];
  auto cons = consensus_image(reflected, probes, meas.grid, cfg.kappa);
  out.z = std::move(cons.patches);
  out.consensus = std::move(cons.image);
  out.uncovered = cons.uncovered;
  out.v.resize(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    ComplexImage next = v[j];
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += 2.0 * cfg.rho * (out.z[j][i] - out.w[j][i]);
    out.v[j] = std::move(next);
  }
  return out;
}

}  // namespace bmpmace
