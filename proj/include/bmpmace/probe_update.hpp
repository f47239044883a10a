#pragma once

// Probe side: every scan location keeps its own estimate of each mode; the
// consensus is a plain average over locations.

#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/fft.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/image_update.hpp"
#include "bmpmace/parallel.hpp"
#include "bmpmace/stable_inverse.hpp"

namespace bmpmace {

struct ProbeSideConfig {
  double alpha2 = 0.6;
  double rho = 0.5;

  void validate() const {
    if (!(alpha2 >= 0.0 && alpha2 <= 1.0)) throw ConfigError("alpha2 must lie in [0, 1]");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  }
};

namespace detail {

inline ComplexImage probe_estimate(std::size_t k, const std::vector<ComplexImage>& modes_at_j, const ComplexImage& z_j,
                                   const ComplexImage& z_inverse, const RealImage& y_j) {
  std::vector<ComplexImage> spectra;
  spectra.reserve(modes_at_j.size());
  for (const auto& d : modes_at_j) spectra.push_back(cdft2(hadamard(z_j, d)));
  const RealImage ratio = magnitude_ratio(y_j, amplitude_of(spectra));
  auto& s = spectra[k];
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= ratio[i];
  return hadamard(z_inverse, cidft2(s));
}

}  // namespace detail

/// X_{j,eps}^{-1} F*( y . F X_j d_k / sqrt(sum_m |F X_j d_m|^2) ), X_j = diag(z_j).
inline ComplexImage probe_agent_mode(std::size_t k, const std::vector<ComplexImage>& modes_at_j,
                                     const ComplexImage& z_j, const RealImage& y_j) {
  if (k >= modes_at_j.size()) throw std::out_of_range("probe_agent_mode: mode index out of range");
  for (const auto& d : modes_at_j) z_j.check_shape(d, "probe_agent_mode");
  return detail::probe_estimate(k, modes_at_j, z_j, stable_inverse(z_j), y_j);
}

/// (1 - alpha2) d_{j,k} + alpha2 d~_{j,k}
inline ComplexImage probe_agent(std::size_t k, const std::vector<ComplexImage>& modes_at_j, const ComplexImage& z_j,
                                const RealImage& y_j, const ProbeSideConfig& cfg) {
  cfg.validate();
  ComplexImage est = probe_agent_mode(k, modes_at_j, z_j, y_j);
  ComplexImage out = modes_at_j[k] * (1.0 - cfg.alpha2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.alpha2 * est[i];
  return out;
}

struct ConsensusProbe {
  ComplexImage mean;
  ProbeStack stack;
};

/// d_bar = (1/J) sum_j d_j, summed in ascending j; replicated J times.
inline ConsensusProbe consensus_probe(const ProbeStack& stack) {
  if (stack.empty()) throw std::invalid_argument("consensus_probe: empty stack");
  ComplexImage mean(stack.front().rows(), stack.front().cols());
  for (const auto& d : stack) mean += d;
  mean *= 1.0 / double(stack.size());
  return {mean, ProbeStack(stack.size(), mean)};
}

/// Modes available at location j, read from the current per-mode stacks.
inline std::vector<ComplexImage> modes_at(const std::vector<ProbeStack>& stacks, std::size_t j) {
  std::vector<ComplexImage> out;
  out.reserve(stacks.size());
  for (const auto& s : stacks) out.push_back(s[j]);
  return out;
}

struct ProbeStepResult {
  ProbeStack s;  ///< updated Mann state for mode k
  ProbeStack u;  ///< G^P(2r - s), replicated consensus
  ProbeStack r;  ///< F^P_k(s)
};

/// r_k = F^P_k(s_k; s_*, z); u_k = G^P(2 r_k - s_k); s_k' = s_k + 2 rho (u_k - r_k).
/// `stacks` holds the current state of every mode; the caller writes s_k' back
/// before stepping mode k + 1.
inline ProbeStepResult mann_probe_step(std::size_t k, const std::vector<ProbeStack>& stacks, const PatchStack& z,
                                       const MeasurementSet& meas, const ProbeSideConfig& cfg) {
  cfg.validate();
  if (k >= stacks.size()) throw std::out_of_range("mann_probe_step: mode index out of range");
  const std::size_t J = meas.size();
  if (z.size() != J) throw std::invalid_argument("mann_probe_step: patch stack size does not match measurements");
  for (const auto& s : stacks)
    if (s.size() != J) throw std::invalid_argument("mann_probe_step: probe stack size does not match measurements");

  ProbeStepResult out;
  out.r.resize(J);
  parallel_for(J, [&](std::size_t j) {
    const auto modes = modes_at(stacks, j);
    const ComplexImage est = detail::probe_estimate(k, modes, z[j], stable_inverse(z[j]), meas.y[j]);
    ComplexImage r = modes[k] * (1.0 - cfg.alpha2);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += cfg.alpha2 * est[i];
    out.r[j] = std::move(r);
  });

  const ProbeStack& s = stacks[k];
  ProbeStack reflected(J);
  for (std::size_t j = 0; j < J; ++j) reflected[j] = 2.0 * out.r[j] - s[j];
  out.u = consensus_probe(reflected).stack;

  out.s.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    ComplexImage next = s[j];
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += 2.0 * cfg.rho * (out.u[j][i] - out.r[j][i]);
    out.s[j] = std::move(next);
  }
  return out;
}

}  // namespace bmpmace
