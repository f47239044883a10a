#pragma once

// End-to-end blind multi-mode reconstruction: initialization, interlaced
// image/probe Mann iterations, mode addition with energy rescaling, and
// final assembly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/fft.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/fresnel.hpp"
#include "bmpmace/image_update.hpp"
#include "bmpmace/metrics.hpp"
#include "bmpmace/probe_update.hpp"
#include "bmpmace/scan_grid.hpp"
#include "bmpmace/stable_inverse.hpp"

namespace bmpmace {

struct AlgoConfig {
  double rho = 0.5;
  double kappa = 1.25;
  double alpha1 = 0.6;
  double alpha2 = 0.6;
  int max_iters = 100;
  std::vector<int> mode_add_schedule;  ///< add a mode after these iterations (1-based)
  std::size_t max_modes = 2;
  bool auto_add_modes = false;  ///< also add a mode when the data residual stalls
  double convergence_tol = 0.0;  ///< stop once E_c drops below; 0 disables
  std::uint64_t seed = 0;

  ImageSideConfig image_side() const { return {alpha1, kappa, rho}; }
  ProbeSideConfig probe_side() const { return {alpha2, rho}; }

  void validate() const {
    image_side().validate();
    probe_side().validate();
    if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
    if (max_modes < 1) throw ConfigError("max_modes must be at least 1");
    if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be non-negative");
    for (std::size_t i = 0; i < mode_add_schedule.size(); ++i) {
      if (mode_add_schedule[i] < 1) throw ConfigError("mode_add_schedule entries must be >= 1");
      if (i > 0 && mode_add_schedule[i] <= mode_add_schedule[i - 1])
        throw ConfigError("mode_add_schedule must be strictly increasing");
    }
  }
};

struct ReconState {
  PatchStack v, w, z;
  std::vector<ProbeStack> s, r, u;  ///< one stack per mode
  int iteration = 0;
  std::vector<double> ec_history;

  std::size_t modes() const noexcept { return s.size(); }

  /// Consensus probe modes (every entry of u_k is identical).
  ProbeSet consensus_probes() const {
    ProbeSet p;
    for (const auto& uk : u) p.modes.push_back(uk.front());
    return p;
  }
};

struct IterationRecord {
  int iteration = 0;
  std::size_t modes = 0;  ///< mode count after this iteration (including any mode added at its end)
  double ec = 0.0;
  double nrmse = std::numeric_limits<double>::quiet_NaN();
  double data_residual = 0.0;  ///< ||y - model amplitude|| / ||y|| at the start of the iteration
  double probe_energy = 0.0;  ///< sum_k ||d_k||^2 after the iteration
  double wall_ms = 0.0;
};

struct ModeAdditionEvent {
  int iteration = 0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double new_mode_raw_energy = 0.0;  ///< energy of the new mode before rescaling
};

struct ReconResult {
  ComplexImage x_hat;
  std::vector<ComplexImage> probes;
  std::vector<IterationRecord> trace;
  std::vector<ModeAdditionEvent> mode_additions;
};

struct InitialGuess {
  ComplexImage image;
  std::vector<ComplexImage> probes;
};

struct RunOptions {
  std::optional<FresnelParams> fresnel;
  std::optional<ComplexImage> ground_truth;
  std::optional<InitialGuess> initial;  ///< bypasses the data-driven initializers
  std::function<void(const IterationRecord&)> on_iteration;
};

inline ComplexImage apply_propagator(const ComplexImage& field, const std::optional<FresnelParams>& fresnel) {
  return fresnel ? fresnel_propagate(field, *fresnel) : field;
}

/// d0 = U{ (1/J) sum_j (P_j 1)^{-1} F* y_j }
inline ComplexImage init_probe(const MeasurementSet& meas, const std::optional<FresnelParams>& fresnel) {
  if (meas.size() == 0) throw DataError(DataError::Kind::malformed, "init_probe: empty measurement set");
  const std::size_t n = meas.grid.patch_size();
  const ComplexImage ones_inverse = stable_inverse(ComplexImage(n, n, 1.0));
  ComplexImage acc(n, n);
  for (std::size_t j = 0; j < meas.size(); ++j) acc += hadamard(ones_inverse, cidft2(to_complex(meas.y[j])));
  acc *= 1.0 / double(meas.size());
  return apply_propagator(acc, fresnel);
}

/// x0 = Lambda_0^{-1} sum_j P_j^T ((||y_j|| / ||d0||) 1), Lambda_0 = sum_j P_j^T P_j.
inline ComplexImage init_image(const MeasurementSet& meas, const ComplexImage& d0) {
  const double dn = norm2(d0);
  if (!(dn > 0.0)) throw ConfigError("init_image: initial probe has zero energy");
  const auto& grid = meas.grid;
  const std::size_t n = grid.patch_size();
  RealImage counts(grid.image_rows(), grid.image_cols());
  RealImage numer(grid.image_rows(), grid.image_cols());
  const RealImage ones(n, n, 1.0);
  for (std::size_t j = 0; j < meas.size(); ++j) {
    insert_patch_adjoint(ones, grid, j, counts);
    insert_patch_adjoint(RealImage(n, n, norm2(meas.y[j]) / dn), grid, j, numer);
  }
  ComplexImage x(grid.image_rows(), grid.image_cols());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = counts[i] > 0.0 ? numer[i] / counts[i] : 0.0;
  return x;
}

/// d_K = U{ (1/J) sum_j X_j^{-1} F* sqrt(max(0, y_j^2 - sum_k |F D_k x_j|^2)) }
/// with x_j the current consensus patches.
inline ComplexImage add_probe_mode(const ProbeSet& probes, const PatchStack& patches, const MeasurementSet& meas,
                                   const std::optional<FresnelParams>& fresnel) {
  if (patches.size() != meas.size()) throw std::invalid_argument("add_probe_mode: patch stack size mismatch");
  probes.validate(meas.grid.patch_size());
  const std::size_t J = meas.size(), n = meas.grid.patch_size();
  PatchStack contrib(J);
  parallel_for(J, [&](std::size_t j) {
    const RealImage model = patch_intensity(patches[j], probes);
    ComplexImage residual(n, n);
    for (std::size_t i = 0; i < residual.size(); ++i)
      residual[i] = std::sqrt(std::max(0.0, meas.y[j][i] * meas.y[j][i] - model[i]));
    contrib[j] = hadamard(stable_inverse(patches[j]), cidft2(residual));
  });
  ComplexImage acc(n, n);
  for (const auto& c : contrib) acc += c;
  acc *= 1.0 / double(J);
  return apply_propagator(acc, fresnel);
}

/// Scales every mode by sqrt(target / current) so total energy equals target.
inline std::vector<ComplexImage> rescale_probe_energy(std::vector<ComplexImage> modes, double target_energy) {
  double e = 0.0;
  for (const auto& m : modes) e += squared_norm(m);
  if (!(e > 0.0)) throw NumericalError(0, "rescale_probe_energy", "rescale_probe_energy: probes have zero energy");
  const double scale = std::sqrt(target_energy / e);
  for (auto& m : modes) m *= scale;
  return modes;
}

/// E_c = (1/J) ||z - w||
inline double convergence_metric(const PatchStack& w, const PatchStack& z) {
  if (w.size() != z.size()) throw std::invalid_argument("convergence_metric: stack sizes differ");
  if (w.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j].check_shape(z[j], "convergence_metric");
    for (std::size_t i = 0; i < w[j].size(); ++i) acc += std::norm(z[j][i] - w[j][i]);
  }
  return std::sqrt(acc) / double(w.size());
}

/// Initial state from an image and probe modes, replicated per location.
inline ReconState make_initial_state(const ComplexImage& x0, const std::vector<ComplexImage>& probes,
                                     const ScanGrid& grid) {
  ReconState st;
  st.v = extract_patches(x0, grid);
  st.w = st.v;
  st.z = st.v;
  for (const auto& d : probes) {
    st.s.emplace_back(grid.size(), d);
  }
  st.r = st.s;
  st.u = st.s;
  return st;
}

namespace detail {

inline void require_finite(const PatchStack& stack, int iteration, const std::string& op) {
  for (std::size_t j = 0; j < stack.size(); ++j)
    if (!all_finite(stack[j]))
      throw NumericalError(iteration, op,
                           "non-finite value after " + op + " at iteration " + std::to_string(iteration) +
                               " (location " + std::to_string(j) + ")");
}

/// Relative data residual has changed by less than 1% over the last 10 iterations.
inline bool residual_stalled(const std::vector<IterationRecord>& trace, const IterationRecord& now,
                             int since_iteration) {
  constexpr std::size_t window = 10;
  if (trace.size() < window) return false;
  const auto& then = trace[trace.size() - window];
  if (then.iteration <= since_iteration) return false;
  if (!(then.data_residual > 0.0)) return false;
  return (then.data_residual - now.data_residual) / then.data_residual < 0.01;
}

}  // namespace detail

/// Runs the blind multi-mode consensus reconstruction.
inline ReconResult run_bm_pmace(const MeasurementSet& meas, const AlgoConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  meas.validate();
  if (meas.size() == 0) throw DataError(DataError::Kind::malformed, "run_bm_pmace: empty measurement set");
  const auto& grid = meas.grid;
  const auto img_cfg = cfg.image_side();
  const auto prb_cfg = cfg.probe_side();

  ReconState st;
  if (opts.initial) {
    if (opts.initial->probes.empty()) throw ConfigError("run_bm_pmace: initial guess has no probe modes");
    if (opts.initial->probes.size() > cfg.max_modes) throw ConfigError("run_bm_pmace: initial guess exceeds max_modes");
    st = make_initial_state(opts.initial->image, opts.initial->probes, grid);
  } else {
    const ComplexImage d0 = init_probe(meas, opts.fresnel);
    st = make_initial_state(init_image(meas, d0), {d0}, grid);
  }

  double y_norm_sq = 0.0;
  for (const auto& y : meas.y) y_norm_sq += squared_norm(y);

  ReconResult result;
  int last_addition = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    st.iteration = it;

    auto img = mann_image_step(st.v, st.consensus_probes(), meas, img_cfg);
    st.v = std::move(img.v);
    st.w = std::move(img.w);
    st.z = std::move(img.z);
    detail::require_finite(st.v, it, "image update");

    for (std::size_t k = 0; k < st.modes(); ++k) {
      auto step = mann_probe_step(k, st.s, st.z, meas, prb_cfg);
      st.s[k] = std::move(step.s);
      st.u[k] = std::move(step.u);
      st.r[k] = std::move(step.r);
      detail::require_finite(st.s[k], it, "probe update (mode " + std::to_string(k) + ")");
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.ec = convergence_metric(st.w, st.z);
    rec.data_residual = y_norm_sq > 0.0 ? std::sqrt(img.residual_sq / y_norm_sq) : 0.0;
    st.ec_history.push_back(rec.ec);
    if (opts.ground_truth) {
      const auto current = consensus_image(st.v, st.consensus_probes(), grid, cfg.kappa);
      rec.nrmse = nrmse(current.image, *opts.ground_truth);
    }

    const bool scheduled =
        std::find(cfg.mode_add_schedule.begin(), cfg.mode_add_schedule.end(), it) != cfg.mode_add_schedule.end();
    const bool stalled = cfg.auto_add_modes && detail::residual_stalled(result.trace, rec, last_addition);
    if ((scheduled || stalled) && st.modes() < cfg.max_modes) {
      const ProbeSet current = st.consensus_probes();
      ModeAdditionEvent ev;
      ev.iteration = it;
      ev.energy_before = current.total_energy();
      ComplexImage added = add_probe_mode(current, st.z, meas, opts.fresnel);
      ev.new_mode_raw_energy = squared_norm(added);
      std::vector<ComplexImage> modes = current.modes;
      modes.push_back(std::move(added));
      const double scale = std::sqrt(ev.energy_before / (ev.energy_before + ev.new_mode_raw_energy));
      modes = rescale_probe_energy(std::move(modes), ev.energy_before);
      // Per-location estimates follow the consensus by the same uniform factor.
      for (std::size_t k = 0; k < st.modes(); ++k) {
        for (auto* stack : {&st.s[k], &st.r[k]})
          for (auto& d : *stack) d *= scale;
        st.u[k] = ProbeStack(grid.size(), modes[k]);
      }
      st.s.emplace_back(grid.size(), modes.back());
      st.r.emplace_back(grid.size(), modes.back());
      st.u.emplace_back(grid.size(), modes.back());
      ev.energy_after = st.consensus_probes().total_energy();
      result.mode_additions.push_back(ev);
      last_addition = it;
    }

    rec.modes = st.modes();
    rec.probe_energy = st.consensus_probes().total_energy();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec);

    if (cfg.convergence_tol > 0.0 && rec.ec < cfg.convergence_tol) break;
  }

  const ProbeSet final_probes = st.consensus_probes();
  result.x_hat = consensus_image(st.v, final_probes, grid, cfg.kappa).image;
  for (const auto& sk : st.s) result.probes.push_back(consensus_probe(sk).mean);
  return result;
}

}  // namespace bmpmace
