#pragma once

// Shared synthetic setups for the tests.

#include <cmath>

#include "bmpmace/forward.hpp"
#include "bmpmace/scenario.hpp"

namespace fixtures {

using namespace bmpmace;

/// Poisson replaced by its mean and no dark offset, so the data are exactly
/// the model magnitudes of the truth.
inline ScenarioParams noiseless(ScenarioParams p = {}) {
  p.sim.noiseless = true;
  p.sim.dark_level = 0.0;
  return p;
}

/// Probes scaled by the simulator's gain so (truth, probes) reproduces the data exactly.
inline ProbeSet data_scaled_probes(const Scenario& s, double photon_rate) {
  double peak = 0.0;
  for (std::size_t j = 0; j < s.measurements.size(); ++j)
    for (double v : diffraction_intensity(s.truth, s.probes, s.measurements.grid, j)) peak = std::max(peak, v);
  ProbeSet out = s.probes;
  for (auto& m : out.modes) m *= std::sqrt(photon_rate / peak);
  return out;
}

/// The 64x64 image / 16x16 probe / 25-location configuration used for fixed-point checks.
inline ScenarioParams fixed_point_params() {
  ScenarioParams p = noiseless();
  p.patch_size = 16;
  p.scan_spacing = 12;
  p.probe_width = 3.0;
  p.defocus = 5e-6;
  return p;
}

}  // namespace fixtures
