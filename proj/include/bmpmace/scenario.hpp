#pragma once

// A complete synthetic experiment: phantom, defocused probe modes, jittered
// raster scan and simulated measurements. Defaults are the desk-scale setup
// used by the regression suite.

#include <cstdint>
#include <optional>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/fresnel.hpp"
#include "bmpmace/phantom.hpp"
#include "bmpmace/scan_grid.hpp"

namespace bmpmace {

struct ScenarioParams {
  std::size_t image_size = 64;
  std::size_t patch_size = 32;
  std::size_t scan_spacing = 4;
  std::size_t scan_jitter = 2;
  std::uint64_t scan_seed = 7;

  std::size_t phantom_shapes = 12;
  double phantom_max_phase = 0.5;
  std::uint64_t phantom_seed = 1;

  double probe_width = 1.0;  ///< focal-spot sigma, pixels
  double wavelength = 1e-9;
  double defocus = 3e-5;     ///< propagation distance from the focus, meters
  double pixel_pitch = 1e-8;
  std::size_t probe_modes = 1;        ///< 1, or 2 for a main mode plus a first-order Hermite mode
  double main_mode_fraction = 0.9;  ///< energy share of mode 0 when probe_modes == 2

  SimParams sim{};

  void validate() const {
    if (probe_modes < 1 || probe_modes > 2) throw ConfigError("probe_modes must be 1 or 2");
    if (patch_size > image_size) throw ConfigError("patch_size exceeds image_size");
  }

  FresnelParams fresnel() const { return {wavelength, defocus, pixel_pitch}; }
};

struct Scenario {
  ComplexImage truth;
  ProbeSet probes;
  MeasurementSet measurements;
  FresnelParams fresnel;
};

inline ProbeSet make_scenario_probes(const ScenarioParams& p) {
  ProbeParams g;
  g.size = p.patch_size;
  g.width = p.probe_width;
  ComplexImage main = make_defocused_probe(g, p.fresnel());
  if (p.probe_modes == 1) return ProbeSet{{std::move(main)}};
  g.hermite_order = 1;
  ComplexImage second = make_defocused_probe(g, p.fresnel());
  return ProbeSet{split_mode_energy(std::move(main), std::move(second), p.main_mode_fraction)};
}

inline Scenario make_scenario(const ScenarioParams& p) {
  p.validate();
  PhantomParams pp;
  pp.rows = pp.cols = p.image_size;
  pp.shapes = p.phantom_shapes;
  pp.max_phase = p.phantom_max_phase;
  pp.seed = p.phantom_seed;
  Scenario s;
  s.truth = make_phantom(pp);
  s.probes = make_scenario_probes(p);
  s.fresnel = p.fresnel();
  const ScanGrid grid =
      generate_scan_grid(p.image_size, p.image_size, p.patch_size, p.scan_spacing, p.scan_jitter, p.scan_seed, true);
  s.measurements = simulate_measurements(s.truth, s.probes, grid, p.sim);
  return s;
}

}  // namespace bmpmace
