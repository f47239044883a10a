// bmpmace: simulate, reconstruct, preprocess, evaluate and inspect ptychography datasets.
//
// Every option can also be set from a TOML file passed with --config; keys in a
// [subcommand] table use the option names without dashes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmpmace/driver.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/io/dataset.hpp"
#include "bmpmace/io/preprocess.hpp"
#include "bmpmace/io/results.hpp"
#include "bmpmace/metrics.hpp"
#include "bmpmace/parallel.hpp"
#include "bmpmace/scenario.hpp"

namespace fs = std::filesystem;
using namespace bmpmace;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct SimulateArgs {
  ScenarioParams scenario;
  std::string out = "dataset.json";
};

struct ReconstructArgs {
  AlgoConfig algo;
  std::string dataset;
  std::string out = "result";
  bool no_fresnel = false;
  bool plots = true;
  bool quiet = false;
};

struct PreprocessArgs {
  io::PreprocessConfig cfg;
  std::string dataset;
  std::string out;
  bool suggest_outliers = false;
};

struct EvaluateArgs {
  std::string dataset;
  std::string result;
};

struct InfoArgs {
  std::string dataset;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* s = app.add_subcommand("simulate", "Generate a phantom, probes and simulated measurements");
  auto& p = a.scenario;
  s->add_option("--out", a.out, "Manifest path to write")->capture_default_str();
  s->add_option("--image_size", p.image_size)->capture_default_str();
  s->add_option("--patch_size", p.patch_size)->capture_default_str();
  s->add_option("--scan_spacing", p.scan_spacing)->capture_default_str();
  s->add_option("--scan_jitter", p.scan_jitter)->capture_default_str();
  s->add_option("--scan_seed", p.scan_seed)->capture_default_str();
  s->add_option("--phantom_shapes", p.phantom_shapes)->capture_default_str();
  s->add_option("--phantom_max_phase", p.phantom_max_phase)->capture_default_str();
  s->add_option("--phantom_seed", p.phantom_seed)->capture_default_str();
  s->add_option("--probe_width", p.probe_width, "Focal spot sigma in pixels")->capture_default_str();
  s->add_option("--probe_modes", p.probe_modes, "1, or 2 for a 2-mode probe")->capture_default_str();
  s->add_option("--main_mode_fraction", p.main_mode_fraction)->capture_default_str();
  s->add_option("--wavelength", p.wavelength)->capture_default_str();
  s->add_option("--defocus", p.defocus, "Probe propagation distance from focus (m)")->capture_default_str();
  s->add_option("--pixel_pitch", p.pixel_pitch)->capture_default_str();
  s->add_option("--photon_rate", p.sim.photon_rate)->capture_default_str();
  s->add_option("--dark_level", p.sim.dark_level)->capture_default_str();
  s->add_option("--seed", p.sim.seed, "Noise seed")->capture_default_str();
  s->add_flag("--noiseless", p.sim.noiseless, "Replace Poisson draws by their mean");
}

void add_reconstruct(CLI::App& app, ReconstructArgs& a) {
  auto* s = app.add_subcommand("reconstruct", "Run blind multi-mode reconstruction");
  auto& c = a.algo;
  s->add_option("--dataset", a.dataset, "Dataset manifest")->required();
  s->add_option("--out", a.out, "Output directory")->capture_default_str();
  s->add_option("--rho", c.rho)->capture_default_str();
  s->add_option("--kappa", c.kappa)->capture_default_str();
  s->add_option("--alpha1", c.alpha1)->capture_default_str();
  s->add_option("--alpha2", c.alpha2)->capture_default_str();
  s->add_option("--max_iters", c.max_iters)->capture_default_str();
  s->add_option("--mode_add_schedule", c.mode_add_schedule, "Iterations after which a mode is added")->delimiter(',');
  s->add_option("--max_modes", c.max_modes)->capture_default_str();
  s->add_flag("--auto_add_modes", c.auto_add_modes, "Also add a mode when the data residual stalls");
  s->add_option("--convergence_tol", c.convergence_tol)->capture_default_str();
  s->add_option("--seed", c.seed)->capture_default_str();
  s->add_flag("--no_fresnel", a.no_fresnel, "Ignore wavelength/distance metadata during initialization");
  s->add_flag("--plots,!--no_plots", a.plots, "Write convergence plots")->capture_default_str();
  s->add_flag("--quiet", a.quiet, "Suppress the per-iteration log");
}

void add_preprocess(CLI::App& app, PreprocessArgs& a) {
  auto* s = app.add_subcommand("preprocess", "Turn raw intensity frames into amplitude measurements");
  auto& c = a.cfg;
  s->add_option("--dataset", a.dataset, "Raw dataset manifest")->required();
  s->add_option("--out", a.out, "Manifest path for the preprocessed dataset");
  s->add_option("--dark_frame_count", c.dark_frame_count)->capture_default_str();
  s->add_option("--outlier_indices", c.outlier_indices, "Frame indices to exclude")->delimiter(',');
  s->add_option("--crop_size", c.crop_size)->capture_default_str();
  s->add_option("--tukey_shape", c.tukey_shape)->capture_default_str();
  s->add_flag("--suggest_outliers", a.suggest_outliers, "Print frames whose energy deviates by more than 5 MADs");
}

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  auto* s = app.add_subcommand("evaluate", "Score a reconstruction against truth or the data");
  s->add_option("--dataset", a.dataset, "Dataset manifest")->required();
  s->add_option("--result", a.result, "Result directory written by reconstruct")->required();
}

void add_info(CLI::App& app, InfoArgs& a) {
  auto* s = app.add_subcommand("info", "Summarize a dataset manifest");
  s->add_option("--dataset", a.dataset, "Dataset manifest")->required();
}

int run_simulate(const SimulateArgs& a) {
  const Scenario s = make_scenario(a.scenario);
  const fs::path out(a.out);
  const io::DatasetMetadata meta{a.scenario.wavelength, a.scenario.defocus, a.scenario.pixel_pitch};
  io::save_dataset(out, s.measurements, meta, &s.truth, &s.probes);
  std::cout << "wrote=" << out.string() << " frames=" << s.measurements.size()
            << " overlap=" << overlap_ratio(s.measurements.grid) << " modes=" << s.probes.count() << "\n";
  return kOk;
}

int run_reconstruct(const ReconstructArgs& a) {
  const auto ds = io::load_dataset(a.dataset);
  RunOptions opts;
  if (!a.no_fresnel) opts.fresnel = ds.manifest.fresnel();
  opts.ground_truth = ds.ground_truth;
  if (!a.quiet) {
    opts.on_iteration = [](const IterationRecord& r) {
      std::printf("iter=%d modes=%zu ec=%.6e residual=%.6e", r.iteration, r.modes, r.ec, r.data_residual);
      if (std::isfinite(r.nrmse)) std::printf(" nrmse=%.6e", r.nrmse);
      std::printf(" ms=%.1f\n", r.wall_ms);
      std::fflush(stdout);
    };
  }
  const auto result = run_bm_pmace(ds.measurements, a.algo, opts);
  io::save_result(result, a.out);
  if (a.plots) io::emit_plots(result, a.out);
  for (const auto& e : result.mode_additions)
    std::printf("mode_added iteration=%d energy_before=%.17g energy_after=%.17g\n", e.iteration, e.energy_before,
                e.energy_after);
  std::printf("done iterations=%zu modes=%zu out=%s\n", result.trace.size(), result.probes.size(), a.out.c_str());
  return kOk;
}

int run_preprocess(const PreprocessArgs& a) {
  const auto raw = io::load_raw_dataset(a.dataset);
  if (raw.manifest.measurement_domain != io::MeasurementDomain::intensity)
    throw DataError(DataError::Kind::malformed, a.dataset + ": measurements are already amplitudes");
  if (a.suggest_outliers) {
    const auto flagged = io::suggest_outliers(raw.frames);
    std::cout << "suggested_outliers=";
    for (std::size_t i = 0; i < flagged.size(); ++i) std::cout << (i ? "," : "") << flagged[i];
    std::cout << "\n";
    if (a.out.empty()) return kOk;
  }
  if (a.out.empty()) throw ConfigError("preprocess: --out is required");
  const auto meas = io::preprocess_dataset(raw, a.cfg);
  const auto& m = raw.manifest;
  io::save_dataset(a.out, meas, io::DatasetMetadata{m.wavelength, m.distance, m.pixel_pitch});
  std::cout << "wrote=" << a.out << " frames=" << meas.size() << " size=" << meas.grid.patch_size() << "\n";
  return kOk;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto ds = io::load_dataset(a.dataset);
  const fs::path dir(a.result);
  const auto x_hat = io::read_image<complex_t>(dir / "x_hat.ptyd");
  const ProbeSet probes{io::read_stack<complex_t>(dir / "probes.ptyd")};
  const auto trace = io::read_trace(dir / "trace.csv");
  if (ds.ground_truth) std::printf("nrmse=%.6e\n", nrmse(x_hat, *ds.ground_truth));
  if (ds.probes && ds.probes->count() > 0 && probes.count() > 0)
    std::printf("probe0_nrmse=%.6e\n", nrmse(probes.modes.front(), ds.probes->modes.front()));
  std::printf("forward_nrmse=%.6e\n", forward_nrmse(x_hat, probes, ds.measurements));
  if (!trace.empty())
    std::printf("iterations=%zu final_ec=%.6e modes=%zu\n", trace.size(), trace.back().ec, trace.back().modes);
  return kOk;
}

int run_info(const InfoArgs& a) {
  const auto m = io::read_manifest(a.dataset);
  std::printf("version=%d image=%zux%zu patch=%zu frames=%zu domain=%s\n", m.version, m.image_rows, m.image_cols,
              m.patch_size, m.anchors.size(),
              m.measurement_domain == io::MeasurementDomain::amplitude ? "amplitude" : "intensity");
  std::printf("ground_truth_image=%s ground_truth_probes=%s dark_frames=%s\n", m.ground_truth_image ? "yes" : "no",
              m.ground_truth_probes ? "yes" : "no", m.dark_frames ? "yes" : "no");
  if (auto f = m.fresnel())
    std::printf("wavelength=%g distance=%g pixel_pitch=%g\n", f->wavelength, f->distance, f->sample_spacing);
  if (m.measurement_domain == io::MeasurementDomain::amplitude) {
    try {
      ScanGrid grid(m.image_rows, m.image_cols, m.patch_size, m.anchors);
      if (grid.size() > 1) std::printf("overlap=%.4f\n", overlap_ratio(grid));
    } catch (const ConfigError& e) {
      throw DataError(DataError::Kind::shape_mismatch, std::string("manifest anchors: ") + e.what());
    }
  }
  std::printf("threads=%d\n", thread_count());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind multi-mode ptychographic reconstruction"};
  app.set_config("--config", "", "TOML configuration file");
  app.require_subcommand(1);

  SimulateArgs sim;
  ReconstructArgs rec;
  PreprocessArgs pre;
  EvaluateArgs eva;
  InfoArgs info;
  add_simulate(app, sim);
  add_reconstruct(app, rec);
  add_preprocess(app, pre);
  add_evaluate(app, eva);
  add_info(app, info);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (app.got_subcommand("simulate")) return run_simulate(sim);
    if (app.got_subcommand("reconstruct")) return run_reconstruct(rec);
    if (app.got_subcommand("preprocess")) return run_preprocess(pre);
    if (app.got_subcommand("evaluate")) return run_evaluate(eva);
    if (app.got_subcommand("info")) return run_info(info);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error at iteration " << e.iteration() << " (" << e.op() << "): " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
