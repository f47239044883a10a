#pragma once

// Reconstruction outputs: complex arrays, 8-bit PGM previews, the per-iteration
// trace as CSV, and convergence-curve plots.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/driver.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/io/array_file.hpp"
#include "bmpmace/io/atomic_file.hpp"

namespace bmpmace::io {

using Gray8 = Array2D<std::uint8_t>;

/// Phase in (-pi, pi] mapped linearly onto [0, 255].
inline std::uint8_t phase_to_gray(double phase) {
  const double t = (phase + std::numbers::pi) / (2.0 * std::numbers::pi);
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

inline Gray8 phase_preview(const ComplexImage& a) {
  Gray8 g(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = phase_to_gray(std::arg(a[i]));
  return g;
}

/// Magnitude scaled so the largest value maps to 255.
inline Gray8 magnitude_preview(const ComplexImage& a) {
  double peak = 0.0;
  for (const auto& v : a) peak = std::max(peak, std::abs(v));
  Gray8 g(a.rows(), a.cols());
  if (!(peak > 0.0)) return g;
  for (std::size_t i = 0; i < a.size(); ++i)
    g[i] = static_cast<std::uint8_t>(std::lround(std::clamp(std::abs(a[i]) / peak, 0.0, 1.0) * 255.0));
  return g;
}

inline void write_pgm(const fs::path& path, const Gray8& img) {
  atomic_write(path, [&](std::ostream& out) {
    out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  });
}

inline Gray8 read_pgm(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(DataError::Kind::missing_file, "missing file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P5" || maxval != 255)
    throw DataError(DataError::Kind::malformed, path.string() + ": not an 8-bit binary PGM");
  in.get();
  Gray8 img(h, w);
  if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size())))
    throw DataError(DataError::Kind::malformed, path.string() + ": truncated PGM");
  return img;
}

inline constexpr const char* kTraceHeader = "iteration,modes,ec,nrmse,data_residual,probe_energy,wall_ms";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_csv(const std::vector<IterationRecord>& trace) {
  std::ostringstream out;
  out << kTraceHeader << "\n";
  for (const auto& r : trace)
    out << r.iteration << "," << r.modes << "," << format_double(r.ec) << "," << format_double(r.nrmse) << ","
        << format_double(r.data_residual) << "," << format_double(r.probe_energy) << "," << format_double(r.wall_ms)
        << "\n";
  return out.str();
}

inline std::vector<IterationRecord> read_trace(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(DataError::Kind::missing_file, "missing trace: " + path.string());
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw DataError(DataError::Kind::malformed, path.string() + ": unexpected trace header");
  std::vector<IterationRecord> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw DataError(DataError::Kind::malformed, path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    try {
      IterationRecord r;
      r.iteration = std::stoi(f[0]);
      r.modes = std::stoul(f[1]);
      r.ec = std::stod(f[2]);
      r.nrmse = std::stod(f[3]);
      r.data_residual = std::stod(f[4]);
      r.probe_energy = std::stod(f[5]);
      r.wall_ms = std::stod(f[6]);
      trace.push_back(r);
    } catch (const std::exception&) {
      throw DataError(DataError::Kind::malformed, path.string() + ":" + std::to_string(lineno) + ": unparseable value");
    }
  }
  return trace;
}

inline void save_result(const ReconResult& result, const fs::path& out_dir) {
  ensure_directory(out_dir);
  write_image(out_dir / "x_hat.ptyd", result.x_hat);
  write_pgm(out_dir / "x_hat_magnitude.pgm", magnitude_preview(result.x_hat));
  write_pgm(out_dir / "x_hat_phase.pgm", phase_preview(result.x_hat));
  if (!result.probes.empty()) {
    write_stack(out_dir / "probes.ptyd", result.probes);
    for (std::size_t k = 0; k < result.probes.size(); ++k) {
      const std::string stem = "probe_" + std::to_string(k);
      write_pgm(out_dir / (stem + "_magnitude.pgm"), magnitude_preview(result.probes[k]));
      write_pgm(out_dir / (stem + "_phase.pgm"), phase_preview(result.probes[k]));
    }
  }
  atomic_write_text(out_dir / "trace.csv", trace_csv(result.trace));
  std::ostringstream events;
  events << "iteration,energy_before,energy_after,new_mode_raw_energy\n";
  for (const auto& e : result.mode_additions)
    events << e.iteration << "," << format_double(e.energy_before) << "," << format_double(e.energy_after) << ","
           << format_double(e.new_mode_raw_energy) << "\n";
  atomic_write_text(out_dir / "mode_additions.csv", events.str());
}

/// Line plot of `values` against their index on a log10 vertical axis.
/// Non-finite and non-positive samples are skipped.
inline Gray8 plot_log_curve(const std::vector<double>& values, std::size_t width = 480, std::size_t height = 240) {
  Gray8 img(height, width, 255);
  const std::size_t margin = 8;
  for (std::size_t r = margin; r < height - margin; ++r) img(r, margin) = 0;
  for (std::size_t c = margin; c < width - margin; ++c) img(height - margin, c) = 0;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values)
    if (std::isfinite(v) && v > 0.0) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  if (!std::isfinite(lo) || values.size() < 2) return img;
  if (hi - lo < 1e-12) hi = lo + 1.0;

  const double plot_w = double(width - 2 * margin - 1), plot_h = double(height - 2 * margin - 1);
  auto to_px = [&](std::size_t i, double v) {
    const double x = double(margin + 1) + plot_w * double(i) / double(values.size() - 1);
    const double y = double(height - margin - 1) - plot_h * (std::log10(v) - lo) / (hi - lo);
    return std::pair{x, y};
  };
  bool have_prev = false;
  std::pair<double, double> prev{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(std::isfinite(values[i]) && values[i] > 0.0)) {
      have_prev = false;
      continue;
    }
    const auto cur = to_px(i, values[i]);
    if (have_prev) {
      const int steps = std::max(1, int(std::ceil(std::max(std::abs(cur.first - prev.first), std::abs(cur.second - prev.second)))));
      for (int s = 0; s <= steps; ++s) {
        const double t = double(s) / steps;
        const auto r = static_cast<std::size_t>(std::lround(prev.second + t * (cur.second - prev.second)));
        const auto c = static_cast<std::size_t>(std::lround(prev.first + t * (cur.first - prev.first)));
        if (r < height && c < width) img(r, c) = 0;
      }
    }
    prev = cur;
    have_prev = true;
  }
  return img;
}

inline void emit_plots(const ReconResult& result, const fs::path& out_dir) {
  ensure_directory(out_dir);
  std::vector<double> ec, err;
  bool has_nrmse = false;
  for (const auto& r : result.trace) {
    ec.push_back(r.ec);
    err.push_back(r.nrmse);
    has_nrmse = has_nrmse || std::isfinite(r.nrmse);
  }
  write_pgm(out_dir / "convergence_ec.pgm", plot_log_curve(ec));
  if (has_nrmse) write_pgm(out_dir / "convergence_nrmse.pgm", plot_log_curve(err));
}

}  // namespace bmpmace::io
