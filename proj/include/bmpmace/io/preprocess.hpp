#pragma once

// Measured-data pipeline, applied per frame in this order:
// dark subtraction -> clamp at 0 -> drop outliers -> center crop -> Tukey window -> sqrt.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/io/dataset.hpp"
#include "bmpmace/parallel.hpp"
#include "bmpmace/scan_grid.hpp"

namespace bmpmace::io {

struct PreprocessConfig {
  std::size_t dark_frame_count = 20;  ///< leading dark frames averaged; 0 skips subtraction
  std::vector<std::size_t> outlier_indices;
  std::size_t crop_size = 512;
  double tukey_shape = 0.5;

  void validate() const {
    if (crop_size == 0) throw ConfigError("crop_size must be positive");
    if (!(tukey_shape >= 0.0 && tukey_shape <= 1.0)) throw ConfigError("tukey_shape must lie in [0, 1]");
  }
};

/// Radial Tukey window: the 1D taper of length `size` evaluated at the
/// distance from pixel (size/2, size/2), clamped to the half-length.
inline RealImage tukey_window_2d(std::size_t size, double alpha) {
  if (size < 2) throw ConfigError("tukey_window_2d: size must be at least 2");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("tukey_window_2d: alpha must lie in [0, 1]");
  RealImage w(size, size, 1.0);
  if (alpha == 0.0) return w;
  const std::size_t c = size / 2;
  const double half = static_cast<double>(c);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t k = 0; k < size; ++k) {
      const double t = std::min(std::hypot(double(r) - half, double(k) - half) / half, 1.0);
      if (t > 1.0 - alpha) w(r, k) = 0.5 * (1.0 + std::cos(std::numbers::pi * (t - 1.0 + alpha) / alpha));
    }
  return w;
}

/// Top-left corner of a centered crop; the trailing edge loses the odd pixel.
inline std::size_t crop_offset(std::size_t raw, std::size_t crop) { return (raw - crop) / 2; }

/// Mean of the first `count` dark frames.
inline RealImage mean_dark(const Stack<double>& darks, std::size_t count) {
  if (count == 0 || darks.empty()) throw ConfigError("mean_dark: no dark frames");
  if (count > darks.size())
    throw DataError(DataError::Kind::shape_mismatch, "dark_frame_count is " + std::to_string(count) + " but only " +
                                                         std::to_string(darks.size()) + " dark frames are available");
  RealImage mean(darks.front().rows(), darks.front().cols());
  for (std::size_t i = 0; i < count; ++i) mean += darks[i];
  mean *= 1.0 / double(count);
  return mean;
}

struct PreprocessOutput {
  Stack<double> y;                ///< amplitude frames, crop_size x crop_size
  std::vector<std::size_t> kept;  ///< raw indices of the surviving frames, ascending
};

inline PreprocessOutput preprocess_measured(const Stack<double>& raw, const Stack<double>* darks,
                                            const PreprocessConfig& cfg) {
  cfg.validate();
  if (raw.empty()) throw DataError(DataError::Kind::malformed, "preprocess: no frames");
  const std::size_t rows = raw.front().rows(), cols = raw.front().cols();
  for (std::size_t j = 0; j < raw.size(); ++j)
    if (raw[j].rows() != rows || raw[j].cols() != cols)
      throw DataError(DataError::Kind::shape_mismatch, "preprocess: frame " + std::to_string(j) + " differs in shape");
  if (cfg.crop_size > rows || cfg.crop_size > cols)
    throw DataError(DataError::Kind::shape_mismatch, "preprocess: crop " + std::to_string(cfg.crop_size) +
                                                         " exceeds frame " + std::to_string(rows) + "x" + std::to_string(cols));
  const std::set<std::size_t> drop(cfg.outlier_indices.begin(), cfg.outlier_indices.end());
  if (!drop.empty() && *drop.rbegin() >= raw.size())
    throw DataError(DataError::Kind::out_of_range, "preprocess: outlier index " + std::to_string(*drop.rbegin()) +
                                                       " out of range for " + std::to_string(raw.size()) + " frames");

  std::optional<RealImage> dark;
  if (cfg.dark_frame_count > 0) {
    if (!darks) throw DataError(DataError::Kind::missing_file, "preprocess: dark_frame_count > 0 but no dark frames given");
    for (const auto& d : *darks)
      if (d.rows() != rows || d.cols() != cols)
        throw DataError(DataError::Kind::shape_mismatch, "preprocess: dark frames differ in shape from raw frames");
    dark = mean_dark(*darks, cfg.dark_frame_count);
  }

  PreprocessOutput out;
  for (std::size_t j = 0; j < raw.size(); ++j)
    if (!drop.contains(j)) out.kept.push_back(j);

  const std::size_t n = cfg.crop_size;
  const std::size_t r0 = crop_offset(rows, n), c0 = crop_offset(cols, n);
  const RealImage window = tukey_window_2d(n, cfg.tukey_shape);
  out.y.resize(out.kept.size());
  parallel_for(out.kept.size(), [&](std::size_t i) {
    RealImage frame = raw[out.kept[i]];
    if (dark) frame -= *dark;
    for (auto& v : frame) v = std::max(v, 0.0);
    RealImage cropped(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) cropped(r, c) = frame(r0 + r, c0 + c) * window(r, c);
    for (auto& v : cropped) v = std::sqrt(v);
    out.y[i] = std::move(cropped);
  });
  return out;
}

/// Applies the pipeline to a raw dataset and drops the anchors of excluded frames.
inline MeasurementSet preprocess_dataset(const RawDataset& raw, const PreprocessConfig& cfg) {
  const auto& m = raw.manifest;
  if (m.patch_size != cfg.crop_size)
    throw DataError(DataError::Kind::shape_mismatch, "preprocess: manifest patch_size " + std::to_string(m.patch_size) +
                                                         " differs from crop_size " + std::to_string(cfg.crop_size));
  auto out = preprocess_measured(raw.frames, raw.darks ? &*raw.darks : nullptr, cfg);
  std::vector<Anchor> anchors;
  anchors.reserve(out.kept.size());
  for (auto j : out.kept) anchors.push_back(m.anchors.at(j));
  ScanGrid grid;
  try {
    grid = ScanGrid(m.image_rows, m.image_cols, m.patch_size, std::move(anchors));
  } catch (const ConfigError& e) {
    throw DataError(DataError::Kind::shape_mismatch, std::string("manifest anchors: ") + e.what());
  }
  return MeasurementSet{std::move(out.y), std::move(grid)};
}

/// Frames whose total energy lies more than `threshold` median absolute
/// deviations from the median; a suggestion for review, never applied automatically.
inline std::vector<std::size_t> suggest_outliers(const Stack<double>& frames, double threshold = 5.0) {
  if (frames.empty()) return {};
  std::vector<double> energy(frames.size());
  for (std::size_t j = 0; j < frames.size(); ++j) {
    double s = 0.0;
    for (double v : frames[j]) s += v;
    energy[j] = s;
  }
  auto median = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
  };
  const double med = median(energy);
  std::vector<double> dev(energy.size());
  for (std::size_t j = 0; j < energy.size(); ++j) dev[j] = std::abs(energy[j] - med);
  const double mad = median(dev);
  std::vector<std::size_t> flagged;
  for (std::size_t j = 0; j < energy.size(); ++j)
    if (dev[j] > threshold * mad) flagged.push_back(j);
  return flagged;
}

}  // namespace bmpmace::io
