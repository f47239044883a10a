#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"

namespace bmpmace {

struct Anchor {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Anchor&) const = default;
};

/// Ordered patch anchors; each anchor is the top-left pixel of an
/// N_p x N_p window that lies fully inside the image.
class ScanGrid {
 public:
  ScanGrid() = default;
  ScanGrid(std::size_t image_rows, std::size_t image_cols, std::size_t patch_size, std::vector<Anchor> anchors)
      : image_rows_(image_rows), image_cols_(image_cols), patch_size_(patch_size), anchors_(std::move(anchors)) {
    if (patch_size_ == 0) throw ConfigError("ScanGrid: patch size must be positive");
    if (patch_size_ > image_rows_ || patch_size_ > image_cols_)
      throw ConfigError("ScanGrid: patch larger than image");
    if (anchors_.empty()) throw ConfigError("ScanGrid: no anchors");
    for (std::size_t j = 0; j < anchors_.size(); ++j) {
      const auto& a = anchors_[j];
      if (a.row + patch_size_ > image_rows_ || a.col + patch_size_ > image_cols_)
        throw ConfigError("ScanGrid: anchor " + std::to_string(j) + " at (" + std::to_string(a.row) + "," +
                          std::to_string(a.col) + ") places the patch outside the image");
    }
  }

  std::size_t size() const noexcept { return anchors_.size(); }
  std::size_t patch_size() const noexcept { return patch_size_; }
  std::size_t image_rows() const noexcept { return image_rows_; }
  std::size_t image_cols() const noexcept { return image_cols_; }
  const std::vector<Anchor>& anchors() const noexcept { return anchors_; }
  const Anchor& operator[](std::size_t j) const { return anchors_.at(j); }

  bool operator==(const ScanGrid&) const = default;

 private:
  std::size_t image_rows_ = 0;
  std::size_t image_cols_ = 0;
  std::size_t patch_size_ = 0;
  std::vector<Anchor> anchors_;
};

/// P_j x
template <typename T>
Array2D<T> extract_patch(const Array2D<T>& image, const ScanGrid& grid, std::size_t j) {
  if (j >= grid.size()) throw std::out_of_range("extract_patch: index " + std::to_string(j) + " out of range");
  if (image.rows() != grid.image_rows() || image.cols() != grid.image_cols())
    throw std::invalid_argument("extract_patch: image shape does not match grid");
  const auto [r0, c0] = grid[j];
  const std::size_t n = grid.patch_size();
  Array2D<T> patch(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) patch(r, c) = image(r0 + r, c0 + c);
  return patch;
}

/// accumulator += P_j^T patch
template <typename T>
void insert_patch_adjoint(const Array2D<T>& patch, const ScanGrid& grid, std::size_t j, Array2D<T>& accumulator) {
  if (j >= grid.size()) throw std::out_of_range("insert_patch_adjoint: index " + std::to_string(j) + " out of range");
  const std::size_t n = grid.patch_size();
  if (patch.rows() != n || patch.cols() != n) throw std::invalid_argument("insert_patch_adjoint: patch shape mismatch");
  if (accumulator.rows() != grid.image_rows() || accumulator.cols() != grid.image_cols())
    throw std::invalid_argument("insert_patch_adjoint: accumulator shape mismatch");
  const auto [r0, c0] = grid[j];
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) accumulator(r0 + r, c0 + c) += patch(r, c);
}

/// [P_0 x, ..., P_{J-1} x]
template <typename T>
Stack<T> extract_patches(const Array2D<T>& image, const ScanGrid& grid) {
  Stack<T> out;
  out.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out.push_back(extract_patch(image, grid, j));
  return out;
}

/// Centered rectangular raster with independent integer jitter per axis,
/// clamped so every patch stays inside the image.
///
/// With `pin_edges`, the first and last raster lines are stretched to the
/// image edges and keep their edge coordinate unjittered, so the patches
/// cover every pixel whenever the spacing does not exceed the patch size.
inline ScanGrid generate_scan_grid(std::size_t image_rows, std::size_t image_cols, std::size_t patch_size,
                                   std::size_t nominal_spacing, std::size_t jitter_range, std::uint64_t seed,
                                   bool pin_edges = false) {
  if (nominal_spacing == 0) throw ConfigError("generate_scan_grid: nominal spacing must be positive");
  if (patch_size == 0 || patch_size > image_rows || patch_size > image_cols)
    throw ConfigError("generate_scan_grid: patch larger than image");

  auto raster = [&](std::size_t extent) {
    const std::size_t span = extent - patch_size;
    const std::size_t count = span / nominal_spacing + 1;
    const std::size_t offset = (span - (count - 1) * nominal_spacing) / 2;
    std::vector<long> pos(count);
    for (std::size_t i = 0; i < count; ++i) pos[i] = static_cast<long>(offset + i * nominal_spacing);
    if (pin_edges) {
      pos.front() = 0;
      if (count > 1) pos.back() = static_cast<long>(span);
      else if (span > 0) pos.push_back(static_cast<long>(span));
    }
    return pos;
  };
  const auto rows = raster(image_rows);
  const auto cols = raster(image_cols);

  std::mt19937_64 rng(seed);
  const auto jr = static_cast<long>(jitter_range);
  std::uniform_int_distribution<long> jitter(-jr, jr);
  const long max_r = static_cast<long>(image_rows - patch_size);
  const long max_c = static_cast<long>(image_cols - patch_size);

  std::vector<Anchor> anchors;
  anchors.reserve(rows.size() * cols.size());
  auto pinned = [&](long p, long max) { return pin_edges && (p == 0 || p == max); };
  for (long r : rows) {
    for (long c : cols) {
      long dr = jr > 0 ? jitter(rng) : 0;
      long dc = jr > 0 ? jitter(rng) : 0;
      if (pinned(r, max_r)) dr = 0;
      if (pinned(c, max_c)) dc = 0;
      anchors.push_back({static_cast<std::size_t>(std::clamp(r + dr, 0L, max_r)),
                         static_cast<std::size_t>(std::clamp(c + dc, 0L, max_c))});
    }
  }
  return ScanGrid(image_rows, image_cols, patch_size, std::move(anchors));
}

/// Diagnostic overlap: 1 - (mean nearest-neighbor anchor distance) / N_p, clamped to [0, 1].
inline double overlap_ratio(const ScanGrid& grid) {
  if (grid.size() < 2) throw ConfigError("overlap_ratio: needs at least two anchors");
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (k == i) continue;
      const double dr = double(grid[i].row) - double(grid[k].row);
      const double dc = double(grid[i].col) - double(grid[k].col);
      best = std::min(best, std::hypot(dr, dc));
    }
    total += best;
  }
  const double mean_nn = total / double(grid.size());
  return std::clamp(1.0 - mean_nn / double(grid.patch_size()), 0.0, 1.0);
}

}  // namespace bmpmace
