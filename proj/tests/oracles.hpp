#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls the library's FFT, consensus or metric code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/scan_grid.hpp"

namespace oracle {

using bmpmace::complex_t;
using bmpmace::ComplexImage;
using bmpmace::RealImage;

inline ComplexImage random_complex(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  ComplexImage a(rows, cols);
  for (auto& v : a) v = complex_t(n(rng), n(rng));
  return a;
}

/// Direct O(N^4) unitary DFT, DC at (0,0); sign -1 forward, +1 inverse.
inline ComplexImage naive_dft2(const ComplexImage& f, int sign = -1) {
  const std::size_t R = f.rows(), C = f.cols();
  ComplexImage out(R, C);
  for (std::size_t u = 0; u < R; ++u)
    for (std::size_t v = 0; v < C; ++v) {
      complex_t acc = 0.0;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const double ph = 2.0 * std::numbers::pi * (double(u * r) / double(R) + double(v * c) / double(C));
          acc += f(r, c) * std::polar(1.0, sign * ph);
        }
      out(u, v) = acc / std::sqrt(double(R * C));
    }
  return out;
}

/// Centered variant: index i maps to frequency i - N/2 on both sides.
inline ComplexImage naive_centered_dft2(const ComplexImage& f, int sign = -1) {
  const std::size_t R = f.rows(), C = f.cols();
  ComplexImage out(R, C);
  const double hr = double(R / 2), hc = double(C / 2);
  for (std::size_t u = 0; u < R; ++u)
    for (std::size_t v = 0; v < C; ++v) {
      complex_t acc = 0.0;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const double ph = 2.0 * std::numbers::pi *
                            ((double(u) - hr) * (double(r) - hr) / double(R) + (double(v) - hc) * (double(c) - hc) / double(C));
          acc += f(r, c) * std::polar(1.0, sign * ph);
        }
      out(u, v) = acc / std::sqrt(double(R * C));
    }
  return out;
}

inline double rel_diff(const ComplexImage& a, const ComplexImage& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / (den > 0.0 ? den : 1.0));
}

inline double stack_rel_diff(const std::vector<ComplexImage>& a, const std::vector<ComplexImage>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t i = 0; i < a[j].size(); ++i) {
      num += std::norm(a[j][i] - b[j][i]);
      den += std::norm(b[j][i]);
    }
  return std::sqrt(num / (den > 0.0 ? den : 1.0));
}

/// Probe-weighted patch average assembled pixel by pixel, with every
/// contributing (j, k) pair enumerated explicitly. Pixels without weight are 0.
inline ComplexImage brute_consensus(const std::vector<ComplexImage>& stack, const std::vector<ComplexImage>& modes,
                                    const bmpmace::ScanGrid& grid, double kappa) {
  std::vector<double> energy;
  double total = 0.0;
  for (const auto& d : modes) {
    double e = 0.0;
    for (const auto& v : d) e += std::norm(v);
    energy.push_back(e);
    total += e;
  }
  const std::size_t n = grid.patch_size();
  ComplexImage out(grid.image_rows(), grid.image_cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) {
      complex_t value = 0.0;
      double covered = 0.0;
      for (std::size_t k = 0; k < modes.size(); ++k) {
        double lam = 0.0;
        complex_t num = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
          const auto a = grid[j];
          if (r < a.row || c < a.col || r >= a.row + n || c >= a.col + n) continue;
          const double w = std::pow(std::abs(modes[k](r - a.row, c - a.col)), kappa);
          lam += w;
          num += w * stack[j](r - a.row, c - a.col);
        }
        if (lam > 0.0) {
          value += (energy[k] / total) * num / lam;
          covered += energy[k] / total;
        }
      }
      out(r, c) = covered > 0.0 ? value / covered : 0.0;
    }
  return out;
}

/// Standard 1D Tukey taper on x in [0, 1] (x = 0 and x = 1 are the array ends).
inline double tukey_1d(double x, double alpha) {
  if (alpha <= 0.0) return 1.0;
  if (x < 0.0 || x > 1.0) return 0.0;
  if (x < alpha / 2.0) return 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / alpha - 1.0)));
  if (x > 1.0 - alpha / 2.0) return 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / alpha - 2.0 / alpha + 1.0)));
  return 1.0;
}

/// Median filter with a centered window, truncated at the ends.
inline std::vector<double> median_filter(const std::vector<double>& v, std::size_t width) {
  std::vector<double> out(v.size());
  const long h = long(width / 2);
  for (long i = 0; i < long(v.size()); ++i) {
    std::vector<double> w;
    for (long o = -h; o <= h; ++o)
      if (i + o >= 0 && i + o < long(v.size())) w.push_back(v[std::size_t(i + o)]);
    std::sort(w.begin(), w.end());
    out[std::size_t(i)] = w.size() % 2 ? w[w.size() / 2] : 0.5 * (w[w.size() / 2 - 1] + w[w.size() / 2]);
  }
  return out;
}

}  // namespace oracle
