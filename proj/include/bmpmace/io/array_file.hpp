#pragma once

// Binary array container: "PTYD1\n", u32 rank, rank x u32 dims, u32 dtype,
// then the row-major payload. All integers and floats are little-endian.
// dtype 0 is f32, dtype 1 is complex stored as interleaved (re, im) f32.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/io/atomic_file.hpp"

namespace bmpmace::io {

enum class DType : std::uint32_t { f32 = 0, c64 = 1 };

inline constexpr std::array<char, 6> kArrayMagic{'P', 'T', 'Y', 'D', '1', '\n'};

struct ArrayHeader {
  std::vector<std::uint32_t> dims;
  DType dtype = DType::f32;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  std::size_t floats_per_element() const { return dtype == DType::c64 ? 2 : 1; }
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError(DataError::Kind::malformed, path + ": truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void put_floats(std::ostream& out, const std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
}

inline void get_floats(std::istream& in, std::vector<float>& values, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float))))
    throw DataError(DataError::Kind::malformed, path + ": payload shorter than declared dims");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : values) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = (u >> 24) | ((u >> 8) & 0xff00) | ((u << 8) & 0xff0000) | (u << 24);
      f = std::bit_cast<float>(u);
    }
  }
}

inline void put_header(std::ostream& out, const ArrayHeader& h) {
  out.write(kArrayMagic.data(), kArrayMagic.size());
  put_u32(out, static_cast<std::uint32_t>(h.dims.size()));
  for (auto d : h.dims) put_u32(out, d);
  put_u32(out, static_cast<std::uint32_t>(h.dtype));
}

inline std::ifstream open_for_read(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(DataError::Kind::missing_file, "missing file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::io_failure, "cannot open " + path.string());
  return in;
}

inline ArrayHeader get_header(std::istream& in, const std::string& path) {
  std::array<char, 6> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kArrayMagic)
    throw DataError(DataError::Kind::malformed, path + ": not a PTYD1 array file");
  ArrayHeader h;
  const std::uint32_t rank = get_u32(in, path);
  if (rank == 0 || rank > 8) throw DataError(DataError::Kind::malformed, path + ": unsupported rank " + std::to_string(rank));
  for (std::uint32_t i = 0; i < rank; ++i) h.dims.push_back(get_u32(in, path));
  const std::uint32_t code = get_u32(in, path);
  if (code > 1) throw DataError(DataError::Kind::malformed, path + ": unknown dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  return h;
}

inline std::uint32_t checked_dim(std::size_t n) {
  if (n > 0xffffffffu) throw DataError(DataError::Kind::out_of_range, "array dimension exceeds u32");
  return static_cast<std::uint32_t>(n);
}

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, complex_t> ? DType::c64 : DType::f32;
}

template <typename T>
void append_values(const Array2D<T>& a, std::vector<float>& out) {
  for (const auto& v : a) {
    if constexpr (std::is_same_v<T, complex_t>) {
      out.push_back(static_cast<float>(v.real()));
      out.push_back(static_cast<float>(v.imag()));
    } else {
      out.push_back(static_cast<float>(v));
    }
  }
}

template <typename T>
Array2D<T> frame_from(const std::vector<float>& buf, std::size_t rows, std::size_t cols) {
  Array2D<T> a(rows, cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (std::is_same_v<T, complex_t>) a[i] = complex_t(buf[2 * i], buf[2 * i + 1]);
    else a[i] = buf[i];
  }
  return a;
}

template <typename T>
void expect(const ArrayHeader& h, std::size_t rank, const std::string& path) {
  if (h.dims.size() != rank)
    throw DataError(DataError::Kind::shape_mismatch,
                    path + ": expected rank " + std::to_string(rank) + ", found " + std::to_string(h.dims.size()));
  if (h.dtype != dtype_of<T>())
    throw DataError(DataError::Kind::shape_mismatch,
                    path + (h.dtype == DType::c64 ? ": expected a real array, found complex" : ": expected a complex array, found real"));
}

}  // namespace detail

inline ArrayHeader read_array_header(const fs::path& path) {
  auto in = detail::open_for_read(path);
  return detail::get_header(in, path.string());
}

/// Writes a stack of equally shaped frames as a rank-3 array [count, rows, cols].
template <typename T>
void write_stack(const fs::path& path, const Stack<T>& frames) {
  if (frames.empty()) throw DataError(DataError::Kind::malformed, "write_stack: empty stack for " + path.string());
  const auto rows = frames.front().rows(), cols = frames.front().cols();
  for (const auto& f : frames)
    if (f.rows() != rows || f.cols() != cols)
      throw DataError(DataError::Kind::shape_mismatch, "write_stack: frames differ in shape for " + path.string());
  ArrayHeader h{{detail::checked_dim(frames.size()), detail::checked_dim(rows), detail::checked_dim(cols)},
                detail::dtype_of<T>()};
  atomic_write(path, [&](std::ostream& out) {
    detail::put_header(out, h);
    std::vector<float> buf;
    for (const auto& f : frames) {
      buf.clear();
      detail::append_values(f, buf);
      detail::put_floats(out, buf);
    }
  });
}

template <typename T>
void write_image(const fs::path& path, const Array2D<T>& image) {
  ArrayHeader h{{detail::checked_dim(image.rows()), detail::checked_dim(image.cols())}, detail::dtype_of<T>()};
  atomic_write(path, [&](std::ostream& out) {
    detail::put_header(out, h);
    std::vector<float> buf;
    detail::append_values(image, buf);
    detail::put_floats(out, buf);
  });
}

template <typename T>
Stack<T> read_stack(const fs::path& path) {
  auto in = detail::open_for_read(path);
  const auto h = detail::get_header(in, path.string());
  detail::expect<T>(h, 3, path.string());
  const std::size_t rows = h.dims[1], cols = h.dims[2];
  std::vector<float> buf(rows * cols * h.floats_per_element());
  Stack<T> out;
  out.reserve(h.dims[0]);
  for (std::size_t j = 0; j < h.dims[0]; ++j) {
    detail::get_floats(in, buf, path.string());
    out.push_back(detail::frame_from<T>(buf, rows, cols));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(DataError::Kind::malformed, path.string() + ": trailing bytes after payload");
  return out;
}

template <typename T>
Array2D<T> read_image(const fs::path& path) {
  auto in = detail::open_for_read(path);
  const auto h = detail::get_header(in, path.string());
  detail::expect<T>(h, 2, path.string());
  std::vector<float> buf(h.element_count() * h.floats_per_element());
  detail::get_floats(in, buf, path.string());
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(DataError::Kind::malformed, path.string() + ": trailing bytes after payload");
  return detail::frame_from<T>(buf, h.dims[0], h.dims[1]);
}

}  // namespace bmpmace::io
