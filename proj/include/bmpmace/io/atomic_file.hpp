#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <system_error>

#include <unistd.h>

#include "bmpmace/errors.hpp"

namespace bmpmace::io {

namespace fs = std::filesystem;

/// Writes through a sibling temporary file and renames it over `path`, so a
/// reader never observes a partially written file.
inline void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError(DataError::Kind::io_failure, "cannot open " + tmp.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw DataError(DataError::Kind::io_failure, "write failed for " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError(DataError::Kind::io_failure, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  } catch (...) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw;
  }
}

inline void atomic_write_text(const fs::path& path, const std::string& text) {
  atomic_write(path, [&](std::ostream& out) { out.write(text.data(), static_cast<std::streamsize>(text.size())); });
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError(DataError::Kind::io_failure, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

}  // namespace bmpmace::io
