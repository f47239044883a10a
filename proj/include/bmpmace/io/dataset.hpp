#pragma once

// JSON dataset manifest plus binary array files.
//
// {
//   "version": 1,
//   "image_size": [N1, N2],
//   "patch_size": Np,
//   "anchors": [[row, col], ...]            or  "positions": [[y, x], ...] with "pixel_pitch"
//   "measurements": "measurements.ptyd",   rank 3 f32 [J, Np, Np]
//   "measurement_domain": "amplitude",     or "intensity" for raw detector frames
//   "ground_truth_image": "...",            optional, rank 2 c64
//   "ground_truth_probes": "...",           optional, rank 3 c64 [K, Np, Np]
//   "dark_frames": "...",                   optional, rank 3 f32
//   "wavelength": m, "distance": m, "pixel_pitch": m   optional metadata
// }
//
// Relative file references resolve against the manifest's directory.

#include <cfenv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmpmace/array2d.hpp"
#include "bmpmace/errors.hpp"
#include "bmpmace/forward.hpp"
#include "bmpmace/fresnel.hpp"
#include "bmpmace/io/array_file.hpp"
#include "bmpmace/io/atomic_file.hpp"
#include "bmpmace/scan_grid.hpp"

namespace bmpmace::io {

inline constexpr int kManifestVersion = 1;

enum class MeasurementDomain { amplitude, intensity };

struct DatasetManifest {
  int version = kManifestVersion;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::size_t patch_size = 0;
  std::vector<Anchor> anchors;
  std::vector<std::array<double, 2>> positions;  ///< physical (y, x), used when anchors is empty
  std::string measurements;
  MeasurementDomain measurement_domain = MeasurementDomain::amplitude;
  std::optional<std::string> ground_truth_image;
  std::optional<std::string> ground_truth_probes;
  std::optional<std::string> dark_frames;
  std::optional<double> wavelength;
  std::optional<double> distance;
  std::optional<double> pixel_pitch;

  std::optional<FresnelParams> fresnel() const {
    if (wavelength && distance && pixel_pitch) return FresnelParams{*wavelength, *distance, *pixel_pitch};
    return std::nullopt;
  }
};

/// Pixel anchors from physical positions: offsets from the smallest
/// coordinate on each axis, divided by the pitch and rounded half to even.
inline std::vector<Anchor> anchors_from_positions(const std::vector<std::array<double, 2>>& positions, double pitch) {
  if (!(pitch > 0.0) || !std::isfinite(pitch)) throw DataError(DataError::Kind::malformed, "pixel_pitch must be positive");
  if (positions.empty()) return {};
  double min_y = positions.front()[0], min_x = positions.front()[1];
  for (const auto& p : positions) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw DataError(DataError::Kind::malformed, "positions: non-finite entry");
    min_y = std::min(min_y, p[0]);
    min_x = std::min(min_x, p[1]);
  }
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  std::vector<Anchor> anchors;
  anchors.reserve(positions.size());
  for (const auto& p : positions)
    anchors.push_back({static_cast<std::size_t>(std::nearbyint((p[0] - min_y) / pitch)),
                       static_cast<std::size_t>(std::nearbyint((p[1] - min_x) / pitch))});
  std::fesetround(saved);
  return anchors;
}

namespace detail {

using nlohmann::json;

inline fs::path resolve(const fs::path& base, const std::string& ref) {
  const fs::path p(ref);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(DataError::Kind::malformed, std::string("manifest: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::malformed, std::string("manifest: field '") + key + "': " + e.what());
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return required<T>(j, key);
}

}  // namespace detail

inline DatasetManifest parse_manifest(const nlohmann::json& j) {
  using detail::optional_field;
  using detail::required;
  if (!j.is_object()) throw DataError(DataError::Kind::malformed, "manifest: top level must be an object");
  DatasetManifest m;
  if (!j.contains("version")) throw DataError(DataError::Kind::unknown_version, "manifest: missing version");
  if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kManifestVersion)
    throw DataError(DataError::Kind::unknown_version, "manifest: unrecognized version " + j.at("version").dump());
  const auto size = required<std::vector<std::size_t>>(j, "image_size");
  if (size.size() != 2) throw DataError(DataError::Kind::malformed, "manifest: image_size must have two entries");
  m.image_rows = size[0];
  m.image_cols = size[1];
  m.patch_size = required<std::size_t>(j, "patch_size");
  m.measurements = required<std::string>(j, "measurements");
  if (auto dom = optional_field<std::string>(j, "measurement_domain")) {
    if (*dom == "amplitude") m.measurement_domain = MeasurementDomain::amplitude;
    else if (*dom == "intensity") m.measurement_domain = MeasurementDomain::intensity;
    else throw DataError(DataError::Kind::malformed, "manifest: measurement_domain must be 'amplitude' or 'intensity'");
  }
  m.ground_truth_image = optional_field<std::string>(j, "ground_truth_image");
  m.ground_truth_probes = optional_field<std::string>(j, "ground_truth_probes");
  m.dark_frames = optional_field<std::string>(j, "dark_frames");
  m.wavelength = optional_field<double>(j, "wavelength");
  m.distance = optional_field<double>(j, "distance");
  m.pixel_pitch = optional_field<double>(j, "pixel_pitch");

  if (j.contains("anchors")) {
    for (const auto& a : required<std::vector<std::array<long long, 2>>>(j, "anchors")) {
      if (a[0] < 0 || a[1] < 0) throw DataError(DataError::Kind::malformed, "manifest: negative anchor");
      m.anchors.push_back({static_cast<std::size_t>(a[0]), static_cast<std::size_t>(a[1])});
    }
  } else if (j.contains("positions")) {
    m.positions = required<std::vector<std::array<double, 2>>>(j, "positions");
    if (!m.pixel_pitch) throw DataError(DataError::Kind::malformed, "manifest: positions require pixel_pitch");
    m.anchors = anchors_from_positions(m.positions, *m.pixel_pitch);
  } else {
    throw DataError(DataError::Kind::malformed, "manifest: needs either 'anchors' or 'positions'");
  }
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["image_size"] = {m.image_rows, m.image_cols};
  j["patch_size"] = m.patch_size;
  if (!m.positions.empty()) {
    j["positions"] = m.positions;
  } else {
    auto& a = j["anchors"] = nlohmann::json::array();
    for (const auto& an : m.anchors) a.push_back({an.row, an.col});
  }
  j["measurements"] = m.measurements;
  j["measurement_domain"] = m.measurement_domain == MeasurementDomain::amplitude ? "amplitude" : "intensity";
  if (m.ground_truth_image) j["ground_truth_image"] = *m.ground_truth_image;
  if (m.ground_truth_probes) j["ground_truth_probes"] = *m.ground_truth_probes;
  if (m.dark_frames) j["dark_frames"] = *m.dark_frames;
  if (m.wavelength) j["wavelength"] = *m.wavelength;
  if (m.distance) j["distance"] = *m.distance;
  if (m.pixel_pitch) j["pixel_pitch"] = *m.pixel_pitch;
  return j;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(DataError::Kind::missing_file, "missing manifest: " + path.string());
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::io_failure, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::malformed, path.string() + ": " + e.what());
  }
  return parse_manifest(j);
}

struct Dataset {
  DatasetManifest manifest;
  MeasurementSet measurements;
  std::optional<ComplexImage> ground_truth;
  std::optional<ProbeSet> probes;
};

/// Raw detector frames before preprocessing; frames need not match patch_size.
struct RawDataset {
  DatasetManifest manifest;
  Stack<double> frames;
  std::optional<Stack<double>> darks;
};

namespace detail {

inline ScanGrid grid_from(const DatasetManifest& m) {
  try {
    return ScanGrid(m.image_rows, m.image_cols, m.patch_size, m.anchors);
  } catch (const ConfigError& e) {
    throw DataError(DataError::Kind::shape_mismatch, std::string("manifest anchors: ") + e.what());
  }
}

inline void check_file(const fs::path& base, const std::string& ref, const char* field) {
  if (!fs::exists(resolve(base, ref)))
    throw DataError(DataError::Kind::missing_file, std::string(field) + ": missing file " + resolve(base, ref).string());
}

}  // namespace detail

inline Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const auto& m = ds.manifest;
  const fs::path base = manifest_path.parent_path();
  if (m.measurement_domain != MeasurementDomain::amplitude)
    throw DataError(DataError::Kind::malformed,
                    manifest_path.string() + ": measurements are raw intensities; run the preprocessing step first");
  detail::check_file(base, m.measurements, "measurements");
  if (m.ground_truth_image) detail::check_file(base, *m.ground_truth_image, "ground_truth_image");
  if (m.ground_truth_probes) detail::check_file(base, *m.ground_truth_probes, "ground_truth_probes");

  ScanGrid grid = detail::grid_from(m);
  auto y = read_stack<double>(detail::resolve(base, m.measurements));
  if (y.size() != grid.size())
    throw DataError(DataError::Kind::shape_mismatch, "measurements: " + std::to_string(y.size()) + " frames for " +
                                                         std::to_string(grid.size()) + " anchors");
  if (!y.empty() && (y.front().rows() != m.patch_size || y.front().cols() != m.patch_size))
    throw DataError(DataError::Kind::shape_mismatch, "measurements: frames are " + std::to_string(y.front().rows()) + "x" +
                                                         std::to_string(y.front().cols()) + ", patch_size is " +
                                                         std::to_string(m.patch_size));
  ds.measurements = MeasurementSet{std::move(y), std::move(grid)};
  ds.measurements.validate();

  if (m.ground_truth_image) {
    auto x = read_image<complex_t>(detail::resolve(base, *m.ground_truth_image));
    if (x.rows() != m.image_rows || x.cols() != m.image_cols)
      throw DataError(DataError::Kind::shape_mismatch, "ground_truth_image: shape does not match image_size");
    ds.ground_truth = std::move(x);
  }
  if (m.ground_truth_probes) {
    auto modes = read_stack<complex_t>(detail::resolve(base, *m.ground_truth_probes));
    if (modes.front().rows() != m.patch_size || modes.front().cols() != m.patch_size)
      throw DataError(DataError::Kind::shape_mismatch, "ground_truth_probes: shape does not match patch_size");
    ds.probes = ProbeSet{std::move(modes)};
  }
  return ds;
}

inline RawDataset load_raw_dataset(const fs::path& manifest_path) {
  RawDataset raw;
  raw.manifest = read_manifest(manifest_path);
  const auto& m = raw.manifest;
  const fs::path base = manifest_path.parent_path();
  detail::check_file(base, m.measurements, "measurements");
  if (m.dark_frames) detail::check_file(base, *m.dark_frames, "dark_frames");
  raw.frames = read_stack<double>(detail::resolve(base, m.measurements));
  if (raw.frames.size() != m.anchors.size())
    throw DataError(DataError::Kind::shape_mismatch, "measurements: " + std::to_string(raw.frames.size()) +
                                                         " frames for " + std::to_string(m.anchors.size()) + " anchors");
  if (m.dark_frames) {
    auto darks = read_stack<double>(detail::resolve(base, *m.dark_frames));
    if (!darks.front().same_shape(raw.frames.front()))
      throw DataError(DataError::Kind::shape_mismatch, "dark_frames: shape differs from the measurement frames");
    raw.darks = std::move(darks);
  }
  return raw;
}

struct DatasetMetadata {
  std::optional<double> wavelength;
  std::optional<double> distance;
  std::optional<double> pixel_pitch;
};

/// Writes arrays next to `manifest_path` and then the manifest itself.
inline DatasetManifest save_dataset(const fs::path& manifest_path, const MeasurementSet& meas,
                                    const DatasetMetadata& meta = {}, const ComplexImage* ground_truth = nullptr,
                                    const ProbeSet* probes = nullptr) {
  meas.validate();
  const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  ensure_directory(dir);
  const std::string stem = manifest_path.stem().string();

  DatasetManifest m;
  m.image_rows = meas.grid.image_rows();
  m.image_cols = meas.grid.image_cols();
  m.patch_size = meas.grid.patch_size();
  m.anchors = meas.grid.anchors();
  m.wavelength = meta.wavelength;
  m.distance = meta.distance;
  m.pixel_pitch = meta.pixel_pitch;
  m.measurements = stem + "_measurements.ptyd";
  write_stack(dir / m.measurements, meas.y);
  if (ground_truth) {
    m.ground_truth_image = stem + "_ground_truth_image.ptyd";
    write_image(dir / *m.ground_truth_image, *ground_truth);
  }
  if (probes) {
    m.ground_truth_probes = stem + "_ground_truth_probes.ptyd";
    write_stack(dir / *m.ground_truth_probes, probes->modes);
  }
  atomic_write_text(manifest_path, manifest_to_json(m).dump(2) + "\n");
  return m;
}

/// Writes a raw intensity dataset (used for measured frames and tests of the preprocessing path).
inline DatasetManifest save_raw_dataset(const fs::path& manifest_path, DatasetManifest m, const Stack<double>& frames,
                                        const Stack<double>* darks = nullptr) {
  const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  ensure_directory(dir);
  const std::string stem = manifest_path.stem().string();
  m.measurement_domain = MeasurementDomain::intensity;
  m.measurements = stem + "_raw.ptyd";
  write_stack(dir / m.measurements, frames);
  if (darks) {
    m.dark_frames = stem + "_darks.ptyd";
    write_stack(dir / *m.dark_frames, *darks);
  }
  atomic_write_text(manifest_path, manifest_to_json(m).dump(2) + "\n");
  return m;
}

}  // namespace bmpmace::io
