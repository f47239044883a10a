#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "bmpmace/io/array_file.hpp"
#include "bmpmace/io/dataset.hpp"
#include "bmpmace/io/preprocess.hpp"
#include "bmpmace/io/results.hpp"
#include "oracles.hpp"

using namespace bmpmace;
using namespace bmpmace::io;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("bmpmace_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Values exactly representable in single precision.
ComplexImage f32_complex(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  auto a = oracle::random_complex(rows, cols, seed);
  for (auto& v : a) v = complex_t(float(v.real()), float(v.imag()));
  return a;
}

RealImage f32_real(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  auto a = magnitude(f32_complex(rows, cols, seed));
  for (auto& v : a) v = float(v);
  return a;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

DataError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected DataError";
  return DataError::Kind::io_failure;
}

MeasurementSet small_measurements() {
  const ScanGrid grid(10, 12, 4, {{0, 0}, {3, 5}, {6, 8}});
  MeasurementSet meas{{}, grid};
  for (std::uint64_t j = 0; j < 3; ++j) meas.y.push_back(f32_real(4, 4, j));
  return meas;
}

}  // namespace

TEST(ArrayFile, ComplexImageRoundTrip) {
  TempDir dir;
  const auto a = f32_complex(5, 7, 1);
  write_image(dir.path() / "a.ptyd", a);
  EXPECT_EQ(read_image<complex_t>(dir.path() / "a.ptyd"), a);
  const auto h = read_array_header(dir.path() / "a.ptyd");
  EXPECT_EQ(h.dtype, DType::c64);
  EXPECT_EQ(h.dims, (std::vector<std::uint32_t>{5, 7}));
}

TEST(ArrayFile, RealStackRoundTrip) {
  TempDir dir;
  Stack<double> s{f32_real(3, 4, 1), f32_real(3, 4, 2)};
  write_stack(dir.path() / "s.ptyd", s);
  EXPECT_EQ(read_stack<double>(dir.path() / "s.ptyd"), s);
}

TEST(ArrayFile, SaveLoadIsIdempotentForDoubles) {
  TempDir dir;
  const auto a = oracle::random_complex(6, 6, 3);
  write_image(dir.path() / "a.ptyd", a);
  const auto once = read_image<complex_t>(dir.path() / "a.ptyd");
  EXPECT_LE(oracle::rel_diff(once, a), 1e-7);
  write_image(dir.path() / "b.ptyd", once);
  EXPECT_EQ(read_image<complex_t>(dir.path() / "b.ptyd"), once);
}

TEST(ArrayFile, LittleEndianLayout) {
  TempDir dir;
  RealImage a(1, 2);
  a(0, 0) = 1.0;
  a(0, 1) = -2.0;
  write_image(dir.path() / "a.ptyd", a);
  std::ifstream in(dir.path() / "a.ptyd", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::vector<unsigned char> expect{'P', 'T', 'Y', 'D', '1', '\n',  // magic
                                          2,   0,   0,   0,   1,   0,     0, 0, 2, 0, 0, 0,  // rank, dims
                                          0,   0,   0,   0,                                  // f32
                                          0,   0,   0x80, 0x3f, 0, 0, 0, 0xc0};
  EXPECT_EQ(bytes, expect);
}

TEST(ArrayFile, Errors) {
  TempDir dir;
  EXPECT_EQ(kind_of([&] { read_image<double>(dir.path() / "nope.ptyd"); }), DataError::Kind::missing_file);
  write_text(dir.path() / "bad.ptyd", "NOTPTY");
  EXPECT_EQ(kind_of([&] { read_image<double>(dir.path() / "bad.ptyd"); }), DataError::Kind::malformed);
  write_image(dir.path() / "c.ptyd", f32_complex(2, 2, 1));
  EXPECT_EQ(kind_of([&] { read_image<double>(dir.path() / "c.ptyd"); }), DataError::Kind::shape_mismatch);
  EXPECT_EQ(kind_of([&] { read_stack<complex_t>(dir.path() / "c.ptyd"); }), DataError::Kind::shape_mismatch);
  fs::resize_file(dir.path() / "c.ptyd", fs::file_size(dir.path() / "c.ptyd") - 3);
  EXPECT_EQ(kind_of([&] { read_image<complex_t>(dir.path() / "c.ptyd"); }), DataError::Kind::malformed);
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir dir;
  const auto meas = small_measurements();
  const auto gt = f32_complex(10, 12, 7);
  const ProbeSet probes{{f32_complex(4, 4, 8), f32_complex(4, 4, 9)}};
  save_dataset(dir.path() / "scan.json", meas, DatasetMetadata{1e-9, 2e-5, 1e-8}, &gt, &probes);
  const auto ds = load_dataset(dir.path() / "scan.json");
  EXPECT_EQ(ds.measurements.grid.anchors(), meas.grid.anchors());
  EXPECT_EQ(ds.measurements.grid.image_rows(), 10u);
  EXPECT_EQ(ds.measurements.grid.image_cols(), 12u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ds.measurements.y[j], meas.y[j]);
  ASSERT_TRUE(ds.ground_truth && ds.probes);
  EXPECT_EQ(*ds.ground_truth, gt);
  EXPECT_EQ(ds.probes->modes, probes.modes);
  ASSERT_TRUE(ds.manifest.fresnel());
  EXPECT_EQ(ds.manifest.fresnel()->distance, 2e-5);
}

TEST(Dataset, FrameCountMismatchNamesBoth) {
  TempDir dir;
  auto meas = small_measurements();
  save_dataset(dir.path() / "scan.json", meas);
  auto j = nlohmann::json::parse(std::ifstream(dir.path() / "scan.json"));
  j["anchors"].push_back({1, 1});
  write_text(dir.path() / "scan.json", j.dump());
  try {
    load_dataset(dir.path() / "scan.json");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("3 frames for 4 anchors"), std::string::npos) << e.what();
  }
}

TEST(Dataset, ManifestErrors) {
  TempDir dir;
  save_dataset(dir.path() / "scan.json", small_measurements());
  auto j = nlohmann::json::parse(std::ifstream(dir.path() / "scan.json"));

  auto bad = j;
  bad["version"] = 2;
  write_text(dir.path() / "v.json", bad.dump());
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "v.json"); }), DataError::Kind::unknown_version);

  bad = j;
  bad["measurements"] = "missing.ptyd";
  write_text(dir.path() / "m.json", bad.dump());
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "m.json"); }), DataError::Kind::missing_file);

  bad = j;
  bad.erase("anchors");
  write_text(dir.path() / "a.json", bad.dump());
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "a.json"); }), DataError::Kind::malformed);

  write_text(dir.path() / "junk.json", "{not json");
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "junk.json"); }), DataError::Kind::malformed);
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "absent.json"); }), DataError::Kind::missing_file);

  bad = j;
  bad["patch_size"] = 5;
  write_text(dir.path() / "p.json", bad.dump());
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "p.json"); }), DataError::Kind::shape_mismatch);
}

TEST(Dataset, AnchorsFromPositions) {
  // 30 nm steps at a 30 nm pitch are one pixel apart; offsets start at the minimum.
  const auto a = anchors_from_positions({{3e-7, 6e-8}, {3.3e-7, 9e-8}, {3.6e-7, 6e-8}}, 3e-8);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0], (Anchor{0, 0}));
  EXPECT_EQ(a[1], (Anchor{1, 1}));
  EXPECT_EQ(a[2], (Anchor{2, 0}));
  // Exact halves round to even.
  const auto h = anchors_from_positions({{0.0, 0.0}, {0.5, 1.5}, {2.5, 2.5}}, 1.0);
  EXPECT_EQ(h[1], (Anchor{0, 2}));
  EXPECT_EQ(h[2], (Anchor{2, 2}));
  EXPECT_THROW(anchors_from_positions({{0.0, 0.0}}, 0.0), DataError);
}

TEST(Dataset, PositionsManifest) {
  const auto m = parse_manifest(nlohmann::json{{"version", 1},
                                               {"image_size", {8, 8}},
                                               {"patch_size", 4},
                                               {"measurements", "m.ptyd"},
                                               {"pixel_pitch", 1e-8},
                                               {"positions", {{1e-6, 1e-6}, {1.04e-6, 1.02e-6}}}});
  ASSERT_EQ(m.anchors.size(), 2u);
  EXPECT_EQ(m.anchors[1], (Anchor{4, 2}));
  EXPECT_THROW(parse_manifest(nlohmann::json{{"version", 1},
                                             {"image_size", {8, 8}},
                                             {"patch_size", 4},
                                             {"measurements", "m.ptyd"},
                                             {"positions", {{0.0, 0.0}}}}),
               DataError);
}

TEST(Tukey, MatchesOneDimensionalTaperAlongRadius) {
  const std::size_t n = 64;
  for (double alpha : {0.25, 0.5, 1.0}) {
    const auto w = tukey_window_2d(n, alpha);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      const double t = double(k) / double(n / 2);
      if (k < n / 2) {
        EXPECT_NEAR(w(n / 2, n / 2 + k), oracle::tukey_1d(0.5 + 0.5 * t, alpha), 1e-15) << alpha << " " << k;
      }
      EXPECT_NEAR(w(n / 2 - k, n / 2), oracle::tukey_1d(0.5 + 0.5 * t, alpha), 1e-15) << alpha << " " << k;
    }
  }
}

TEST(Tukey, ShapeExamples) {
  const auto w = tukey_window_2d(100, 0.5);
  // Radius 0.8 of the half-width sits at 0.9 on the 1D taper.
  EXPECT_NEAR(w(50, 90), oracle::tukey_1d(0.9, 0.5), 1e-15);
  EXPECT_NEAR(w(50, 90), 0.5 * (1.0 + std::cos(std::numbers::pi * 0.6)), 1e-15);
  EXPECT_EQ(w(50, 50), 1.0);
  EXPECT_EQ(w(50, 70), 1.0);
  EXPECT_EQ(w(0, 0), 0.0);
  for (double v : tukey_window_2d(16, 0.0)) EXPECT_EQ(v, 1.0);
  const auto hann = tukey_window_2d(16, 1.0);
  EXPECT_NEAR(hann(8, 12), 0.5 * (1.0 + std::cos(std::numbers::pi * 0.5)), 1e-15);
  EXPECT_THROW(tukey_window_2d(16, 1.5), ConfigError);
}

TEST(Preprocess, NoDarkNoWindowIsCroppedSquareRoot) {
  Stack<double> raw{f32_real(9, 11, 1), f32_real(9, 11, 2)};
  for (auto& f : raw)
    for (auto& v : f) v *= v;
  PreprocessConfig cfg;
  cfg.dark_frame_count = 0;
  cfg.crop_size = 6;
  cfg.tukey_shape = 0.0;
  const auto out = preprocess_measured(raw, nullptr, cfg);
  ASSERT_EQ(out.y.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.y[j](r, c), std::sqrt(raw[j](1 + r, 2 + c)), 1e-15);
}

TEST(Preprocess, DarkEqualToRawGivesZeros) {
  Stack<double> raw{f32_real(8, 8, 1)};
  PreprocessConfig cfg;
  cfg.dark_frame_count = 1;
  cfg.crop_size = 8;
  const auto out = preprocess_measured(raw, &raw, cfg);
  for (double v : out.y[0]) EXPECT_EQ(v, 0.0);
}

TEST(Preprocess, DarkMeanSubtractedAndClamped) {
  Stack<double> raw{RealImage(4, 4, 5.0)};
  Stack<double> darks{RealImage(4, 4, 1.0), RealImage(4, 4, 3.0), RealImage(4, 4, 100.0)};
  darks[1](0, 0) = 20.0;
  PreprocessConfig cfg;
  cfg.dark_frame_count = 2;
  cfg.crop_size = 4;
  cfg.tukey_shape = 0.0;
  const auto out = preprocess_measured(raw, &darks, cfg);
  EXPECT_EQ(out.y[0](1, 1), std::sqrt(3.0));
  EXPECT_EQ(out.y[0](0, 0), 0.0);
}

TEST(Preprocess, OutlierRemovalKeepsOrder) {
  Stack<double> raw;
  for (std::size_t j = 0; j < 800; ++j) raw.push_back(RealImage(16, 16, double(j)));
  PreprocessConfig cfg;
  cfg.dark_frame_count = 0;
  cfg.crop_size = 12;
  cfg.outlier_indices = {3, 150, 151, 400, 799, 0};
  const auto out = preprocess_measured(raw, nullptr, cfg);
  ASSERT_EQ(out.y.size(), 794u);
  EXPECT_EQ(out.kept.front(), 1u);
  EXPECT_EQ(out.kept[2], 4u);
  EXPECT_EQ(out.kept.back(), 798u);
  for (std::size_t i = 0; i < out.kept.size(); ++i) {
    EXPECT_EQ(out.y[i].rows(), 12u);
    EXPECT_NEAR(out.y[i](6, 6), std::sqrt(double(out.kept[i])), 1e-12);
  }
}

TEST(Preprocess, CropOffsetCentersOddRemainder) {
  EXPECT_EQ(crop_offset(621, 512), 54u);
  EXPECT_EQ(crop_offset(512, 512), 0u);
  EXPECT_EQ(crop_offset(9, 6), 1u);
}

TEST(Preprocess, Errors) {
  Stack<double> raw{RealImage(8, 8, 1.0)};
  PreprocessConfig cfg;
  cfg.dark_frame_count = 0;
  cfg.crop_size = 9;
  EXPECT_EQ(kind_of([&] { preprocess_measured(raw, nullptr, cfg); }), DataError::Kind::shape_mismatch);
  cfg.crop_size = 4;
  cfg.outlier_indices = {1};
  EXPECT_EQ(kind_of([&] { preprocess_measured(raw, nullptr, cfg); }), DataError::Kind::out_of_range);
  cfg.outlier_indices.clear();
  cfg.dark_frame_count = 2;
  EXPECT_EQ(kind_of([&] { preprocess_measured(raw, nullptr, cfg); }), DataError::Kind::missing_file);
  EXPECT_EQ(kind_of([&] { preprocess_measured(raw, &raw, cfg); }), DataError::Kind::shape_mismatch);
}

TEST(Preprocess, RawDatasetPipeline) {
  TempDir dir;
  DatasetManifest m;
  m.image_rows = m.image_cols = 20;
  m.patch_size = 6;
  Stack<double> frames, darks(3, RealImage(8, 8, 1.0));
  for (std::size_t j = 0; j < 5; ++j) {
    m.anchors.push_back({j * 2, j * 3});
    frames.push_back(RealImage(8, 8, 1.0 + double(j * j)));
  }
  save_raw_dataset(dir.path() / "raw.json", m, frames, &darks);
  const auto raw = load_raw_dataset(dir.path() / "raw.json");
  PreprocessConfig cfg;
  cfg.dark_frame_count = 3;
  cfg.crop_size = 6;
  cfg.tukey_shape = 0.0;
  cfg.outlier_indices = {2};
  const auto meas = preprocess_dataset(raw, cfg);
  ASSERT_EQ(meas.size(), 4u);
  EXPECT_EQ(meas.grid[2], (Anchor{6, 9}));
  EXPECT_DOUBLE_EQ(meas.y[2](0, 0), 3.0);
  EXPECT_EQ(kind_of([&] { load_dataset(dir.path() / "raw.json"); }), DataError::Kind::malformed);
  cfg.crop_size = 5;
  EXPECT_EQ(kind_of([&] { preprocess_dataset(raw, cfg); }), DataError::Kind::shape_mismatch);
}

TEST(Preprocess, SuggestOutliersFlagsEnergySpikes) {
  Stack<double> frames;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(100.0, 1.0);
  for (std::size_t j = 0; j < 60; ++j) frames.push_back(RealImage(4, 4, n(rng)));
  frames[7] *= 3.0;
  frames[41] *= 0.0;
  EXPECT_EQ(suggest_outliers(frames), (std::vector<std::size_t>{7, 41}));
}

TEST(Results, PhaseToGray) {
  EXPECT_EQ(phase_to_gray(-std::numbers::pi), 0);
  EXPECT_EQ(phase_to_gray(std::numbers::pi), 255);
  EXPECT_EQ(phase_to_gray(0.0), 128);
}

TEST(Results, PgmRoundTrip) {
  TempDir dir;
  Gray8 g(3, 5);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::uint8_t(i * 17);
  write_pgm(dir.path() / "g.pgm", g);
  EXPECT_EQ(read_pgm(dir.path() / "g.pgm"), g);
}

TEST(Results, TraceRoundTripIsExact) {
  TempDir dir;
  std::vector<IterationRecord> trace(3);
  for (int i = 0; i < 3; ++i) {
    trace[i].iteration = i + 1;
    trace[i].modes = 1 + i / 2;
    trace[i].ec = 1.0 / 3.0 * std::pow(0.1, i);
    trace[i].data_residual = std::sqrt(2.0) + i;
    trace[i].probe_energy = 1e6 / 7.0;
    trace[i].wall_ms = 0.125;
  }
  trace[1].nrmse = 0.0416;
  atomic_write_text(dir.path() / "t.csv", trace_csv(trace));
  const auto back = read_trace(dir.path() / "t.csv");
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].iteration, trace[i].iteration);
    EXPECT_EQ(back[i].modes, trace[i].modes);
    EXPECT_EQ(back[i].ec, trace[i].ec);
    EXPECT_EQ(back[i].data_residual, trace[i].data_residual);
    EXPECT_EQ(back[i].probe_energy, trace[i].probe_energy);
  }
  EXPECT_TRUE(std::isnan(back[0].nrmse));
  EXPECT_EQ(back[1].nrmse, 0.0416);
  write_text(dir.path() / "bad.csv", "iteration,ec\n1,2\n");
  EXPECT_EQ(kind_of([&] { read_trace(dir.path() / "bad.csv"); }), DataError::Kind::malformed);
}

TEST(Results, SaveResultWritesArtifacts) {
  TempDir dir;
  ReconResult r;
  r.x_hat = f32_complex(6, 6, 1);
  r.probes = {f32_complex(3, 3, 2), f32_complex(3, 3, 3)};
  r.trace.resize(4);
  for (int i = 0; i < 4; ++i) r.trace[i].iteration = i + 1, r.trace[i].ec = std::pow(10.0, -i);
  save_result(r, dir.path() / "out");
  emit_plots(r, dir.path() / "out");
  for (const char* f : {"x_hat.ptyd", "x_hat_magnitude.pgm", "x_hat_phase.pgm", "probes.ptyd", "probe_1_phase.pgm",
                        "trace.csv", "mode_additions.csv", "convergence_ec.pgm"})
    EXPECT_TRUE(fs::exists(dir.path() / "out" / f)) << f;
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "convergence_nrmse.pgm"));
  EXPECT_EQ(read_image<complex_t>(dir.path() / "out" / "x_hat.ptyd"), r.x_hat);
  EXPECT_EQ(read_stack<complex_t>(dir.path() / "out" / "probes.ptyd"), r.probes);
}

TEST(AtomicWrite, FailureLeavesTargetUntouched) {
  TempDir dir;
  const auto target = dir.path() / "f.txt";
  atomic_write_text(target, "old");
  EXPECT_THROW(atomic_write(target, [](std::ostream& out) {
                 out << "partial";
                 throw std::runtime_error("boom");
               }),
               std::runtime_error);
  std::ifstream in(target);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(s, "old");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1u);
}
