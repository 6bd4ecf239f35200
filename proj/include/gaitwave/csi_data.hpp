#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gaitwave {

// Row-major 2-D array: rows are time steps, columns are channels.
template <class T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(int64_t rows, int64_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(static_cast<size_t>(rows * cols), fill) {}
  Array2D(int64_t rows, int64_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {}

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  T& operator()(int64_t r, int64_t c) { return values_[static_cast<size_t>(r * cols_ + c)]; }
  const T& operator()(int64_t r, int64_t c) const { return values_[static_cast<size_t>(r * cols_ + c)]; }
  std::span<T> row(int64_t r) { return {values_.data() + r * cols_, static_cast<size_t>(cols_)}; }
  std::span<const T> row(int64_t r) const {
    return {values_.data() + r * cols_, static_cast<size_t>(cols_)};
  }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  bool operator==(const Array2D&) const = default;

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<T> values_;
};

enum class Band { sub6, mmwave };

std::string to_string(Band b);
Band band_from_string(const std::string& s);

// Free-form warnings raised by operations that do not fail outright.
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

// T x C amplitude time series from one capture session.
struct CsiRecording {
  Array2D<float> samples;
  double rate_hz = 0.0;
  Band band = Band::sub6;
  std::string session_id;
  std::optional<int> person_label;  // empty for background recordings

  int64_t length() const { return samples.rows(); }
  int64_t channels() const { return samples.cols(); }
  // Throws FormatError unless T, C >= 1, rate > 0 and every amplitude is finite and >= 0.
  void validate() const;
};

// Checks the band geometry of native captures (sub6: 52 channels at 200 Hz;
// mmwave: 30 or 60 channels at 10 Hz). Mismatches are reported, not thrown,
// because synthetic and downsampled recordings legitimately differ.
void check_band_geometry(const CsiRecording& rec, Diagnostics& diag);

struct Window {
  Array2D<double> samples;  // L x C
  int label = 0;
  std::string source_session;
  int64_t start_index = 0;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory unless absolute
  Band band = Band::sub6;
  double rate_hz = 0.0;
  std::optional<int> person_label;
  bool is_background = false;
  // Set for mmwave captures recorded by more than one device pair.
  std::optional<int> device_pair;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int num_classes = 0;
  // Joint: recordings of the same session from several device pairs are
  // concatenated along channels. Separate: each pair is its own recording.
  bool join_device_pairs = true;

  void validate(bool require_background = false) const;
};

struct SplitAssignment {
  std::vector<int64_t> train;
  std::vector<int64_t> val;
  std::vector<int64_t> test;
  uint64_t seed = 0;
  std::array<double, 3> ratios{0.7, 0.15, 0.15};
};

// Canonical recording file: one JSON header line, then t*c little-endian f32 values.
void write_recording(const std::filesystem::path& path, const CsiRecording& rec);
CsiRecording read_recording(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct LoadedBand {
  std::vector<CsiRecording> labelled;
  std::vector<CsiRecording> background;
};
// Reads every recording of one band listed in a manifest (joining device pairs if requested).
LoadedBand load_band(const std::filesystem::path& manifest_path, const DatasetManifest& manifest, Band band,
                     Diagnostics* diag = nullptr);

enum class DecimationMode { block_mean, stride };

// Integer-factor decimation to target_hz. Block mean over each run of
// `factor` samples by default; stride mode keeps every factor-th sample.
CsiRecording downsample(const CsiRecording& rec, double target_hz,
                        DecimationMode mode = DecimationMode::block_mean);

// Non-overlapping windows of round(window_seconds * rate) samples; the
// trailing remainder is dropped. A recording shorter than one window yields no
// windows and a warning.
std::vector<Window> segment(const CsiRecording& rec, double window_seconds, Diagnostics* diag = nullptr);

// Stratified split: within each class the windows are shuffled by the seeded
// generator and cut by floor(n * train), floor(n * val), remainder to test.
SplitAssignment make_splits(const std::vector<Window>& windows, std::array<double, 3> ratios, uint64_t seed);

}  // namespace gaitwave
