#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "gaitwave/csi_data.hpp"
#include "gaitwave/errors.hpp"

using namespace gaitwave;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("gaitwave_csi_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CsiRecording random_recording(int64_t t, int64_t c, double rate, uint64_t seed, std::optional<int> label = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 10.0f);
  CsiRecording r;
  r.samples = Array2D<float>(t, c);
  for (auto& v : r.samples.values()) v = u(rng);
  r.rate_hz = rate;
  r.band = Band::sub6;
  r.session_id = "s" + std::to_string(seed);
  r.person_label = label;
  return r;
}

std::vector<Window> labelled_windows(const std::vector<int>& per_class) {
  std::vector<Window> out;
  for (size_t k = 0; k < per_class.size(); ++k)
    for (int i = 0; i < per_class[k]; ++i) {
      Window w;
      w.label = static_cast<int>(k);
      w.start_index = i;
      out.push_back(std::move(w));
    }
  return out;
}

}  // namespace

TEST_CASE("recording round trip is bit exact") {
  TempDir dir;
  auto rec = random_recording(26000, 30, 200.0, 7, 3);
  rec.samples(5, 2) = 0.0f;
  write_recording(dir.path / "r.bin", rec);
  auto back = read_recording(dir.path / "r.bin");
  CHECK(back.length() == 26000);
  CHECK(back.channels() == 30);
  CHECK(back.rate_hz == 200.0);
  CHECK(back.session_id == rec.session_id);
  CHECK(back.person_label == 3);
  CHECK(back.samples == rec.samples);

  auto bg = rec;
  bg.person_label.reset();
  write_recording(dir.path / "bg.bin", bg);
  CHECK_FALSE(read_recording(dir.path / "bg.bin").person_label.has_value());
}

TEST_CASE("payload size mismatches raise truncation errors") {
  TempDir dir;
  auto rec = random_recording(100, 4, 10.0, 1);
  const auto p = dir.path / "r.bin";
  write_recording(p, rec);
  const auto size = fs::file_size(p);
  fs::resize_file(p, size - 4);
  CHECK_THROWS_AS(read_recording(p), TruncationError);
  fs::resize_file(p, size + 4);
  CHECK_THROWS_AS(read_recording(p), TruncationError);
}

TEST_CASE("malformed headers raise format errors") {
  TempDir dir;
  const auto p = dir.path / "bad.bin";
  {
    std::ofstream os(p);
    os << "not json\n";
  }
  CHECK_THROWS_AS(read_recording(p), FormatError);
  {
    std::ofstream os(p);
    os << R"({"version":1,"t":2,"c":1,"rate_hz":10,"band":"sub6","session_id":"x"})" << "\n";
  }
  CHECK_THROWS_AS(read_recording(p), FormatError);
  {
    std::ofstream os(p);
    os << R"({"version":2,"t":2,"c":1,"rate_hz":10,"band":"sub6","session_id":"x","person_label":0})" << "\n";
  }
  CHECK_THROWS_AS(read_recording(p), FormatError);

  auto rec = random_recording(3, 2, 10.0, 1);
  rec.samples(0, 0) = -1.0f;
  CHECK_THROWS_AS(write_recording(p, rec), FormatError);
}

TEST_CASE("manifest round trip and device pair joining") {
  TempDir dir;
  auto a = random_recording(50, 30, 10.0, 1, 0);
  auto b = random_recording(48, 30, 10.0, 2, 0);
  a.band = b.band = Band::mmwave;
  b.session_id = a.session_id;
  auto bg = random_recording(60, 30, 10.0, 3, std::nullopt);
  bg.band = Band::mmwave;
  write_recording(dir.path / "a.bin", a);
  write_recording(dir.path / "b.bin", b);
  write_recording(dir.path / "bg.bin", bg);

  DatasetManifest m;
  m.num_classes = 1;
  m.entries = {{"a.bin", Band::mmwave, 10.0, 0, false, 0},
               {"b.bin", Band::mmwave, 10.0, 0, false, 1},
               {"bg.bin", Band::mmwave, 10.0, std::nullopt, true, std::nullopt}};
  write_manifest(dir.path / "manifest.json", m);
  auto back = read_manifest(dir.path / "manifest.json");
  REQUIRE(back.entries.size() == 3);
  CHECK(back.entries[1].device_pair == 1);

  Diagnostics diag;
  auto joined = load_band(dir.path / "manifest.json", back, Band::mmwave, &diag);
  REQUIRE(joined.labelled.size() == 1);
  REQUIRE(joined.background.size() == 1);
  const auto& j = joined.labelled[0];
  CHECK(j.length() == 48);
  CHECK(j.channels() == 60);
  CHECK(j.samples(10, 5) == a.samples(10, 5));
  CHECK(j.samples(10, 35) == b.samples(10, 5));
  CHECK(diag.warnings.empty());

  back.join_device_pairs = false;
  auto separate = load_band(dir.path / "manifest.json", back, Band::mmwave);
  CHECK(separate.labelled.size() == 2);
  CHECK(load_band(dir.path / "manifest.json", back, Band::sub6).labelled.empty());
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.num_classes = 2;
  m.entries = {{"a", Band::sub6, 200.0, 2, false, std::nullopt}};
  CHECK_THROWS_AS(m.validate(), FormatError);
  m.entries = {{"a", Band::sub6, 200.0, 1, false, std::nullopt}};
  CHECK_NOTHROW(m.validate());
  CHECK_THROWS_AS(m.validate(true), FormatError);
  m.entries.push_back({"bg", Band::sub6, 200.0, 1, true, std::nullopt});
  CHECK_THROWS_AS(m.validate(), FormatError);
}

TEST_CASE("band geometry mismatches are warnings") {
  Diagnostics diag;
  auto rec = random_recording(10, 52, 200.0, 1);
  check_band_geometry(rec, diag);
  CHECK(diag.warnings.empty());
  rec = random_recording(10, 30, 10.0, 1);
  check_band_geometry(rec, diag);
  CHECK(diag.warnings.size() == 1);
}

TEST_CASE("downsampling") {
  SUBCASE("length and constant signal") {
    auto rec = random_recording(520000, 1, 200.0, 1);
    std::fill(rec.samples.values().begin(), rec.samples.values().end(), 3.5f);
    auto d = downsample(rec, 10.0);
    CHECK(d.length() == 26000);
    CHECK(d.rate_hz == 10.0);
    for (float v : d.samples.values()) REQUIRE(v == 3.5f);
  }
  SUBCASE("remainder is dropped and values are block means") {
    auto rec = random_recording(205, 2, 200.0, 4);
    auto d = downsample(rec, 10.0);
    CHECK(d.length() == 10);
    double s = 0;
    for (int i = 20; i < 40; ++i) s += rec.samples(i, 1);
    CHECK(d.samples(1, 1) == doctest::Approx(s / 20).epsilon(1e-6));
    auto st = downsample(rec, 10.0, DecimationMode::stride);
    CHECK(st.samples(1, 1) == rec.samples(20, 1));
  }
  SUBCASE("non integer factor") {
    auto rec = random_recording(100, 1, 200.0, 1);
    CHECK_THROWS_AS(downsample(rec, 30.0), UnsupportedRateError);
    CHECK_THROWS_AS(downsample(rec, 400.0), UnsupportedRateError);
  }
  SUBCASE("commutes with channel permutation") {
    auto rec = random_recording(400, 5, 200.0, 9);
    auto perm = rec;
    const std::vector<int> order{3, 0, 4, 1, 2};
    for (int64_t t = 0; t < rec.length(); ++t)
      for (int c = 0; c < 5; ++c) perm.samples(t, c) = rec.samples(t, order[static_cast<size_t>(c)]);
    auto a = downsample(rec, 10.0), b = downsample(perm, 10.0);
    for (int64_t t = 0; t < a.length(); ++t)
      for (int c = 0; c < 5; ++c) REQUIRE(b.samples(t, c) == a.samples(t, order[static_cast<size_t>(c)]));
  }
}

TEST_CASE("segmentation") {
  auto rec = random_recording(26000, 3, 10.0, 1, 2);
  auto w = segment(rec, 5.0);
  CHECK(w.size() == 520);
  CHECK(w[1].samples.rows() == 50);
  CHECK(w[1].start_index == 50);
  CHECK(w[1].samples(0, 2) == static_cast<double>(rec.samples(50, 2)));
  CHECK(w[0].label == 2);

  CHECK(segment(random_recording(26049, 1, 10.0, 1), 5.0).size() == 520);

  Diagnostics diag;
  CHECK(segment(random_recording(40, 1, 10.0, 1), 5.0, &diag).empty());
  CHECK(diag.warnings.size() == 1);

  CHECK_THROWS_AS(segment(random_recording(40, 1, 10.0, 1, std::nullopt), 1.0), MisuseError);
}

TEST_CASE("stratified splits") {
  SUBCASE("counts per class") {
    auto s = make_splits(labelled_windows({100, 100}), {0.7, 0.15, 0.15}, 1);
    CHECK(s.train.size() == 140);
    CHECK(s.val.size() == 30);
    CHECK(s.test.size() == 30);
    s = make_splits(labelled_windows({10}), {0.7, 0.15, 0.15}, 1);
    CHECK(s.train.size() == 7);
    CHECK(s.val.size() == 1);
    CHECK(s.test.size() == 2);
  }
  SUBCASE("too few windows") {
    CHECK_THROWS_AS(make_splits(labelled_windows({5, 2}), {0.7, 0.15, 0.15}, 1), StratificationError);
    CHECK_THROWS_AS(make_splits(labelled_windows({5}), {0.7, 0.2, 0.2}, 1), ParameterError);
  }
  SUBCASE("deterministic in the seed") {
    auto w = labelled_windows({20, 13, 9});
    auto a = make_splits(w, {0.7, 0.15, 0.15}, 5);
    auto b = make_splits(w, {0.7, 0.15, 0.15}, 5);
    auto c = make_splits(w, {0.7, 0.15, 0.15}, 6);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
  }
  SUBCASE("disjoint and exhaustive over random manifests") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> classes(1, 8), count(3, 60);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> per_class(static_cast<size_t>(classes(rng)));
      for (auto& n : per_class) n = count(rng);
      auto w = labelled_windows(per_class);
      auto s = make_splits(w, {0.7, 0.15, 0.15}, rng());
      std::set<int64_t> all;
      all.insert(s.train.begin(), s.train.end());
      all.insert(s.val.begin(), s.val.end());
      all.insert(s.test.begin(), s.test.end());
      REQUIRE(all.size() == w.size());
      REQUIRE(s.train.size() + s.val.size() + s.test.size() == w.size());
      REQUIRE(std::is_sorted(s.train.begin(), s.train.end()));
    }
  }
}
