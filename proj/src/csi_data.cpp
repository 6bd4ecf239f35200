#include "gaitwave/csi_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gaitwave/errors.hpp"
#include "json.hpp"

namespace gaitwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr size_t kMaxHeaderBytes = 1 << 16;

uint32_t to_little_endian(uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

template <class T>
T header_field(const json& h, const char* key, const fs::path& path) {
  if (!h.contains(key)) throw FormatError(path.string() + ": header missing '" + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": header field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_string(Band b) { return b == Band::sub6 ? "sub6" : "mmwave"; }

Band band_from_string(const std::string& s) {
  if (s == "sub6") return Band::sub6;
  if (s == "mmwave") return Band::mmwave;
  throw FormatError("unknown band '" + s + "'");
}

void CsiRecording::validate() const {
  if (samples.rows() < 1 || samples.cols() < 1) throw FormatError("recording must have T >= 1 and C >= 1");
  if (static_cast<int64_t>(samples.values().size()) != samples.rows() * samples.cols())
    throw FormatError("recording sample buffer does not match its shape");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw FormatError("recording rate must be positive");
  for (float v : samples.values()) {
    if (!std::isfinite(v) || v < 0.0f)
      throw FormatError("recording " + session_id + " holds a negative or non-finite amplitude");
  }
}

void check_band_geometry(const CsiRecording& rec, Diagnostics& diag) {
  if (rec.band == Band::sub6 && (rec.channels() != 52 || rec.rate_hz != 200.0)) {
    diag.warn("sub6 recording " + rec.session_id + " has " + std::to_string(rec.channels()) +
              " channels at " + std::to_string(rec.rate_hz) + " Hz (native capture is 52 at 200 Hz)");
  }
  if (rec.band == Band::mmwave &&
      ((rec.channels() != 30 && rec.channels() != 60) || rec.rate_hz != 10.0)) {
    diag.warn("mmwave recording " + rec.session_id + " has " + std::to_string(rec.channels()) +
              " channels at " + std::to_string(rec.rate_hz) + " Hz (native capture is 30 or 60 at 10 Hz)");
  }
}

void write_recording(const fs::path& path, const CsiRecording& rec) {
  rec.validate();
  json header = {{"version", 1},
                 {"t", rec.length()},
                 {"c", rec.channels()},
                 {"rate_hz", rec.rate_hz},
                 {"band", to_string(rec.band)},
                 {"session_id", rec.session_id},
                 {"person_label", rec.person_label ? json(*rec.person_label) : json(nullptr)}};
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const std::string line = header.dump() + "\n";
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  std::vector<uint32_t> payload(rec.samples.values().size());
  for (size_t i = 0; i < payload.size(); ++i) {
    payload[i] = to_little_endian(std::bit_cast<uint32_t>(rec.samples.values()[i]));
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(uint32_t)));
  if (!os) throw Error("failed writing " + path.string());
}

CsiRecording read_recording(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open recording " + path.string());
  std::string line;
  char ch = 0;
  while (is.get(ch) && ch != '\n') {
    line.push_back(ch);
    if (line.size() > kMaxHeaderBytes) throw FormatError(path.string() + ": header line too long");
  }
  if (ch != '\n') throw FormatError(path.string() + ": missing header line terminator");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": header is not valid JSON");
  }
  if (!header.is_object()) throw FormatError(path.string() + ": header must be a JSON object");
  if (header_field<int>(header, "version", path) != 1)
    throw FormatError(path.string() + ": unsupported format version");

  CsiRecording rec;
  const auto t = header_field<int64_t>(header, "t", path);
  const auto c = header_field<int64_t>(header, "c", path);
  if (t < 1 || c < 1) throw FormatError(path.string() + ": t and c must be positive");
  rec.rate_hz = header_field<double>(header, "rate_hz", path);
  rec.band = band_from_string(header_field<std::string>(header, "band", path));
  rec.session_id = header_field<std::string>(header, "session_id", path);
  if (!header.contains("person_label")) throw FormatError(path.string() + ": header missing 'person_label'");
  if (!header["person_label"].is_null()) rec.person_label = header_field<int>(header, "person_label", path);

  const auto payload_start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<int64_t>(is.tellg() - payload_start);
  const int64_t expected = t * c * static_cast<int64_t>(sizeof(float));
  if (payload_bytes != expected) {
    throw TruncationError(path.string() + ": payload holds " + std::to_string(payload_bytes) +
                          " bytes, header declares " + std::to_string(expected));
  }
  is.seekg(payload_start);
  std::vector<uint32_t> raw(static_cast<size_t>(t * c));
  is.read(reinterpret_cast<char*>(raw.data()), expected);
  if (!is) throw TruncationError(path.string() + ": short read");
  std::vector<float> values(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) values[i] = std::bit_cast<float>(to_little_endian(raw[i]));
  rec.samples = Array2D<float>(t, c, std::move(values));
  rec.validate();
  return rec;
}

void DatasetManifest::validate(bool require_background) const {
  if (num_classes < 1) throw FormatError("manifest num_classes must be positive");
  std::map<Band, bool> has_bg;
  for (const auto& e : entries) {
    if (!(e.rate_hz > 0.0)) throw FormatError("manifest entry " + e.path + " has a non-positive rate");
    if (e.is_background) {
      if (e.person_label) throw FormatError("background entry " + e.path + " must not carry a label");
      has_bg[e.band] = true;
    } else {
      if (!e.person_label) throw FormatError("entry " + e.path + " has no person label");
      if (*e.person_label < 0 || *e.person_label >= num_classes)
        throw FormatError("entry " + e.path + " label out of range [0, " + std::to_string(num_classes) + ")");
      has_bg.try_emplace(e.band, false);
    }
  }
  if (require_background) {
    for (const auto& [band, ok] : has_bg) {
      if (!ok) throw FormatError("manifest has no background recording for band " + to_string(band));
    }
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json je = {{"path", e.path},
               {"band", to_string(e.band)},
               {"rate_hz", e.rate_hz},
               {"person_label", e.person_label ? json(*e.person_label) : json(nullptr)},
               {"is_background", e.is_background}};
    if (e.device_pair) je["device_pair"] = *e.device_pair;
    entries.push_back(std::move(je));
  }
  json doc = {{"num_classes", manifest.num_classes},
              {"join_device_pairs", manifest.join_device_pairs},
              {"entries", std::move(entries)}};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << doc.dump(2) << '\n';
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest " + path.string());
  DatasetManifest m;
  try {
    const json doc = json::parse(is);
    m.num_classes = doc.at("num_classes").get<int>();
    m.join_device_pairs = doc.value("join_device_pairs", true);
    for (const auto& je : doc.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      e.band = band_from_string(je.at("band").get<std::string>());
      e.rate_hz = je.at("rate_hz").get<double>();
      if (je.contains("person_label") && !je["person_label"].is_null())
        e.person_label = je["person_label"].get<int>();
      e.is_background = je.value("is_background", false);
      if (je.contains("device_pair")) e.device_pair = je["device_pair"].get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  m.validate();
  return m;
}

LoadedBand load_band(const fs::path& manifest_path, const DatasetManifest& manifest, Band band,
                     Diagnostics* diag) {
  LoadedBand out;
  const fs::path base = manifest_path.parent_path();
  // session id -> (device pair -> recording), for joined multi-pair captures
  std::map<std::string, std::map<int, CsiRecording>> pairs;
  for (const auto& e : manifest.entries) {
    if (e.band != band) continue;
    const fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
    CsiRecording rec = read_recording(p);
    if (rec.band != band) throw FormatError(p.string() + ": band differs from manifest entry");
    if (std::abs(rec.rate_hz - e.rate_hz) > 1e-9 * e.rate_hz)
      throw FormatError(p.string() + ": rate differs from manifest entry");
    if (rec.person_label != e.person_label)
      throw FormatError(p.string() + ": person label differs from manifest entry");
    if (diag) check_band_geometry(rec, *diag);
    if (e.device_pair && manifest.join_device_pairs) {
      pairs[(e.is_background ? "bg:" : "fg:") + rec.session_id].emplace(*e.device_pair, std::move(rec));
      continue;
    }
    (e.is_background ? out.background : out.labelled).push_back(std::move(rec));
  }
  for (auto& [key, by_pair] : pairs) {
    int64_t t = by_pair.begin()->second.length();
    int64_t c = 0;
    for (const auto& [_, r] : by_pair) {
      t = std::min(t, r.length());
      c += r.channels();
    }
    CsiRecording joined = by_pair.begin()->second;
    joined.samples = Array2D<float>(t, c);
    int64_t offset = 0;
    for (const auto& [_, r] : by_pair) {
      for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j < r.channels(); ++j) joined.samples(i, offset + j) = r.samples(i, j);
      offset += r.channels();
    }
    (key.starts_with("bg:") ? out.background : out.labelled).push_back(std::move(joined));
  }
  return out;
}

CsiRecording downsample(const CsiRecording& rec, double target_hz, DecimationMode mode) {
  if (!(target_hz > 0.0)) throw UnsupportedRateError("target rate must be positive");
  const double ratio = rec.rate_hz / target_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw UnsupportedRateError("cannot decimate " + std::to_string(rec.rate_hz) + " Hz to " +
                               std::to_string(target_hz) + " Hz by an integer factor");
  }
  const auto factor = static_cast<int64_t>(rounded);
  const int64_t t_out = rec.length() / factor;
  if (t_out < 1) throw MisuseError("recording " + rec.session_id + " is shorter than one decimation block");
  const int64_t c = rec.channels();

  CsiRecording out = rec;
  out.rate_hz = target_hz;
  out.samples = Array2D<float>(t_out, c);
  for (int64_t i = 0; i < t_out; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      if (mode == DecimationMode::stride) {
        out.samples(i, j) = rec.samples(i * factor, j);
        continue;
      }
      double s = 0.0;
      for (int64_t k = 0; k < factor; ++k) s += rec.samples(i * factor + k, j);
      out.samples(i, j) = static_cast<float>(s / static_cast<double>(factor));
    }
  }
  return out;
}

std::vector<Window> segment(const CsiRecording& rec, double window_seconds, Diagnostics* diag) {
  if (!rec.person_label) throw MisuseError("cannot segment unlabelled recording " + rec.session_id);
  const auto len = static_cast<int64_t>(std::llround(window_seconds * rec.rate_hz));
  if (len < 1) throw ParameterError("window length must be at least one sample");
  std::vector<Window> out;
  const int64_t count = rec.length() / len;
  if (count == 0 && diag) {
    diag->warn("recording " + rec.session_id + " (" + std::to_string(rec.length()) +
               " samples) is shorter than one window of " + std::to_string(len));
  }
  const int64_t c = rec.channels();
  out.reserve(static_cast<size_t>(count));
  for (int64_t w = 0; w < count; ++w) {
    Window win;
    win.samples = Array2D<double>(len, c);
    for (int64_t i = 0; i < len; ++i)
      for (int64_t j = 0; j < c; ++j) win.samples(i, j) = rec.samples(w * len + i, j);
    win.label = *rec.person_label;
    win.source_session = rec.session_id;
    win.start_index = w * len;
    out.push_back(std::move(win));
  }
  return out;
}

SplitAssignment make_splits(const std::vector<Window>& windows, std::array<double, 3> ratios, uint64_t seed) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ParameterError("split ratios must be non-negative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ParameterError("split ratios must sum to 1");

  std::map<int, std::vector<int64_t>> by_class;
  for (size_t i = 0; i < windows.size(); ++i) by_class[windows[i].label].push_back(static_cast<int64_t>(i));

  SplitAssignment split;
  split.seed = seed;
  split.ratios = ratios;
  std::mt19937_64 rng(seed);
  for (auto& [label, idx] : by_class) {
    const auto n = static_cast<int64_t>(idx.size());
    if (n < 3) {
      throw StratificationError("class " + std::to_string(label) + " has " + std::to_string(n) +
                                " windows; at least 3 are needed");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<int64_t>(std::floor(static_cast<double>(n) * ratios[0] + 1e-9));
    const auto n_val = static_cast<int64_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
    split.val.insert(split.val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    split.test.insert(split.test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace gaitwave
