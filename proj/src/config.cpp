#include "gaitwave/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "gaitwave/errors.hpp"

namespace gaitwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

DataSource parse_source(const json& j, const fs::path& base_dir, const std::string& where) {
  check_keys(j, {"manifest", "synth"}, where);
  DataSource src;
  if (j.contains("manifest") == j.contains("synth"))
    throw ConfigError(where + " needs exactly one of 'manifest' or 'synth'");
  if (j.contains("manifest")) {
    src.manifest_ref = j.at("manifest").get<std::string>();
    fs::path p = src.manifest_ref;
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw ConfigError(where + ": manifest not found: " + p.string());
    src.manifest = p;
  } else {
    try {
      src.synth = synth_spec_from_json(j.at("synth"));
    } catch (const SpecError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return src;
}

BandEntry parse_band(const json& j) {
  BandEntry b;
  if (j.is_string()) {
    b.band = band_setting_from_string(j.get<std::string>());
    return b;
  }
  check_keys(j, {"band", "background_subtraction"}, "bands entry");
  b.band = band_setting_from_string(j.at("band").get<std::string>());
  b.background_subtraction = j.value("background_subtraction", false);
  return b;
}

void parse_augmentation(const json& j, TrainSettings& s) {
  check_keys(j, {"smoothing", "mixup", "standardize"}, "augmentation");
  if (j.contains("smoothing")) {
    const auto& sm = j.at("smoothing");
    check_keys(sm, {"k", "sigma", "p"}, "augmentation.smoothing");
    s.smoothing.kernel_size = sm.value("k", s.smoothing.kernel_size);
    s.smoothing.sigma = sm.value("sigma", s.smoothing.sigma);
    s.smoothing.apply_probability = sm.value("p", s.smoothing.apply_probability);
  }
  if (j.contains("mixup")) {
    const auto& mx = j.at("mixup");
    check_keys(mx, {"alpha"}, "augmentation.mixup");
    s.mixup.alpha = mx.value("alpha", s.mixup.alpha);
  }
  if (j.contains("standardize")) {
    const auto& st = j.at("standardize");
    check_keys(st, {"enabled"}, "augmentation.standardize");
    s.standardize = st.value("enabled", s.standardize);
  }
  try {
    s.smoothing.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("augmentation.smoothing: ") + e.what());
  }
  if (!(s.mixup.alpha > 0.0)) throw ConfigError("augmentation.mixup.alpha must be positive");
}

json source_json(const DataSource& s) {
  if (s.manifest) return {{"manifest", s.manifest_ref}};
  return {{"synth", to_json(*s.synth)}};
}

}  // namespace

int DataSource::num_classes() const {
  if (synth) return synth->num_classes;
  return read_manifest(*manifest).num_classes;
}

LoadedBand DataSource::load(Band band, Diagnostics* diag) const {
  if (manifest) return load_band(*manifest, read_manifest(*manifest), band, diag);
  auto ds = synthesize(*synth);
  if (diag)
    for (auto& w : ds.diagnostics.warnings) diag->warn(std::move(w));
  return {std::move(ds.labelled), {std::move(ds.background)}};
}

json ExperimentConfig::fingerprint() const {
  json data = json::object();
  for (const auto& [band, src] : this->data) data[to_string(band)] = source_json(src);
  json bands_j = json::array();
  for (const auto& b : bands)
    bands_j.push_back({{"band", to_string(b.band)}, {"background_subtraction", b.background_subtraction}});
  json j{{"window_seconds", window_seconds},
         {"data", data},
         {"bands", bands_j},
         {"models", models},
         {"train", train},
         {"augmentation",
          {{"smoothing",
            {{"k", train.smoothing.kernel_size},
             {"sigma", train.smoothing.sigma},
             {"p", train.smoothing.apply_probability}}},
           {"mixup", {{"alpha", train.mixup.alpha}}},
           {"standardize", {{"enabled", train.standardize}}}}},
         {"split", {{"ratios", split_ratios}, {"seed", split_seed}}}};
  if (learning_curve)
    j["learning_curve"] = {{"model", learning_curve->model},
                           {"band", to_string(learning_curve->band)},
                           {"fractions", learning_curve->fractions}};
  return j;
}

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
  check_keys(j,
             {"output_dir", "window_seconds", "data", "bands", "augmentation", "models", "train", "split",
              "learning_curve"},
             "experiment config");
  ExperimentConfig cfg;
  try {
    if (j.contains("output_dir")) {
      fs::path out = j.at("output_dir").get<std::string>();
      cfg.output_dir = out.is_relative() ? base_dir / out : out;
    } else {
      cfg.output_dir = base_dir / cfg.output_dir;
    }
    if (const char* env = std::getenv("GAITWAVE_OUT"); env && *env) cfg.output_dir = env;

    cfg.window_seconds = j.value("window_seconds", cfg.window_seconds);
    if (!(cfg.window_seconds > 0.0)) throw ConfigError("window_seconds must be positive");

    if (!j.contains("data")) throw ConfigError("experiment config needs a 'data' section");
    check_keys(j.at("data"), {"sub6", "mmwave"}, "data");
    for (const auto& [key, value] : j.at("data").items())
      cfg.data[band_from_string(key)] = parse_source(value, base_dir, "data." + key);

    if (!j.contains("bands") || !j.at("bands").is_array() || j.at("bands").empty())
      throw ConfigError("experiment config needs a non-empty 'bands' list");
    std::set<BandSetting> seen;
    for (const auto& b : j.at("bands")) {
      auto entry = parse_band(b);
      if (!seen.insert(entry.band).second)
        throw ConfigError("band " + to_string(entry.band) + " listed twice; use a separate config per preprocessing");
      if (!cfg.data.count(source_band(entry.band)))
        throw ConfigError("band " + to_string(entry.band) + " has no data source for " +
                          to_string(source_band(entry.band)));
      cfg.bands.push_back(entry);
    }

    if (j.contains("train")) cfg.train = j.at("train").get<TrainSettings>();
    if (j.contains("augmentation")) parse_augmentation(j.at("augmentation"), cfg.train);
    cfg.train.validate();

    if (j.contains("split")) {
      const auto& sp = j.at("split");
      check_keys(sp, {"ratios", "seed"}, "split");
      cfg.split_ratios = sp.value("ratios", cfg.split_ratios);
      cfg.split_seed = sp.value("seed", cfg.split_seed);
    }

    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
      throw ConfigError("experiment config needs at least one model config");
    for (const auto& m : j.at("models")) cfg.models.push_back(m.get<ModelConfig>());
    for (const auto& m : cfg.models)
      if (m.mixup && cfg.train.batch_size < 2) throw ConfigError("mixup needs train.batch_size >= 2");

    if (j.contains("learning_curve")) {
      const auto& lc = j.at("learning_curve");
      check_keys(lc, {"model", "band", "fractions"}, "learning_curve");
      LearningCurveConfig c;
      c.model = lc.at("model").get<ModelConfig>();
      c.band = band_setting_from_string(lc.value("band", to_string(c.band)));
      c.fractions = lc.value("fractions", c.fractions);
      if (!seen.count(c.band)) throw ConfigError("learning_curve band " + to_string(c.band) + " is not in 'bands'");
      if (c.fractions.empty()) throw ConfigError("learning_curve needs at least one fraction");
      for (double f : c.fractions)
        if (!(f > 0.0) || f > cfg.split_ratios[0] + 1e-12)
          throw ConfigError("learning_curve fraction out of (0, train ratio]");
      cfg.learning_curve = c;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }

  std::optional<int> classes;
  for (const auto& [band, src] : cfg.data) {
    int k = 0;
    try {
      k = src.num_classes();
    } catch (const Error& e) {
      throw ConfigError("data." + to_string(band) + ": " + e.what());
    }
    if (classes && *classes != k)
      throw ConfigError("data sources disagree on the number of classes");
    classes = k;
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gaitwave
