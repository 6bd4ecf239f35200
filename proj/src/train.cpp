#include "gaitwave/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gaitwave/nn/optim.hpp"

namespace gaitwave {

using nlohmann::json;

namespace {

constexpr int64_t kEvalBatch = 128;

std::mt19937_64 stream(uint64_t seed, uint32_t id) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

// Copies windows into a [B, L, C] tensor, standardizing on the way.
nn::Tensor stack(const std::vector<const Window*>& batch, const ChannelStats* stats) {
  const int64_t len = batch.front()->samples.rows(), c = batch.front()->samples.cols();
  nn::Tensor x({static_cast<int64_t>(batch.size()), len, c});
  int64_t k = 0;
  for (const Window* w : batch) {
    if (w->samples.rows() != len || w->samples.cols() != c)
      throw DimensionError("windows in a batch must share their shape");
    for (int64_t t = 0; t < len; ++t)
      for (int64_t j = 0; j < c; ++j, ++k) {
        const double v = w->samples(t, j);
        if (stats) {
          const auto i = static_cast<size_t>(j);
          x[k] = (v - stats->mean[i]) / std::max(stats->std[i], 1e-8);
        } else {
          x[k] = v;
        }
      }
  }
  return x;
}

struct Snapshot {
  std::vector<nn::Tensor> params;
  std::vector<nn::Tensor> buffers;

  static Snapshot take(const nn::ParameterStore& store) {
    Snapshot s;
    for (const auto& p : store.parameters()) s.params.push_back(p.var.value());
    for (const auto& b : store.buffers()) s.buffers.push_back(*b.tensor);
    return s;
  }
  void restore(nn::ParameterStore& store) const {
    for (size_t i = 0; i < params.size(); ++i) {
      nn::Var handle = store.parameters()[i].var;
      handle.mutable_value() = params[i];
    }
    for (size_t i = 0; i < buffers.size(); ++i) *store.buffers()[i].tensor = buffers[i];
  }
};

}  // namespace

void TrainSettings::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (optimizer != "adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be at least 1");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  try {
    smoothing.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (!(mixup.alpha > 0.0)) throw ConfigError("mixup alpha must be positive");
}

void to_json(json& j, const TrainSettings& s) {
  j = json{{"epochs", s.epochs},
           {"batch_size", s.batch_size},
           {"learning_rate", s.learning_rate},
           {"optimizer", s.optimizer},
           {"early_stop_patience", s.early_stop_patience},
           {"seed", s.seed},
           {"repeats", s.repeats}};
}

void from_json(const json& j, TrainSettings& s) {
  static const std::set<std::string> known{"epochs", "batch_size", "learning_rate", "optimizer",
                                           "early_stop_patience", "seed", "repeats"};
  if (!j.is_object()) throw ConfigError("train settings must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown train setting '" + key + "'");
  }
  try {
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.optimizer = j.value("optimizer", s.optimizer);
    s.early_stop_patience = j.value("early_stop_patience", s.early_stop_patience);
    s.seed = j.value("seed", s.seed);
    s.repeats = j.value("repeats", s.repeats);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train settings: ") + e.what());
  }
}

AccuracyStat AccuracyStat::from_runs(const std::vector<double>& accuracies) {
  AccuracyStat s;
  s.n = static_cast<int>(accuracies.size());
  if (accuracies.empty()) return s;
  s.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / s.n;
  double sq = 0.0;
  for (double a : accuracies) sq += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(sq / s.n);
  return s;
}

void to_json(json& j, const RunRecord& r) {
  j = json{{"seed", r.seed},
           {"best_val_accuracy", r.best_val_accuracy},
           {"test_accuracy", r.test_accuracy},
           {"epoch_of_best", r.epoch_of_best},
           {"loss_history", r.loss_history}};
}

void from_json(const json& j, RunRecord& r) {
  r.seed = j.at("seed").get<uint64_t>();
  r.best_val_accuracy = j.at("best_val_accuracy").get<double>();
  r.test_accuracy = j.at("test_accuracy").get<double>();
  r.epoch_of_best = j.at("epoch_of_best").get<int>();
  r.loss_history = j.at("loss_history").get<std::vector<double>>();
}

void to_json(json& j, const AccuracyStat& s) { j = json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

void from_json(const json& j, AccuracyStat& s) {
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.n = j.at("n").get<int>();
}

int64_t argmax(std::span<const double> row) {
  int64_t best = 0;
  for (size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[static_cast<size_t>(best)]) best = static_cast<int64_t>(i);
  }
  return best;
}

double evaluate(Model& m, const std::vector<const Window*>& windows, const ChannelStats* stats) {
  if (windows.empty()) throw MisuseError("cannot evaluate on an empty set");
  nn::NoGradGuard guard;
  nn::ForwardContext ctx;
  int64_t correct = 0;
  const auto n = static_cast<int64_t>(windows.size());
  for (int64_t start = 0; start < n; start += kEvalBatch) {
    const int64_t end = std::min(n, start + kEvalBatch);
    std::vector<const Window*> batch(windows.begin() + start, windows.begin() + end);
    const nn::Tensor logits = m.forward(nn::Var(stack(batch, stats)), ctx).value();
    const int64_t k = logits.dim(1);
    for (int64_t i = 0; i < end - start; ++i) {
      const std::span<const double> row(logits.data() + i * k, static_cast<size_t>(k));
      correct += argmax(row) == batch[static_cast<size_t>(i)]->label;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double evaluate(Model& m, const std::vector<Window>& windows, const ChannelStats* stats) {
  std::vector<const Window*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return evaluate(m, ptrs, stats);
}

TrainingBatch make_training_batch(const std::vector<const Window*>& batch, const ModelConfig& cfg,
                                  const TrainSettings& settings, const ChannelStats* stats, std::mt19937_64& rng) {
  if (batch.empty()) throw MisuseError("empty training batch");
  std::vector<Window> smoothed;
  std::vector<const Window*> source = batch;
  if (cfg.smoothing) {
    smoothed.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      smoothed.push_back(gaussian_smooth(*batch[i], settings.smoothing, rng));
      source[i] = &smoothed.back();
    }
  }
  const int64_t k = cfg.num_classes;
  TrainingBatch out{stack(source, stats), nn::Tensor({static_cast<int64_t>(batch.size()), k}, 0.0)};
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->label < 0 || batch[i]->label >= k)
      throw MisuseError("window label " + std::to_string(batch[i]->label) + " outside the model's classes");
    out.y[static_cast<int64_t>(i) * k + batch[i]->label] = 1.0;
  }
  // Mixup combines already smoothed windows; a trailing batch of one is left unmixed.
  if (cfg.mixup && batch.size() >= 2) {
    auto mixed = mixup_batch(out.x, out.y, settings.mixup, rng);
    out.x = std::move(mixed.x);
    out.y = std::move(mixed.y);
  }
  return out;
}

TrainResult train(const ModelConfig& cfg, const std::vector<Window>& windows, const SplitAssignment& split,
                  const TrainSettings& settings) {
  settings.validate();
  if (cfg.mixup && settings.batch_size < 2) throw ConfigError("mixup needs batch_size >= 2");
  if (split.train.empty()) throw MisuseError("training split is empty");
  auto gather = [&](const std::vector<int64_t>& idx) {
    std::vector<const Window*> out;
    out.reserve(idx.size());
    for (int64_t i : idx) {
      if (i < 0 || i >= static_cast<int64_t>(windows.size())) throw MisuseError("split index out of range");
      out.push_back(&windows[static_cast<size_t>(i)]);
    }
    return out;
  };
  const auto train_set = gather(split.train);
  const auto val_set = gather(split.val);

  TrainResult result;
  if (settings.standardize) result.input_stats = channel_stats(train_set);
  const ChannelStats* stats = result.input_stats ? &*result.input_stats : nullptr;

  result.model = build_model(cfg, settings.seed);
  Model& model = *result.model;
  nn::Adam adam(model.store(), {.learning_rate = settings.learning_rate});
  auto shuffle_rng = stream(settings.seed, 1);
  auto augment_rng = stream(settings.seed, 2);
  auto dropout_rng = stream(settings.seed, 3);

  RunRecord& rec = result.record;
  rec.seed = settings.seed;
  const auto n_train = static_cast<int64_t>(train_set.size());
  std::vector<int64_t> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  Snapshot best;
  double best_val = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int64_t start = 0; start < n_train; start += settings.batch_size) {
      const int64_t end = std::min(n_train, start + settings.batch_size);
      std::vector<const Window*> batch;
      for (int64_t i = start; i < end; ++i)
        batch.push_back(train_set[static_cast<size_t>(order[static_cast<size_t>(i)])]);
      auto [x, y] = make_training_batch(batch, cfg, settings, stats, augment_rng);

      model.store().zero_grad();
      nn::ForwardContext ctx{true, &dropout_rng};
      nn::Var loss = nn::soft_cross_entropy(model.forward(nn::Var(std::move(x)), ctx), y);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw TrainingFailure(epoch, "non-finite loss");
      nn::backward(loss);
      for (const auto& p : model.store().parameters()) {
        if (p.var.has_grad() && !p.var.grad().all_finite())
          throw TrainingFailure(epoch, "non-finite gradient for " + p.name);
      }
      adam.step();
      epoch_loss += value * static_cast<double>(end - start);
    }
    rec.loss_history.push_back(epoch_loss / static_cast<double>(n_train));

    if (val_set.empty()) {
      best = Snapshot::take(model.store());
      rec.epoch_of_best = epoch;
      best_val = 0.0;
      continue;
    }
    const double val = evaluate(model, val_set, stats);
    if (val > best_val) {
      best_val = val;
      best = Snapshot::take(model.store());
      rec.epoch_of_best = epoch;
      since_best = 0;
    } else if (++since_best >= settings.early_stop_patience) {
      break;
    }
  }
  best.restore(model.store());
  rec.best_val_accuracy = std::max(best_val, 0.0);
  // The test split is read for the first and only time here.
  const auto test_set = gather(split.test);
  rec.test_accuracy = test_set.empty() ? 0.0 : evaluate(model, test_set, stats);
  return result;
}

RepeatResult repeat_runs(const ModelConfig& cfg, const std::vector<Window>& windows, const SplitAssignment& split,
                         const TrainSettings& settings) {
  settings.validate();
  RepeatResult out;
  std::vector<double> acc;
  for (int r = 0; r < settings.repeats; ++r) {
    TrainSettings s = settings;
    s.seed = settings.seed + static_cast<uint64_t>(r);
    try {
      out.runs.push_back(train(cfg, windows, split, s).record);
    } catch (const TrainingFailure& e) {
      throw RepeatFailure(e, out.runs);
    }
    acc.push_back(out.runs.back().test_accuracy);
  }
  out.stat = AccuracyStat::from_runs(acc);
  return out;
}

}  // namespace gaitwave
