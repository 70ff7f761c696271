#include "modewise/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "modewise/error.hpp"
#include "modewise/log.hpp"
#include "modewise/parallel.hpp"
#include "modewise/rng.hpp"

namespace modewise {
namespace {

// Sub-seed streams under a training seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kValSplitStream = 4;

std::uint8_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<std::uint8_t>(best);
}

std::vector<std::uint8_t> labels_of(const Dataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(data.size());
  for (const auto& s : data.samples) out.push_back(static_cast<std::uint8_t>(s.label));
  return out;
}

template <typename Model>
std::vector<std::uint8_t> predict_batched(Model& model, const Dataset& data,
                                          std::size_t batch_size) {
  std::vector<std::uint8_t> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const auto probs = model.predict(to_batch(data, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) out.push_back(argmax_row(probs.item(b)));
  }
  return out;
}

}  // namespace

EarlyStop parse_early_stop(std::string_view text) {
  if (text == "val") return EarlyStop::Val;
  if (text == "test") return EarlyStop::Test;
  if (text == "none") return EarlyStop::None;
  throw UsageError("early stop must be val, test or none");
}

std::string_view early_stop_name(EarlyStop mode) {
  switch (mode) {
    case EarlyStop::Val: return "val";
    case EarlyStop::Test: return "test";
    case EarlyStop::None: return "none";
  }
  return "none";
}

std::size_t early_stopping(std::span<const double> curve) {
  if (curve.empty()) throw UsageError("early stopping needs at least one epoch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i] > curve[best]) best = i;
  }
  return best + 1;
}

bool patience_exhausted(std::span<const double> curve, std::size_t patience) {
  if (curve.empty() || patience == 0) return false;
  return curve.size() - early_stopping(curve) >= patience;
}

nn::Tensor to_batch(const Dataset& data, std::span<const std::size_t> indices) {
  nn::Tensor batch({indices.size(), kNumChannels, data.M});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = data.samples.at(indices[b]);
    auto dst = batch.item(b);
    std::copy(s.data.begin(), s.data.end(), dst.begin());
  }
  return batch;
}

std::vector<std::uint8_t> predict_labels(Network& model, const Dataset& data,
                                         std::size_t batch_size) {
  return predict_batched(model, data, batch_size);
}

std::vector<std::uint8_t> predict_labels(Ensemble& model, const Dataset& data,
                                         std::size_t batch_size) {
  return predict_batched(model, data, batch_size);
}

double accuracy(Network& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto predicted = predict_labels(model, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    correct += predicted[i] == static_cast<std::uint8_t>(data.samples[i].label);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

EvalReport evaluate(Network& model, const Dataset& test_set) {
  if (test_set.size() == 0) throw DataError("empty test set");
  return evaluate_predictions(labels_of(test_set), predict_labels(model, test_set));
}

EvalReport evaluate(Ensemble& model, const Dataset& test_set) {
  if (test_set.size() == 0) throw DataError("empty test set");
  return evaluate_predictions(labels_of(test_set), predict_labels(model, test_set));
}

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* monitor) {
  if (train_set.size() == 0) throw DataError("empty training set");
  if (train_set.M != spec.length) {
    throw DataError("dataset segment length " + std::to_string(train_set.M) +
                    " does not match configuration length " + std::to_string(spec.length));
  }
  if (config.batch_size == 0) throw UsageError("batch size must be at least 1");
  const auto start_time = std::chrono::steady_clock::now();

  Dataset fit_set;
  Dataset val_set;
  const Dataset* fit = &train_set;
  const Dataset* watch = nullptr;
  switch (config.early_stop) {
    case EarlyStop::Val: {
      auto [a, b] = split_train_test(train_set, 1.0 - config.val_fraction,
                                     derive_seed(config.seed, kValSplitStream));
      if (a.size() == 0 || b.size() == 0) {
        throw DataError("training set too small to carve a validation split");
      }
      fit_set = std::move(a);
      val_set = std::move(b);
      fit = &fit_set;
      watch = &val_set;
      break;
    }
    case EarlyStop::Test:
      if (monitor == nullptr) throw UsageError("early stopping on test needs a monitor set");
      watch = monitor;
      break;
    case EarlyStop::None:
      watch = monitor;
      break;
  }

  Network net = Network::build(spec, derive_seed(config.seed, kInitStream));
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng dropout_rng(derive_seed(config.seed, kDropoutStream));
  nn::Adam adam(config.adam);
  const auto params = net.params();

  TrainResult result{net, {}, 0, 0.0, config.early_stop};
  std::optional<Network> best;
  std::vector<double> curve;
  std::vector<std::size_t> order(fit->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint8_t> labels;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t startb = 0; startb < order.size(); startb += config.batch_size) {
      const std::size_t endb = std::min(order.size(), startb + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + startb, endb - startb);
      const auto x = to_batch(*fit, idx);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(static_cast<std::uint8_t>(fit->samples[i].label));

      net.zero_grad();
      const auto logits = net.logits(x, {nn::Phase::Train, &dropout_rng});
      const auto loss = nn::softmax_xent(logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      net.backward(loss.grad);
      adam.step(params);
      loss_sum += loss.loss * static_cast<double>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        correct += argmax_row(loss.probs.item(b)) == labels[b];
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (watch != nullptr) {
      rec.monitor_accuracy = accuracy(net, *watch);
      curve.push_back(*rec.monitor_accuracy);
      if (config.early_stop != EarlyStop::None && early_stopping(curve) == epoch) best = net;
    }
    spdlog::info("epoch {:3d} loss {:.4f} train {:.4f}{}", epoch, rec.loss, rec.train_accuracy,
                 rec.monitor_accuracy ? fmt::format(" monitor {:.4f}", *rec.monitor_accuracy)
                                      : std::string());
    result.epochs.push_back(rec);
    if (config.early_stop != EarlyStop::None && patience_exhausted(curve, config.patience)) break;
  }

  if (best) {
    result.model = std::move(*best);
    result.best_epoch = early_stopping(curve);
  } else {
    result.model = std::move(net);
    result.best_epoch = result.epochs.size();
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

EnsembleResult train_ensemble(const NetworkSpec& spec, const Dataset& train_set,
                              const TrainConfig& config, std::size_t n_members,
                              const Dataset* monitor, std::size_t jobs) {
  if (n_members == 0) throw UsageError("an ensemble needs at least one member");
  auto members = parallel_map<std::optional<TrainResult>>(n_members, jobs, [&](std::size_t i) {
    const std::uint64_t member_seed = derive_seed(config.seed, i);
    const auto resampled = train_set.subset(bootstrap_resample(train_set.size(), member_seed));
    TrainConfig member_config = config;
    member_config.seed = member_seed;
    return std::optional<TrainResult>(train(spec, resampled, member_config, monitor));
  });
  EnsembleResult out;
  std::vector<Network> nets;
  for (auto& m : members) {
    nets.push_back(m->model);
    out.members.push_back(std::move(*m));
  }
  out.ensemble = Ensemble(std::move(nets));
  return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  if (k < 2 || k > n) throw UsageError("fold count must be in [2, n]");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                    order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(folds[f].begin(), folds[f].end());
  }
  return folds;
}

GridSearchResult grid_search_dropout(const NetworkSpec& spec, const Dataset& train_set,
                                     std::span<const double> grid, std::size_t folds,
                                     const TrainConfig& config, std::size_t jobs) {
  if (grid.empty()) throw UsageError("dropout grid is empty");
  std::vector<double> values(grid.begin(), grid.end());
  std::sort(values.begin(), values.end());
  const std::size_t dims = spec.dropout_ps().size();

  std::vector<std::vector<double>> combos(1);
  for (std::size_t d = 0; d < dims; ++d) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : combos) {
      for (double v : values) {
        auto c = prefix;
        c.push_back(v);
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }

  const auto fold_idx = kfold_indices(train_set.size(), folds, derive_seed(config.seed, 17));
  TrainConfig cell_config = config;
  cell_config.early_stop = EarlyStop::None;
  const auto scores = parallel_map<double>(combos.size() * folds, jobs, [&](std::size_t job) {
    const std::size_t cell = job / folds, fold = job % folds;
    NetworkSpec s = spec;
    s.set_dropout_ps(combos[cell]);
    std::vector<std::size_t> fit_idx;
    for (std::size_t f = 0; f < folds; ++f) {
      if (f != fold) fit_idx.insert(fit_idx.end(), fold_idx[f].begin(), fold_idx[f].end());
    }
    std::sort(fit_idx.begin(), fit_idx.end());
    TrainConfig c = cell_config;
    c.seed = derive_seed(config.seed, fold);
    auto trained = train(s, train_set.subset(fit_idx), c);
    const auto held_out = train_set.subset(fold_idx[fold]);
    return accuracy(trained.model, held_out);
  });

  GridSearchResult result;
  std::size_t best = 0;
  for (std::size_t cell = 0; cell < combos.size(); ++cell) {
    GridCell gc;
    gc.ps = combos[cell];
    for (std::size_t f = 0; f < folds; ++f) gc.fold_accuracy.push_back(scores[cell * folds + f]);
    for (double a : gc.fold_accuracy) gc.mean_accuracy += a / static_cast<double>(folds);
    result.cells.push_back(std::move(gc));
    if (result.cells[cell].mean_accuracy > result.cells[best].mean_accuracy) best = cell;
  }
  result.best = result.cells[best].ps;
  return result;
}

nlohmann::json train_report_json(const TrainResult& result, const NetworkSpec& spec,
                                 std::uint64_t seed) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}};
    j["monitor_accuracy"] =
        e.monitor_accuracy ? nlohmann::json(*e.monitor_accuracy) : nlohmann::json(nullptr);
    epochs.push_back(std::move(j));
  }
  nlohmann::json report = {{"config", spec.name},
                           {"seed", seed},
                           {"early_stop", early_stop_name(result.early_stop)},
                           {"epochs", std::move(epochs)},
                           {"best_epoch", result.best_epoch},
                           {"wall_time_s", result.seconds}};
  if (result.early_stop == EarlyStop::Test) {
    report["protocol_note"] =
        "epoch selected on the test set; test accuracy is optimistically biased";
  }
  return report;
}

}  // namespace modewise
