#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "modewise/metrics.hpp"
#include "modewise/model.hpp"
#include "modewise/nn/adam.hpp"
#include "modewise/pipeline.hpp"

namespace modewise {

enum class EarlyStop { Val, Test, None };

EarlyStop parse_early_stop(std::string_view text);
std::string_view early_stop_name(EarlyStop mode);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 62;
  EarlyStop early_stop = EarlyStop::Val;
  /// Epochs without improvement before halting; 0 means never halt early.
  std::size_t patience = 0;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  nn::AdamConfig adam;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_accuracy = 0.0;  // running accuracy over the epoch's mini-batches
  std::optional<double> monitor_accuracy;
};

struct TrainResult {
  Network model;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; the returned parameters come from this epoch
  double seconds = 0.0;
  EarlyStop early_stop = EarlyStop::None;
};

/// Argmax of the curve, 1-based; ties go to the earliest epoch. Curve must be non-empty.
std::size_t early_stopping(std::span<const double> curve);
/// True once `patience` epochs have passed since the best one.
bool patience_exhausted(std::span<const double> curve, std::size_t patience);

/// Converts samples into an (n, 4, M) batch tensor.
nn::Tensor to_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Mini-batch Adam training with seeded shuffling. With EarlyStop::Val a
/// val_fraction slice of the training set is held out as monitor; with
/// EarlyStop::Test `monitor` must be given. Throws NumericError on a non-finite loss.
TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* monitor = nullptr);

/// Predicted label per sample (argmax of probabilities, first maximum wins).
std::vector<std::uint8_t> predict_labels(Network& model, const Dataset& data,
                                         std::size_t batch_size = 256);
std::vector<std::uint8_t> predict_labels(Ensemble& model, const Dataset& data,
                                         std::size_t batch_size = 256);
double accuracy(Network& model, const Dataset& data);

EvalReport evaluate(Network& model, const Dataset& test_set);
EvalReport evaluate(Ensemble& model, const Dataset& test_set);

/// Trains `n_members` networks on bootstrap resamples; member i uses
/// seed derive_seed(seed, i) for both its resample and its training.
struct EnsembleResult {
  Ensemble ensemble;
  std::vector<TrainResult> members;
};
EnsembleResult train_ensemble(const NetworkSpec& spec, const Dataset& train_set,
                              const TrainConfig& config, std::size_t n_members,
                              const Dataset* monitor = nullptr, std::size_t jobs = 1);

/// k disjoint folds covering [0, n), from a seeded shuffle.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

struct GridCell {
  std::vector<double> ps;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;  // lexicographic order of ps
  std::vector<double> best;
};

/// Every combination of grid values over the spec's dropout layers, scored by
/// mean k-fold accuracy. Ties go to the lexicographically smallest combination.
GridSearchResult grid_search_dropout(const NetworkSpec& spec, const Dataset& train_set,
                                     std::span<const double> grid, std::size_t folds,
                                     const TrainConfig& config, std::size_t jobs = 1);

nlohmann::json train_report_json(const TrainResult& result, const NetworkSpec& spec,
                                 std::uint64_t seed);

}  // namespace modewise
