#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgon/model.hpp"
#include "dgon/params.hpp"
#include "dgon/sampling.hpp"

namespace dgon {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 64;  // triplets per step, rounded up to whole windows
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t validate_every = 1;
  std::filesystem::path checkpoint;  // empty: no checkpoint file

  void validate() const;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;              // one per epoch
  std::vector<std::size_t> validation_epochs;  // 1-based epochs with a validation pass
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 before any validation
  std::vector<double> epoch_seconds;

  /// epoch,train_loss,val_loss with an empty val_loss where none was computed.
  std::string to_csv() const;
};

using EpochCallback =
    std::function<void(std::size_t epoch, double train_loss, std::optional<double> val_loss)>;

/// Mean per-sample L1 loss over a triplet set, with the model left untouched.
/// All windows must be on `g`. Throws DataError on an empty set.
double evaluate_loss(const DeepGraphONet& model, const Graph& g, const TripletSet& set);

/// Shuffled mini-batch Adam on the L1 loss. On return `model` holds the
/// parameters of the best validation epoch (the last epoch when the split has
/// no validation triplets). Throws DivergenceError naming epoch and batch.
TrainHistory train(DeepGraphONet& model, DatasetSplit& split, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

}  // namespace dgon
