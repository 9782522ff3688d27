#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "dkstn/model.hpp"
#include "dkstn/rmm.hpp"
#include "dkstn/samples.hpp"

namespace dkstn {

struct TrainConfig {
  std::size_t epochs = 25;
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  std::size_t batch_size = 16;
  double beta = 0.5;   // weight of the RMM1 term
  double gamma = 0.5;  // weight of the RMM2 term
  std::uint64_t seed = 0;
  bool check_finite = false;

  void validate() const;
};

/// beta * mean over samples then leads of (pred1 - truth1)^2 + gamma * the
/// same for component 2. pred and truth are [M, n, 2].
Var loss_overall(Var pred, const Tensor& truth, double beta, double gamma);
double loss_value(const Tensor& pred, const Tensor& truth, double beta, double gamma);

struct EpochLog {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam over shuffled mini-batches. The recorded train loss of an epoch is a
/// separate pass over the training set in fixed order with batch statistics;
/// the valid loss uses frozen batchnorm statistics. Returns the model state
/// of the epoch with the lowest valid loss (epoch 0 included).
DkstnModel train(DkstnModel model, const SampleSet& train_set, const SampleSet& valid_set,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

struct DateSplit {
  Date valid_first;  // samples entirely inside [valid_first, valid_last] validate
  Date valid_last;
};

/// Splits by date, dropping samples that straddle a boundary, then trains.
DkstnModel train(DkstnModel model, const SampleSet& samples, const DateSplit& split,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean loss over a set in fixed order; batchnorm uses its current mode.
double evaluate_loss(DkstnModel& model, const SampleSet& set, const TrainConfig& config);

/// Forecast from raw fields: preprocesses the 120 + k days ending at `anchor`
/// with the model's stored harmonic fit, then predicts leads 1..horizon.
RmmSeries predict(DkstnModel& model, const GriddedSeries& raw, Date anchor);

}  // namespace dkstn
