#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rt/dataset.hpp"
#include "rt/network.hpp"

namespace rt {

struct TrainConfig {
  int epochs = 40;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool double_precision = false;  // train in 64-bit instead of 32-bit
  int threads = 1;                // per-sample gradients; reduction order is fixed

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double mean_loss = 0.0;
};

using EpochHistory = std::vector<EpochRecord>;

template <typename Scalar>
struct TrainResult {
  Network<Scalar> model;
  EpochHistory history;
};

/// Shuffled minibatch SGD with momentum on the mean cross-entropy of each
/// batch. The shuffle of epoch e is seeded from (cfg.seed, e). Train and
/// test accuracy are recorded after every epoch. Results are bit-identical
/// for any `threads` value.
template <typename Scalar>
TrainResult<Scalar> train(Network<Scalar> model, const DatasetSplit& split, const TrainConfig& cfg,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

template <typename Scalar>
std::vector<ClassId> predict_all(const Network<Scalar>& model, std::span<const SampleMatrix> data,
                                 int threads = 1);

template <typename Scalar>
double accuracy(const Network<Scalar>& model, std::span<const SampleMatrix> data, int threads = 1);

}  // namespace rt
