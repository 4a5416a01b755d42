#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "wss/dataset.hpp"
#include "wss/model.hpp"
#include "wss/network.hpp"

namespace wss {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainSpec {
  double learning_rate = 3e-5;
  AdamParams adam;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 30;
  /// When false the run lasts exactly max_epochs and returns the final weights.
  bool early_stopping = true;
  std::uint64_t seed = 0;

  void validate() const;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const Model& model, double learning_rate, AdamParams params = {});

  /// One update of the parameters in `layers`; masks are re-applied afterwards.
  void step(Model& model, const Gradients& grads, const LayerSet& layers);
  std::size_t steps() const { return t_; }

 private:
  double lr_;
  AdamParams p_;
  std::size_t t_ = 0;
  Gradients m_;
  Gradients v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean loss over a dataset, evaluated in chunks.
double dataset_loss(const Model& model, const Dataset& data, std::size_t chunk = 256);

/// Probabilities for every sample, one row each.
Eigen::MatrixXd predict(const Model& model, const Dataset& data, std::size_t chunk = 256);

/// Mini-batch Adam on the BCE loss. Batches are reshuffled each epoch from
/// TrainSpec::seed. With early stopping, training halts once the
/// validation loss has not improved for max(patience, 1) consecutive
/// epochs and the best-validation weights are returned. Throws
/// std::runtime_error on a non-finite loss.
TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set, const TrainSpec& spec,
                  const LayerSet& layers = LayerSet::all(), const EpochCallback& on_epoch = {});

}  // namespace wss
