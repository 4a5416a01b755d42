#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wss/dataset.hpp"
#include "wss/model.hpp"
#include "wss/trainer.hpp"

namespace wss {

struct PruneSpec {
  double ratio = 0.9;  // κ
  std::vector<int> layers{1, 2, 3};
  std::size_t finetune_epochs = 300;
  double finetune_learning_rate = 3e-5;
  std::size_t batch_size = 64;

  /// κ must lie strictly inside (0, 1); layer 4 can never be pruned.
  void validate() const;
};

/// γ = η[⌈κ·M⌉] (1-based) where η holds the |θ| sorted ascending.
double compute_threshold(std::span<const double> weights, double ratio);

/// All values of a layer (kernels and biases, in Param order).
std::vector<double> layer_values(const Model& model, int layer);

struct LayerPruneReport {
  int layer = 0;
  double threshold = 0.0;
  std::size_t total = 0;
  std::size_t survivors = 0;
};

/// Zeroes and masks every weight with |w| < γ_i in the selected layers;
/// ties at γ_i survive. Existing masks are kept.
Model prune(const Model& model, const PruneSpec& spec, std::vector<LayerPruneReport>* report = nullptr);

/// Fixed-length, mask-respecting retraining of all layers.
TrainResult finetune(const Model& pruned, const Dataset& train_set, const Dataset& val_set, const PruneSpec& spec,
                     std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace wss
