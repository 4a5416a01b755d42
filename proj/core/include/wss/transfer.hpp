#pragma once

#include <cstddef>
#include <cstdint>

#include "wss/dataset.hpp"
#include "wss/model.hpp"
#include "wss/trainer.hpp"

namespace wss {

/// Frozen general-feature layers {1, 2}; adapted domain-specific layers {3, 4}.
struct TransferSpec {
  double learning_rate = 3e-5;
  std::size_t epochs = 50;
  std::size_t max_batch_size = 64;

  void validate() const;
};

inline const LayerSet kAdaptedLayers = LayerSet::only({3, 4});

/// Trainable scalars during adaptation: live entries of layers 3 and 4.
std::size_t adaptable_parameter_count(const Model& model);

/// Fresh-state Adam on layers 3–4 for a fixed number of epochs with batch
/// size min(max_batch_size, |D_ad|). Layers 1–2 are returned bit-identical
/// and layer-3 masks stay enforced. Throws std::invalid_argument on an
/// empty adaptation set.
Model adapt(const Model& model, const Dataset& adaptation_set, const TransferSpec& spec, std::uint64_t seed,
            const EpochCallback& on_epoch = {});

}  // namespace wss
