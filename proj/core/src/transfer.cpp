#include "wss/transfer.hpp"

#include <algorithm>
#include <stdexcept>

namespace wss {

void TransferSpec::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("adaptation learning rate must be non-negative");
  if (max_batch_size == 0) throw std::invalid_argument("adaptation batch size must be positive");
}

std::size_t adaptable_parameter_count(const Model& model) {
  return model.layer_live_count(3) + model.layer_live_count(4);
}

Model adapt(const Model& model, const Dataset& adaptation_set, const TransferSpec& spec, std::uint64_t seed,
            const EpochCallback& on_epoch) {
  spec.validate();
  if (adaptation_set.empty()) throw std::invalid_argument("adapt: adaptation set is empty");
  if (spec.epochs == 0 || spec.learning_rate == 0.0) return model;
  TrainSpec ts;
  ts.learning_rate = spec.learning_rate;
  ts.batch_size = std::min(spec.max_batch_size, adaptation_set.size());
  ts.max_epochs = spec.epochs;
  ts.early_stopping = false;
  ts.seed = seed;
  return train(model, adaptation_set, Dataset{}, ts, kAdaptedLayers, on_epoch).model;
}

}  // namespace wss
