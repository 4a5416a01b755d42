#include "wss/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wss {

void PruneSpec::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("pruning ratio must lie in (0, 1)");
  for (int l : layers) {
    if (l < 1 || l > 3) throw std::invalid_argument("only layers 1..3 can be pruned, got " + std::to_string(l));
  }
  if (!(finetune_learning_rate >= 0.0)) throw std::invalid_argument("fine-tune learning rate must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

double compute_threshold(std::span<const double> weights, double ratio) {
  if (weights.empty()) throw std::invalid_argument("compute_threshold: empty weight vector");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("compute_threshold: ratio must lie in (0, 1)");
  std::vector<double> eta(weights.size());
  std::transform(weights.begin(), weights.end(), eta.begin(), [](double w) { return std::abs(w); });
  const double pos = std::ceil(ratio * static_cast<double>(eta.size()));
  const auto rank = std::clamp<std::size_t>(static_cast<std::size_t>(pos), 1, eta.size());
  auto nth = eta.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(eta.begin(), nth, eta.end());
  return *nth;
}

std::vector<double> layer_values(const Model& model, int layer) {
  std::vector<double> out;
  for (auto p : kAllParams) {
    if (layer_of(p) != layer) continue;
    const auto& v = model[p].values;
    out.insert(out.end(), v.data(), v.data() + v.size());
  }
  return out;
}

Model prune(const Model& model, const PruneSpec& spec, std::vector<LayerPruneReport>* report) {
  spec.validate();
  Model out = model;
  for (int layer : spec.layers) {
    const auto values = layer_values(model, layer);
    if (values.empty()) continue;  // MLP-WSSNet has no layer 1
    const double gamma = compute_threshold(values, spec.ratio);
    for (auto p : kAllParams) {
      if (layer_of(p) != layer) continue;
      auto& arr = out[p];
      for (Eigen::Index j = 0; j < arr.size(); ++j)
        if (std::abs(arr.values(j)) < gamma) arr.mask(j) = 0.0;
      arr.apply_mask();
    }
    if (report) {
      report->push_back({layer, gamma, values.size(), out.layer_live_count(layer)});
    }
  }
  return out;
}

TrainResult finetune(const Model& pruned, const Dataset& train_set, const Dataset& val_set, const PruneSpec& spec,
                     std::uint64_t seed, const EpochCallback& on_epoch) {
  spec.validate();
  TrainSpec ts;
  ts.learning_rate = spec.finetune_learning_rate;
  ts.batch_size = spec.batch_size;
  ts.max_epochs = spec.finetune_epochs;
  ts.early_stopping = false;
  ts.seed = seed;
  if (spec.finetune_epochs == 0 || spec.finetune_learning_rate == 0.0) {
    TrainResult r;
    r.model = pruned;
    return r;
  }
  return train(pruned, train_set, val_set, ts, LayerSet::all(), on_epoch);
}

}  // namespace wss
