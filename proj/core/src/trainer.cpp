#include "wss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wss {

void TrainSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and positive");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (early_stopping && patience > max_epochs) throw std::invalid_argument("patience exceeds max epochs");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0)) {
    throw std::invalid_argument("invalid Adam constants");
  }
}

AdamOptimizer::AdamOptimizer(const Model& model, double learning_rate, AdamParams params)
    : lr_(learning_rate), p_(params), m_(zero_gradients(model)), v_(zero_gradients(model)) {}

void AdamOptimizer::step(Model& model, const Gradients& grads, const LayerSet& layers) {
  ++t_;
  const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!layers.contains(layer_of(kAllParams[i]))) continue;
    auto& param = model.params[i];
    if (param.size() == 0) continue;
    m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grads[i];
    v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grads[i].cwiseAbs2();
    param.values.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + p_.epsilon);
    param.apply_mask();
  }
}

Eigen::MatrixXd predict(const Model& model, const Dataset& data, std::size_t chunk) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(model.arch.L));
  std::vector<ChannelStack> inputs;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    inputs.clear();
    for (std::size_t i = start; i < end; ++i) inputs.push_back(data.input(i));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        forward_batch(model, inputs);
  }
  return out;
}

double dataset_loss(const Model& model, const Dataset& data, std::size_t chunk) {
  if (data.empty()) return 0.0;
  return bce_loss(predict(model, data, chunk), data.label_matrix());
}

TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set, const TrainSpec& spec,
                  const LayerSet& layers, const EpochCallback& on_epoch) {
  spec.validate();
  validate_model(model);
  if (train_set.empty()) throw std::invalid_argument("train: training set is empty");
  if (spec.early_stopping && val_set.empty()) throw std::invalid_argument("train: validation set is empty");
  if (train_set.rows() != model.arch.L || train_set.cols() != model.arch.N) {
    throw std::invalid_argument("train: dataset shape does not match the architecture");
  }

  Rng shuffle_rng = child_stream(spec.seed, StreamId::kShuffle);
  AdamOptimizer opt(model, spec.learning_rate, spec.adam);
  TrainResult result;
  result.model = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ChannelStack> inputs;
  Gradients grads;

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t end = std::min(order.size(), start + spec.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      inputs.clear();
      for (auto i : idx) inputs.push_back(train_set.input(i));
      const double loss = loss_and_gradients(model, inputs, train_set.label_matrix(idx), grads, layers);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                                 std::to_string(start));
      }
      loss_sum += loss * static_cast<double>(idx.size());
      opt.step(model, grads, layers);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : dataset_loss(model, val_set);
    if (!val_set.empty() && !std::isfinite(rec.val_loss)) {
      throw std::runtime_error("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!spec.early_stopping) continue;
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= std::max<std::size_t>(spec.patience, 1)) {
      result.early_stopped = true;
      break;
    }
  }
  if (!spec.early_stopping) {
    result.model = std::move(model);
    result.best_epoch = result.history.empty() ? 0 : result.history.back().epoch;
  }
  return result;
}

}  // namespace wss
