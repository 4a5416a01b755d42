#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wss/model.hpp"
#include "wss/multicoset.hpp"

namespace wss {

/// H×(C·W) matrix holding C feature maps side by side; map c occupies
/// columns [c·W, (c+1)·W). This is also the horizontally stacked
/// L×4N layout the attention module operates on.
using ChannelStack = Eigen::MatrixXd;

ChannelStack to_channel_stack(const FeatureTensor& x);
/// From an interleaved (l, n, c) buffer with two channels.
ChannelStack to_channel_stack(std::span<const float> features, std::size_t L, std::size_t N);

/// Stride-1 3×3 cross-correlation with a one-pixel zero border plus a
/// per-output-channel bias. Kernel layout is HWIO.
ChannelStack conv2d_zp(const ChannelStack& in, std::size_t in_channels, std::span<const double> kernel,
                       std::span<const double> bias, std::size_t out_channels);

/// Accumulates kernel and bias gradients into d_kernel/d_bias and, when
/// d_in is non-null, the input gradient into *d_in.
void conv2d_zp_backward(const ChannelStack& in, std::size_t in_channels, std::span<const double> kernel,
                        std::size_t out_channels, const ChannelStack& d_out, std::span<double> d_kernel,
                        std::span<double> d_bias, ChannelStack* d_in);

/// Intermediate values of the convolutional attention module.
struct AttentionState {
  ChannelStack query;      // L×4N
  ChannelStack key;        // L×4N
  ChannelStack value;      // L×4N
  /// Transposed attention map Mᵀ (4N×4N): column i is the softmax
  /// distribution of row i of M.
  Eigen::MatrixXd map_t;
  ChannelStack output;  // L×4N, equals (M·Vᵀ)ᵀ = V·Mᵀ

  Eigen::MatrixXd attention_map() const { return map_t.transpose(); }
};

/// Q, K, V by 3×3 convolutions; M = softmax_rows(QᵀK/√L); output (M·Vᵀ)ᵀ.
AttentionState ca_module(const ChannelStack& x, const Model& model);

/// Flattens L×(C·N) maps into the FC input order (l, n, c) row-major:
/// flat[(l·N + n)·C + c] = maps(l, c·N + n).
void flatten_maps(const ChannelStack& maps, std::size_t channels, Eigen::Ref<Eigen::RowVectorXd> flat);
void unflatten_maps(const Eigen::Ref<const Eigen::RowVectorXd>& flat, std::size_t channels, ChannelStack& maps);

/// Sigmoid probabilities for one input.
Eigen::VectorXd forward(const Model& model, const FeatureTensor& x);

/// Sigmoid probabilities for a batch, one row per input.
Eigen::MatrixXd forward_batch(const Model& model, std::span<const ChannelStack> inputs);

inline constexpr double kBceClip = 1e-7;

/// Batch-mean, sub-band-summed binary cross-entropy with predictions
/// clipped to [kBceClip, 1 − kBceClip]. Rows are samples.
double bce_loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& labels);

using Gradients = std::array<Eigen::VectorXd, kNumParams>;

Gradients zero_gradients(const Model& model);

/// Which of layers 1..4 receive gradients.
struct LayerSet {
  std::array<bool, 5> on{false, true, true, true, true};

  static LayerSet all() { return {}; }
  static LayerSet only(std::initializer_list<int> layers);
  bool contains(int layer) const { return layer >= 1 && layer <= 4 && on[static_cast<std::size_t>(layer)]; }
};

/// Loss of the batch and its exact gradients with respect to every
/// parameter in a selected layer. Gradients of masked positions and of
/// unselected layers are zero. `grads` is overwritten.
double loss_and_gradients(const Model& model, std::span<const ChannelStack> inputs, const Eigen::MatrixXd& labels,
                          Gradients& grads, const LayerSet& layers = LayerSet::all());

/// Single-sample gradients of the loss.
Gradients backward(const Model& model, const FeatureTensor& x, const Eigen::VectorXd& labels);

}  // namespace wss
