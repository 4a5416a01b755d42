#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wss/rng.hpp"

namespace wss {

enum class Variant : std::uint32_t {
  /// Convolutional attention module in front of the conv/FC head.
  kCaWssNet = 0,
  /// Ablation without the attention module; the input feeds the conv layer directly.
  kMlpWssNet = 1,
};

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct Architecture {
  std::size_t L = 40;
  std::size_t N = 64;
  std::size_t input_channels = 2;
  std::size_t attention_channels = 4;
  std::size_t fc_width = 128;
  Variant variant = Variant::kCaWssNet;

  std::size_t conv_in_channels() const {
    return variant == Variant::kCaWssNet ? attention_channels : input_channels;
  }
  std::size_t flat_size() const { return L * N * attention_channels; }
  bool operator==(const Architecture&) const = default;
};

/// Index of every parameter array in a Model. The order is also the
/// checkpoint order.
enum class Param : std::size_t {
  kQueryKernel,
  kQueryBias,
  kKeyKernel,
  kKeyBias,
  kValueKernel,
  kValueBias,
  kConvKernel,
  kConvBias,
  kFcWeight,
  kFcBias,
  kOutWeight,
  kOutBias,
};
inline constexpr std::size_t kNumParams = 12;

/// Layer numbering used by pruning and transfer: 1 = attention module,
/// 2 = conv layer, 3 = FC layer, 4 = output layer.
int layer_of(Param p);
std::string_view param_name(Param p);

/// One weight array with its binary mask (1 = live, 0 = pruned).
///
/// Conv kernels are stored HWIO: index ((ky·3 + kx)·C_in + ci)·C_out + co.
/// Dense weights are stored in×out row-major: index i·out + o.
struct ParamArray {
  Eigen::VectorXd values;
  Eigen::VectorXd mask;

  Eigen::Index size() const { return values.size(); }
  std::size_t live_count() const;
  void apply_mask() { values.array() *= mask.array(); }
};

/// Network weights θ₁..θ₄ plus masks. Arrays that a variant does not use
/// (the attention kernels of MLP-WSSNet) are empty.
struct Model {
  Architecture arch;
  std::array<ParamArray, kNumParams> params;

  ParamArray& operator[](Param p) { return params[static_cast<std::size_t>(p)]; }
  const ParamArray& operator[](Param p) const { return params[static_cast<std::size_t>(p)]; }

  std::size_t parameter_count() const;
  std::size_t live_parameter_count() const;
  std::size_t layer_parameter_count(int layer) const;
  std::size_t layer_live_count(int layer) const;
};

/// Expected element count of every array for an architecture.
std::array<std::size_t, kNumParams> param_shapes(const Architecture& arch);

/// Zero-valued model with all-ones masks.
Model make_model(const Architecture& arch);

/// Glorot-uniform kernels (±√(6/(fan_in+fan_out))) and zero biases.
Model init_model(const Architecture& arch, Rng& rng);

/// Throws std::invalid_argument when array sizes disagree with arch.
void validate_model(const Model& m);

inline constexpr std::array<Param, kNumParams> kAllParams = {
    Param::kQueryKernel, Param::kQueryBias, Param::kKeyKernel, Param::kKeyBias,
    Param::kValueKernel, Param::kValueBias, Param::kConvKernel, Param::kConvBias,
    Param::kFcWeight,    Param::kFcBias,    Param::kOutWeight,  Param::kOutBias,
};

}  // namespace wss
