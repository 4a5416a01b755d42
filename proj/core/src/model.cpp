#include "wss/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wss {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kCaWssNet:
      return "ca-wssnet";
    case Variant::kMlpWssNet:
      return "mlp-wssnet";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view s) {
  if (s == "ca-wssnet") return Variant::kCaWssNet;
  if (s == "mlp-wssnet") return Variant::kMlpWssNet;
  throw std::invalid_argument("unknown model variant '" + std::string(s) + "'");
}

int layer_of(Param p) {
  switch (p) {
    case Param::kQueryKernel:
    case Param::kQueryBias:
    case Param::kKeyKernel:
    case Param::kKeyBias:
    case Param::kValueKernel:
    case Param::kValueBias:
      return 1;
    case Param::kConvKernel:
    case Param::kConvBias:
      return 2;
    case Param::kFcWeight:
    case Param::kFcBias:
      return 3;
    case Param::kOutWeight:
    case Param::kOutBias:
      return 4;
  }
  return 0;
}

std::string_view param_name(Param p) {
  static constexpr std::array<std::string_view, kNumParams> names = {
      "attn.query.kernel", "attn.query.bias", "attn.key.kernel", "attn.key.bias",
      "attn.value.kernel", "attn.value.bias", "conv.kernel",     "conv.bias",
      "fc.weight",         "fc.bias",         "out.weight",      "out.bias",
  };
  return names[static_cast<std::size_t>(p)];
}

std::size_t ParamArray::live_count() const {
  return static_cast<std::size_t>((mask.array() != 0.0).count());
}

std::array<std::size_t, kNumParams> param_shapes(const Architecture& a) {
  std::array<std::size_t, kNumParams> s{};
  const bool ca = a.variant == Variant::kCaWssNet;
  const std::size_t qkv_kernel = ca ? 9 * a.input_channels * a.attention_channels : 0;
  const std::size_t qkv_bias = ca ? a.attention_channels : 0;
  s[0] = s[2] = s[4] = qkv_kernel;
  s[1] = s[3] = s[5] = qkv_bias;
  s[6] = 9 * a.conv_in_channels() * a.attention_channels;
  s[7] = a.attention_channels;
  s[8] = a.flat_size() * a.fc_width;
  s[9] = a.fc_width;
  s[10] = a.fc_width * a.L;
  s[11] = a.L;
  return s;
}

Model make_model(const Architecture& arch) {
  if (arch.L == 0 || arch.N == 0 || arch.input_channels == 0 || arch.attention_channels == 0 || arch.fc_width == 0) {
    throw std::invalid_argument("architecture dimensions must be positive");
  }
  Model m;
  m.arch = arch;
  const auto shapes = param_shapes(arch);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto n = static_cast<Eigen::Index>(shapes[i]);
    m.params[i].values = Eigen::VectorXd::Zero(n);
    m.params[i].mask = Eigen::VectorXd::Ones(n);
  }
  return m;
}

namespace {

void glorot(ParamArray& arr, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < arr.values.size(); ++i) arr.values(i) = dist(rng);
}

}  // namespace

Model init_model(const Architecture& arch, Rng& rng) {
  Model m = make_model(arch);
  const auto conv_fans = [](std::size_t cin, std::size_t cout) {
    return std::pair<double, double>{9.0 * static_cast<double>(cin), 9.0 * static_cast<double>(cout)};
  };
  if (arch.variant == Variant::kCaWssNet) {
    const auto [fi, fo] = conv_fans(arch.input_channels, arch.attention_channels);
    glorot(m[Param::kQueryKernel], fi, fo, rng);
    glorot(m[Param::kKeyKernel], fi, fo, rng);
    glorot(m[Param::kValueKernel], fi, fo, rng);
  }
  {
    const auto [fi, fo] = conv_fans(arch.conv_in_channels(), arch.attention_channels);
    glorot(m[Param::kConvKernel], fi, fo, rng);
  }
  glorot(m[Param::kFcWeight], static_cast<double>(arch.flat_size()), static_cast<double>(arch.fc_width), rng);
  glorot(m[Param::kOutWeight], static_cast<double>(arch.fc_width), static_cast<double>(arch.L), rng);
  return m;
}

void validate_model(const Model& m) {
  const auto shapes = param_shapes(m.arch);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = m.params[i];
    if (static_cast<std::size_t>(p.values.size()) != shapes[i] || p.mask.size() != p.values.size()) {
      throw std::invalid_argument(std::string("model array ") + std::string(param_name(kAllParams[i])) +
                                  " has size " + std::to_string(p.values.size()) + ", expected " +
                                  std::to_string(shapes[i]));
    }
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.size());
  return n;
}

std::size_t Model::live_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.live_count();
  return n;
}

std::size_t Model::layer_parameter_count(int layer) const {
  std::size_t n = 0;
  for (auto p : kAllParams)
    if (layer_of(p) == layer) n += static_cast<std::size_t>((*this)[p].size());
  return n;
}

std::size_t Model::layer_live_count(int layer) const {
  std::size_t n = 0;
  for (auto p : kAllParams)
    if (layer_of(p) == layer) n += (*this)[p].live_count();
  return n;
}

}  // namespace wss
