#include "wss/checkpoint.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/binary_io.hpp"

namespace wss {

namespace {
constexpr std::array<char, 8> kMagic = {'W', 'S', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  validate_model(model);
  detail::write_atomically(path, [&](std::ofstream& os) {
    detail::BinaryWriter w(os);
    w.bytes(kMagic.data(), kMagic.size());
    w.put<std::uint32_t>(kVersion);
    const auto& a = model.arch;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.variant));
    for (std::size_t v : {a.L, a.N, a.input_channels, a.attention_channels, a.fc_width})
      w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kNumParams));
    for (auto p : kAllParams) {
      const auto& arr = model[p];
      const auto name = param_name(p);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(layer_of(p)));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
      w.bytes(name.data(), name.size());
      w.put<std::uint64_t>(static_cast<std::uint64_t>(arr.size()));
      w.bytes(arr.values.data(), static_cast<std::size_t>(arr.size()) * sizeof(double));
      std::vector<std::uint8_t> bits((static_cast<std::size_t>(arr.size()) + 7) / 8, 0);
      for (Eigen::Index j = 0; j < arr.size(); ++j)
        if (arr.mask(j) != 0.0) bits[static_cast<std::size_t>(j) / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
      w.bytes(bits.data(), bits.size());
    }
  });
}

Model load_checkpoint(const std::filesystem::path& path) {
  auto is = detail::open_for_reading(path);
  detail::BinaryReader r(is, path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw std::runtime_error("not a checkpoint file: " + path.string());
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v) + ": " + path.string());
  }
  Architecture a;
  const auto variant = r.get<std::uint32_t>();
  if (variant > 1) throw std::runtime_error("unknown model variant in checkpoint: " + path.string());
  a.variant = static_cast<Variant>(variant);
  a.L = r.get<std::uint32_t>();
  a.N = r.get<std::uint32_t>();
  a.input_channels = r.get<std::uint32_t>();
  a.attention_channels = r.get<std::uint32_t>();
  a.fc_width = r.get<std::uint32_t>();
  Model m = make_model(a);
  if (r.get<std::uint32_t>() != kNumParams) throw std::runtime_error("unexpected array count in " + path.string());
  for (auto p : kAllParams) {
    const auto layer = r.get<std::uint32_t>();
    std::string name(r.get<std::uint32_t>(), '\0');
    r.bytes(name.data(), name.size());
    if (name != param_name(p) || static_cast<int>(layer) != layer_of(p)) {
      throw std::runtime_error("unexpected array '" + name + "' in " + path.string());
    }
    auto& arr = m[p];
    const auto count = r.get<std::uint64_t>();
    if (count != static_cast<std::uint64_t>(arr.size())) {
      throw std::runtime_error("array '" + name + "' has wrong size in " + path.string());
    }
    r.bytes(arr.values.data(), count * sizeof(double));
    std::vector<std::uint8_t> bits((count + 7) / 8);
    r.bytes(bits.data(), bits.size());
    for (std::uint64_t j = 0; j < count; ++j) arr.mask(static_cast<Eigen::Index>(j)) = (bits[j / 8] >> (j % 8)) & 1u;
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in checkpoint: " + path.string());
  return m;
}

}  // namespace wss
