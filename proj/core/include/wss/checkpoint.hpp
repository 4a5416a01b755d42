#pragma once

#include <filesystem>

#include "wss/model.hpp"

namespace wss {

/// Little-endian checkpoint:
///   magic "WSSCKPT1", u32 version, u32 variant, u32 L, u32 N,
///   u32 input_channels, u32 attention_channels, u32 fc_width,
///   u32 array_count, then per array: u32 layer, u32 name length, name
///   bytes, u64 count, count float64 values, ⌈count/8⌉ mask bytes
///   (bit j of byte j/8 set ⇔ element j is live, LSB first).
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace wss
