#pragma once

#include <string>
#include <vector>

#include "epg/model.hpp"

namespace epg {

// Weights file: "EPGW" | version u16 | meta_len u32 | JSON meta (model name,
// kernel width, dropout rate, input length, classes) | entry count u32 |
// entries (name_len u16, name, dtype u8 (0 = f32), rank u8, dims u32...,
// kind u8 (0 = trainable, 1 = running mean, 2 = running variance),
// payload offset u64) | little-endian f32 payload.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const zoo::Model<float>& model);
zoo::Model<float> decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const zoo::Model<float>& model, const std::string& path);
zoo::Model<float> load_checkpoint(const std::string& path);

// Throws FormatError unless `model` was built from a spec equal in shape to `spec`.
void require_compatible(const zoo::Model<float>& model, const zoo::ModelSpec& spec);

}  // namespace epg
