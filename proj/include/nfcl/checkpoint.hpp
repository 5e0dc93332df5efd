#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nfcl/model.hpp"

namespace nfcl {

// Binary checkpoint, little-endian throughout:
//   magic "NFCKPT1\0" (8 bytes)
//   config: u8 arch, u32 in_dim, u32 hidden_layers, u32 hidden_width,
//           u32 out_channels, u8 head, u32 linear_channels, u32 pe_levels,
//           f64 omega0, u32 latent_dim, u64 seed
//   u32 lattice rank, u32 extents
//   u32 parameter count; per parameter in model order:
//           u32 name length, name bytes, u32 rank, u32 extents, f32 values
//   u64 coordinate count; per coordinate, sorted by lattice index:
//           u64 lattice index, u32 table row

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const FieldModel<T>& model);
template <class T>
FieldModel<T> decode_checkpoint(std::span<const std::uint8_t> bytes);

template <class T>
void save_checkpoint(const FieldModel<T>& model, const std::filesystem::path& path);
template <class T>
FieldModel<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace nfcl
