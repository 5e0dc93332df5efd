#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nfcl/tensor.hpp"

namespace nfcl {

/// Time placement of a frame on an evenly spaced temporal lattice spanning
/// [-1, 1]. A single-frame lattice sits at t = -1.
struct TimeAxis {
  std::uint32_t frames = 1;
  std::uint32_t index = 0;

  double value() const;
  friend bool operator==(const TimeAxis&, const TimeAxis&) = default;
};

/// Regular grid over [-1, 1]^3, optionally with a time coordinate. Grid
/// points are evenly spaced with inclusive endpoints.
struct GridSpec {
  std::vector<std::uint32_t> dims;  // (nx, ny, nz)
  std::optional<TimeAxis> time;

  std::size_t point_count() const;
  /// Number of coordinate columns (spatial axes plus time when present).
  std::size_t coord_dims() const { return dims.size() + (time ? 1 : 0); }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Coordinate of grid index i on an axis with n points.
double axis_coordinate(std::uint32_t i, std::uint32_t n);

/// One row per grid point in C order (last spatial axis fastest), time
/// appended as the final column.
template <class T>
Tensor<T> make_grid(const GridSpec& spec);

enum class VolumeKind : std::uint8_t { Intensity = 0, Labels = 1 };

/// Dense signal on a grid: real intensities or integer labels, C order.
struct Volume {
  std::vector<std::uint32_t> dims;
  std::uint32_t channels = 1;
  VolumeKind kind = VolumeKind::Intensity;
  std::vector<float> intensities;  // used when kind == Intensity
  std::vector<std::uint8_t> labels;  // used when kind == Labels

  static Volume intensity(std::vector<std::uint32_t> dims, std::vector<float> values, std::uint32_t channels = 1);
  static Volume label_map(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values);

  std::size_t voxel_count() const;
  std::size_t value_count() const { return voxel_count() * channels; }

  friend bool operator==(const Volume&, const Volume&) = default;
};

/// Min-max rescaling to [0, 1]. The overload over several volumes shares a
/// single min and max (one case, all frames).
Volume normalize_intensity(const Volume& v);
void normalize_intensity(std::span<Volume> case_frames);

/// NFV container: magic "NFVOL1\0", u8 kind, u8 ndim, u32 extents, u32
/// channels, then f32 or u8 payload; all integers little-endian.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_volume(const Volume& v);
Volume decode_volume(std::span<const std::uint8_t> bytes);

}  // namespace nfcl
