#pragma once

#include <cstdint>

#include "nfcl/tensor.hpp"

namespace nfcl {

/// Fixed sinusoidal lifting of coordinates: for every coordinate component x,
/// [sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)].
/// The raw coordinates are not part of the output.
struct PositionalEncoder {
  std::uint32_t levels = 10;
  std::uint32_t in_dim = 3;

  std::size_t output_width() const { return static_cast<std::size_t>(in_dim) * 2 * levels; }

  template <class T>
  Tensor<T> operator()(const Tensor<T>& coords) const;
};

template <class T>
Tensor<T> encode_pe(const Tensor<T>& coords, std::uint32_t levels);

}  // namespace nfcl
