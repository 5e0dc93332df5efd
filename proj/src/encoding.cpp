#include "nfcl/encoding.hpp"

#include <cmath>
#include <numbers>

#include "nfcl/errors.hpp"

namespace nfcl {

template <class T>
Tensor<T> encode_pe(const Tensor<T>& coords, std::uint32_t levels) {
  if (coords.rank() != 2) throw DimensionError("positional encoding expects a coordinate matrix");
  const std::size_t n = coords.rows();
  const std::size_t d = coords.cols();
  const std::size_t width = d * 2 * levels;
  Tensor<T> out(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * width;
    for (std::size_t a = 0; a < d; ++a) {
      // Double-angle recurrence from the base level; the error grows by about
      // one bit per level, far below float resolution at L = 10.
      const double x = coords(i, a);
      double sn = std::sin(std::numbers::pi * x);
      double cs = std::cos(std::numbers::pi * x);
      for (std::uint32_t l = 0; l < levels; ++l) {
        *row++ = static_cast<T>(sn);
        *row++ = static_cast<T>(cs);
        const double next_sn = 2.0 * sn * cs;
        cs = (cs - sn) * (cs + sn);
        sn = next_sn;
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> PositionalEncoder::operator()(const Tensor<T>& coords) const {
  if (coords.cols() != in_dim) throw DimensionError("positional encoder input width mismatch");
  return encode_pe(coords, levels);
}

template Tensor<float> encode_pe<float>(const Tensor<float>&, std::uint32_t);
template Tensor<double> encode_pe<double>(const Tensor<double>&, std::uint32_t);
template Tensor<float> PositionalEncoder::operator()<float>(const Tensor<float>&) const;
template Tensor<double> PositionalEncoder::operator()<double>(const Tensor<double>&) const;

}  // namespace nfcl
