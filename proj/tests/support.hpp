#pragma once
// Shared helpers for the unit suites: random fills and the independent
// oracles (central finite differences, brute-force SSIM) that derived values
// are checked against.
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nfcl/tensor.hpp"
#include "nfcl/volume.hpp"

namespace nfcl::test {

template <class T>
Tensor<T> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

// Central differences of a scalar function of every parameter entry.
inline GradSet<double> numeric_gradient(ParamSet<double>& params, const std::function<double()>& loss,
                                        double h = 1e-5) {
  GradSet<double> grad = params.zeros_like();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + h;
      const double up = loss();
      params[p][i] = saved - h;
      const double down = loss();
      params[p][i] = saved;
      grad[p][i] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
// turning rounding noise into large ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

// SSIM of one 2D slice straight from the definition: every 7x7 window fully
// inside the slice, sample (N-1) covariance, C1 = 1e-4, C2 = 9e-4.
inline double brute_force_ssim_2d(const std::vector<double>& x, const std::vector<double>& y, std::size_t h,
                                  std::size_t w) {
  constexpr std::size_t k = 7;
  constexpr double c1 = 1e-4, c2 = 9e-4;
  const double n = k * k;
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r = 0; r + k <= h; ++r) {
    for (std::size_t c = 0; c + k <= w; ++c) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          mx += x[(r + i) * w + c + j];
          my += y[(r + i) * w + c + j];
        }
      }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double dx = x[(r + i) * w + c + j] - mx;
          const double dy = y[(r + i) * w + c + j] - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      }
      vx /= n - 1;
      vy /= n - 1;
      cxy /= n - 1;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

// Mean of brute_force_ssim_2d over the slices of a C-order (nx, ny, nz)
// volume taken at fixed z.
inline double brute_force_ssim(const Volume& a, const Volume& b) {
  const std::size_t nx = a.dims[0], ny = a.dims[1], nz = a.dims[2];
  double total = 0.0;
  for (std::size_t z = 0; z < nz; ++z) {
    std::vector<double> x(nx * ny), y(nx * ny);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        x[i * ny + j] = a.intensities[(i * ny + j) * nz + z];
        y[i * ny + j] = b.intensities[(i * ny + j) * nz + z];
      }
    }
    total += brute_force_ssim_2d(x, y, nx, ny);
  }
  return total / static_cast<double>(nz);
}

}  // namespace nfcl::test
