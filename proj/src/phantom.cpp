#include "nfcl/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

using Vec3 = std::array<double, 3>;

bool inside(const Vec3& p, const Vec3& center, const Vec3& radii) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = (p[a] - center[a]) / radii[a];
    s += d * d;
  }
  return s <= 1.0;
}

}  // namespace

double contraction(double t) {
  return 0.85 + 0.15 * std::cos(0.5 * std::numbers::pi * (t + 1.0));
}

PhantomFrame phantom(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz, double t, std::uint64_t case_seed,
                     const PhantomOptions& options) {
  if (nx < 2 || ny < 2 || nz < 2) throw ConfigError("phantom needs at least 2 points per axis");
  if (t < -1.0 || t > 1.0) throw ConfigError("phantom time must lie in [-1, 1]");

  std::mt19937_64 rng(case_seed);
  std::uniform_real_distribution<double> jitter(-options.jitter, options.jitter);
  Vec3 lv_center = {-0.2, 0.0, 0.0};
  Vec3 rv_center = {0.35, 0.0, 0.0};
  if (options.jitter > 0.0) {
    for (double& c : lv_center) c += jitter(rng);
    for (double& c : rv_center) c += jitter(rng);
  }

  const double s = contraction(t);
  const Vec3 lv_radii = {0.30 * s, 0.30 * s, 0.45};
  const Vec3 myo_radii = {lv_radii[0] * 1.4, lv_radii[1] * 1.4, lv_radii[2] * 1.4};
  const Vec3 rv_radii = {0.25 * s, 0.35 * s, 0.40};

  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  std::vector<float> image(n);
  std::vector<std::uint8_t> labels(n);
  std::size_t r = 0;
  for (std::uint32_t ix = 0; ix < nx; ++ix) {
    const double x = axis_coordinate(ix, nx);
    for (std::uint32_t iy = 0; iy < ny; ++iy) {
      const double y = axis_coordinate(iy, ny);
      const double texture = 0.05 * std::sin(4.0 * std::numbers::pi * x) * std::sin(4.0 * std::numbers::pi * y);
      for (std::uint32_t iz = 0; iz < nz; ++iz, ++r) {
        const Vec3 p = {x, y, axis_coordinate(iz, nz)};
        std::uint8_t label = kBackground;
        double value = 0.2 + 0.1 * x;
        if (inside(p, lv_center, lv_radii)) {
          label = kLeftVentricle;
          value = 0.8;
        } else if (inside(p, lv_center, myo_radii)) {
          label = kMyocardium;
          value = 0.5;
        } else if (inside(p, rv_center, rv_radii)) {
          label = kRightVentricle;
          value = 0.8;
        }
        labels[r] = label;
        image[r] = static_cast<float>(std::clamp(value + texture, 0.0, 1.0));
      }
    }
  }
  std::vector<std::uint32_t> dims = {nx, ny, nz};
  return {Volume::intensity(dims, std::move(image)), Volume::label_map(dims, std::move(labels))};
}

}  // namespace nfcl
