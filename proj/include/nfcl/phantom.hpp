#pragma once

#include <cstdint>

#include "nfcl/volume.hpp"

namespace nfcl {

enum Label : std::uint8_t { kBackground = 0, kRightVentricle = 1, kMyocardium = 2, kLeftVentricle = 3 };

struct PhantomOptions {
  /// Per-axis half-width of the uniform jitter applied to each chamber center.
  double jitter = 0.05;
};

struct PhantomFrame {
  Volume image;
  Volume labels;
};

/// Contraction factor over one half beat: 1.0 at t = -1 (end-diastole),
/// 0.7 at t = 1 (end-systole), monotone in between.
double contraction(double t);

/// Deterministic cardiac-like "beating ellipsoid" phantom at time t in [-1, 1]:
/// left-ventricle pool inside a myocardial shell, right-ventricle pool beside
/// it, and a high-frequency texture on top. Labels follow {1 RV, 2 myo, 3 LV}.
PhantomFrame phantom(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz, double t, std::uint64_t case_seed,
                     const PhantomOptions& options = {});

}  // namespace nfcl
