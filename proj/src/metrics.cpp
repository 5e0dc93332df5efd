#include "nfcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

void require_same_grid(const Volume& a, const Volume& b) {
  if (a.dims != b.dims || a.channels != b.channels) throw DimensionError("volumes have different shapes");
}

void require_intensity(const Volume& a, const Volume& b) {
  if (a.kind != VolumeKind::Intensity || b.kind != VolumeKind::Intensity) {
    throw ContractError("image metrics need intensity volumes");
  }
  require_same_grid(a, b);
}

// Summed-area table with a zero border: s(i+1, j+1) = sum over [0..i] x [0..j].
class Integral {
 public:
  Integral(std::size_t rows, std::size_t cols) : cols_(cols + 1), sums_((rows + 1) * (cols + 1), 0.0) {}

  template <class F>
  void build(std::size_t rows, std::size_t cols, F&& value) {
    for (std::size_t i = 0; i < rows; ++i) {
      double run = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        run += value(i, j);
        at(i + 1, j + 1) = at(i, j + 1) + run;
      }
    }
  }
  double box(std::size_t i, std::size_t j, std::size_t k) const {
    return at(i + k, j + k) - at(i, j + k) - at(i + k, j) + at(i, j);
  }

 private:
  double& at(std::size_t i, std::size_t j) { return sums_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return sums_[i * cols_ + j]; }
  std::size_t cols_;
  std::vector<double> sums_;
};

}  // namespace

double psnr(const Volume& pred, const Volume& ref, double data_range) {
  require_intensity(pred, ref);
  if (!(data_range > 0.0)) throw ContractError("data range must be positive");
  const std::size_t n = pred.intensities.size();
  if (n == 0) throw ContractError("psnr of an empty volume");
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.intensities[i]) - static_cast<double>(ref.intensities[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(n);
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Volume& pred, const Volume& ref) {
  require_intensity(pred, ref);
  if (pred.dims.size() < 2) throw ContractError("ssim needs at least two spatial axes");
  const std::size_t nx = pred.dims[0];
  const std::size_t ny = pred.dims[1];
  if (nx < kSsimWindow || ny < kSsimWindow) {
    throw ContractError("ssim needs at least 7 voxels per in-plane axis, got " + std::to_string(nx) + "x" +
                        std::to_string(ny));
  }
  std::size_t depth = 1;
  for (std::size_t a = 2; a < pred.dims.size(); ++a) depth *= pred.dims[a];
  const std::size_t channels = pred.channels;
  const std::size_t slices = depth * channels;

  constexpr double range = 1.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const double n = kSsimWindow * kSsimWindow;
  const double cov_norm = n / (n - 1.0);
  const std::size_t wx = nx - kSsimWindow + 1;
  const std::size_t wy = ny - kSsimWindow + 1;

  std::vector<double> per_slice(slices);
#pragma omp parallel for schedule(static) if (slices * nx * ny > (1u << 15))
  for (std::size_t s = 0; s < slices; ++s) {
    // Voxel (i, j) of slice s; the slice index runs over trailing axes and channels.
    auto at = [&](const Volume& v, std::size_t i, std::size_t j) {
      return static_cast<double>(v.intensities[(i * ny + j) * slices + s]);
    };
    Integral sx(nx, ny), sy(nx, ny), sxx(nx, ny), syy(nx, ny), sxy(nx, ny);
    sx.build(nx, ny, [&](std::size_t i, std::size_t j) { return at(pred, i, j); });
    sy.build(nx, ny, [&](std::size_t i, std::size_t j) { return at(ref, i, j); });
    sxx.build(nx, ny, [&](std::size_t i, std::size_t j) { return at(pred, i, j) * at(pred, i, j); });
    syy.build(nx, ny, [&](std::size_t i, std::size_t j) { return at(ref, i, j) * at(ref, i, j); });
    sxy.build(nx, ny, [&](std::size_t i, std::size_t j) { return at(pred, i, j) * at(ref, i, j); });
    double total = 0.0;
    for (std::size_t i = 0; i < wx; ++i) {
      for (std::size_t j = 0; j < wy; ++j) {
        const double ux = sx.box(i, j, kSsimWindow) / n;
        const double uy = sy.box(i, j, kSsimWindow) / n;
        const double vx = cov_norm * (sxx.box(i, j, kSsimWindow) / n - ux * ux);
        const double vy = cov_norm * (syy.box(i, j, kSsimWindow) / n - uy * uy);
        const double vxy = cov_norm * (sxy.box(i, j, kSsimWindow) / n - ux * uy);
        total += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
      }
    }
    per_slice[s] = total / static_cast<double>(wx * wy);
  }
  double mean = 0.0;
  for (double v : per_slice) mean += v;
  return std::clamp(mean / static_cast<double>(slices), -1.0, 1.0);
}

double dice(const Volume& pred_labels, const Volume& gt_labels, std::uint8_t c) {
  if (pred_labels.kind != VolumeKind::Labels || gt_labels.kind != VolumeKind::Labels) {
    throw ContractError("dice needs label volumes");
  }
  require_same_grid(pred_labels, gt_labels);
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred_labels.labels.size(); ++i) {
    const bool in_p = pred_labels.labels[i] == c;
    const bool in_g = gt_labels.labels[i] == c;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<SummaryRow> aggregate(const std::vector<MetricsRow>& rows) {
  struct Acc {
    std::size_t count = 0;
    std::size_t psnr_n = 0, ssim_n = 0, dice_n = 0;
    double psnr = 0.0, ssim = 0.0;
    std::vector<double> dice;
  };
  using Key = std::tuple<std::string, std::string, std::uint32_t, std::string>;
  std::map<Key, Acc> groups;
  for (const auto& r : rows) {
    Acc& a = groups[Key{r.model, r.strategy, r.trained_through_task, r.eval_target}];
    ++a.count;
    if (r.psnr) {
      a.psnr += *r.psnr;
      ++a.psnr_n;
    }
    if (r.ssim) {
      a.ssim += *r.ssim;
      ++a.ssim_n;
    }
    if (!r.dice.empty()) {
      if (a.dice.size() < r.dice.size()) a.dice.resize(r.dice.size(), 0.0);
      for (std::size_t c = 0; c < r.dice.size(); ++c) a.dice[c] += r.dice[c];
      ++a.dice_n;
    }
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (auto& [key, a] : groups) {
    SummaryRow s;
    std::tie(s.model, s.strategy, s.trained_through_task, s.eval_target) = key;
    s.count = a.count;
    if (a.psnr_n) s.psnr = a.psnr / static_cast<double>(a.psnr_n);
    if (a.ssim_n) s.ssim = a.ssim / static_cast<double>(a.ssim_n);
    if (a.dice_n) {
      for (double d : a.dice) s.dice.push_back(d / static_cast<double>(a.dice_n));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace nfcl
