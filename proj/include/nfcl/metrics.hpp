#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nfcl/volume.hpp"

namespace nfcl {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(range^2 / MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const Volume& pred, const Volume& ref, double data_range = 1.0);

/// Mean 2D SSIM over axial slices (last axis fixed) with a 7x7 uniform
/// window, sample covariance and C1 = (0.01 R)^2, C2 = (0.03 R)^2, R = 1.
/// Only windows fully inside a slice contribute.
double ssim(const Volume& pred, const Volume& ref);

inline constexpr std::uint32_t kSsimWindow = 7;

/// 2|P n G| / (|P| + |G|) over voxels labelled c; 1 when both are empty.
double dice(const Volume& pred_labels, const Volume& gt_labels, std::uint8_t c);

struct MetricsRow {
  std::string case_id;
  std::string model;
  std::string strategy;
  std::uint32_t trained_through_task = 0;
  std::string eval_target;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::vector<double> dice;  // classes 1..3, empty when not evaluated
};

struct SummaryRow {
  std::string model;
  std::string strategy;
  std::uint32_t trained_through_task = 0;
  std::string eval_target;
  std::size_t count = 0;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::vector<double> dice;
};

/// Mean per (model, strategy, trained_through_task, eval_target), ordered by
/// that key.
std::vector<SummaryRow> aggregate(const std::vector<MetricsRow>& rows);

/// Header: case_id,model,strategy,trained_through_task,eval_target,psnr,ssim,dice_c1,dice_c2,dice_c3
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace nfcl
