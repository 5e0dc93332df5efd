#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nfcl/metrics.hpp"

namespace nfcl {

enum class ScatterMetric { Psnr, Ssim };

ScatterMetric parse_scatter_metric(std::string_view name);

/// First-frame vs last-frame quality after the final task, one marker per
/// (model, strategy) averaged over cases. Strategies get distinct marker
/// shapes, models distinct colours.
std::string render_scatter_svg(const std::vector<MetricsRow>& rows, ScatterMetric metric);
void render_scatter(const std::vector<MetricsRow>& rows, ScatterMetric metric, const std::filesystem::path& path);

}  // namespace nfcl
