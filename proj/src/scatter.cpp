#include "nfcl/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 80, kRight = 190, kTop = 40, kBottom = 70;

struct Point {
  double sum_x = 0, sum_y = 0;
  std::size_t n = 0;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string colour_of(const std::string& model) {
  if (model == "pe-relu") return "#1f77b4";
  if (model == "siren") return "#d62728";
  if (model == "finer") return "#2ca02c";
  if (model == "diner") return "#9467bd";
  return "#555555";
}

std::string marker(const std::string& strategy, double x, double y, const std::string& colour) {
  if (strategy == "baseline") {
    return "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"6\" fill=\"" + colour + "\" stroke=\"#000\"/>";
  }
  return "<polygon points=\"" + fmt(x) + "," + fmt(y - 7) + " " + fmt(x - 6.5) + "," + fmt(y + 5) + " " + fmt(x + 6.5) +
         "," + fmt(y + 5) + "\" fill=\"" + colour + "\" stroke=\"#000\"/>";
}

std::optional<double> metric_of(const MetricsRow& r, ScatterMetric m) {
  return m == ScatterMetric::Psnr ? r.psnr : r.ssim;
}

}  // namespace

ScatterMetric parse_scatter_metric(std::string_view name) {
  if (name == "psnr") return ScatterMetric::Psnr;
  if (name == "ssim") return ScatterMetric::Ssim;
  throw ConfigError("unknown scatter metric '" + std::string(name) + "' (expected psnr or ssim)");
}

std::string render_scatter_svg(const std::vector<MetricsRow>& rows, ScatterMetric metric) {
  std::uint32_t last_task = 0;
  for (const auto& r : rows) {
    if (r.eval_target.rfind("frame", 0) == 0) last_task = std::max(last_task, r.trained_through_task);
  }
  if (last_task < 2) throw ContractError("scatter needs domain-expansion rows with at least two tasks");
  const std::string first = "frame1";
  const std::string last = "frame" + std::to_string(last_task);

  // (model, strategy) -> case -> (first, last)
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::map<std::string, std::pair<std::optional<double>, std::optional<double>>>> cases;
  for (const auto& r : rows) {
    if (r.trained_through_task != last_task) continue;
    auto& slot = cases[{r.model, r.strategy}][r.case_id];
    if (r.eval_target == first) slot.first = metric_of(r, metric);
    if (r.eval_target == last) slot.second = metric_of(r, metric);
  }
  std::vector<std::string> missing;
  std::map<Key, Point> points;
  for (const auto& [key, per_case] : cases) {
    for (const auto& [cid, pair] : per_case) {
      if (!pair.first || !pair.second) {
        missing.push_back(key.first + "/" + key.second + "/" + cid);
        continue;
      }
      auto& p = points[key];
      p.sum_x += *pair.first;
      p.sum_y += *pair.second;
      ++p.n;
    }
  }
  if (!missing.empty()) {
    std::string msg = "rows lack " + first + " or " + last + " values:";
    for (const auto& m : missing) msg += " " + m;
    throw ContractError(msg);
  }

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [key, p] : points) {
    for (double v : {p.sum_x / p.n, p.sum_y / p.n}) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double pad = std::max(1e-3, 0.08 * (hi - lo));
  lo -= pad;
  hi += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - lo) / (hi - lo) * pw; };
  auto sy = [&](double v) { return kTop + ph - (v - lo) / (hi - lo) * ph; };

  const bool is_psnr = metric == ScatterMetric::Psnr;
  const std::string name = is_psnr ? "PSNR (dB)" : "SSIM (unitless)";
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#000\"/>\n";
  // Parity line: points above it kept the last frame better than the first.
  svg << "<line x1=\"" << fmt(sx(lo)) << "\" y1=\"" << fmt(sy(lo)) << "\" x2=\"" << fmt(sx(hi)) << "\" y2=\""
      << fmt(sy(hi)) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const std::string label = is_psnr ? fmt(v) : fmt(v).substr(0, 5);
    svg << "<text x=\"" << fmt(sx(v)) << "\" y=\"" << fmt(kTop + ph + 16) << "\" text-anchor=\"middle\">" << label
        << "</text>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">" << label
        << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 24)
      << "\" text-anchor=\"middle\">first frame " << name << "</text>\n";
  svg << "<text transform=\"translate(20," << fmt(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">frame "
      << last_task << " " << name << "</text>\n";
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\">after task " << last_task
      << ", mean over cases</text>\n";

  double ly = kTop + 10;
  const double lx = kWidth - kRight + 20;
  for (const auto& [key, p] : points) {
    const std::string colour = colour_of(key.first);
    svg << marker(key.second, sx(p.sum_x / p.n), sy(p.sum_y / p.n), colour) << "\n";
    svg << marker(key.second, lx, ly, colour) << "\n";
    svg << "<text x=\"" << fmt(lx + 14) << "\" y=\"" << fmt(ly + 4) << "\">" << key.first << " " << key.second
        << "</text>\n";
    ly += 22;
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_scatter(const std::vector<MetricsRow>& rows, ScatterMetric metric, const std::filesystem::path& path) {
  const std::string svg = render_scatter_svg(rows, metric);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << svg;
  if (!out) throw FormatError("failed writing " + path.string(), 0);
}

}  // namespace nfcl
