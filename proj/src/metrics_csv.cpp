#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "nfcl/errors.hpp"
#include "nfcl/metrics.hpp"

namespace nfcl {

namespace {

constexpr const char* kHeader = "case_id,model,strategy,trained_through_task,eval_target,psnr,ssim,dice_c1,dice_c2,dice_c3";
constexpr std::size_t kDiceColumns = 3;

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? number(*v) : std::string();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line_no) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("metrics line " + std::to_string(line_no) + ": bad number '" + s + "'", 0);
  }
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.case_id << ',' << r.model << ',' << r.strategy << ',' << r.trained_through_task << ',' << r.eval_target
        << ',' << optional_number(r.psnr) << ',' << optional_number(r.ssim);
    for (std::size_t c = 0; c < kDiceColumns; ++c) {
      out << ',';
      if (c < r.dice.size()) out << number(r.dice[c]);
    }
    out << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw FormatError("metrics CSV header mismatch", 0);
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 10) {
      throw FormatError("metrics line " + std::to_string(line_no) + ": expected 10 fields, found " +
                            std::to_string(f.size()),
                        0);
    }
    MetricsRow r;
    r.case_id = f[0];
    r.model = f[1];
    r.strategy = f[2];
    const auto task = parse_optional(f[3], line_no);
    if (!task || *task < 0) throw FormatError("metrics line " + std::to_string(line_no) + ": bad task index", 0);
    r.trained_through_task = static_cast<std::uint32_t>(*task);
    r.eval_target = f[4];
    r.psnr = parse_optional(f[5], line_no);
    r.ssim = parse_optional(f[6], line_no);
    for (std::size_t c = 0; c < kDiceColumns; ++c) {
      if (auto d = parse_optional(f[7 + c], line_no)) r.dice.push_back(*d);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nfcl
