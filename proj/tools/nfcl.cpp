// Command-line front end: phantom generation, single-volume fitting,
// continual experiments, metric evaluation and scatter reports.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nfcl/checkpoint.hpp"
#include "nfcl/errors.hpp"
#include "nfcl/experiment.hpp"
#include "nfcl/metrics.hpp"
#include "nfcl/phantom.hpp"
#include "nfcl/runtime.hpp"
#include "nfcl/scatter.hpp"
#include "nfcl/trainer.hpp"
#include "nfcl/volume.hpp"

namespace {

using namespace nfcl;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

std::vector<std::uint32_t> parse_dims(const std::string& text) {
  std::vector<std::uint32_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(part, &used);
      if (used != part.size() || v == 0) throw std::invalid_argument(part);
      dims.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::logic_error&) {
      throw ConfigError("bad dims '" + text + "' (expected AxBxC)");
    }
  }
  if (dims.size() != 3) throw ConfigError("bad dims '" + text + "' (expected AxBxC)");
  return dims;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Turns a JSON object into command-line tokens for `sub`; they go before the
// user's own flags so the latter win.
std::vector<std::string> config_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string(), 0);
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what(), 0);
  }
  if (!cfg.is_object()) throw FormatError("config " + path.string() + " is not a JSON object", 0);
  std::vector<std::string> tokens;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else {
      tokens.push_back(flag);
      tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return tokens;
}

int cmd_phantom(const std::string& dims_text, std::uint32_t frames, std::uint32_t cases, std::uint64_t seed,
                const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.dims = parse_dims(dims_text);
  cfg.frames = frames;
  cfg.cases = cases;
  cfg.seed = seed;
  validate(cfg);
  for (std::uint32_t c = 0; c < cases; ++c) {
    const auto dir = out / case_id(c);
    std::filesystem::create_directories(dir);
    const auto case_data = case_frames(cfg, c);
    for (std::size_t f = 0; f < case_data.size(); ++f) {
      const std::string stem = "frame" + std::to_string(f + 1);
      save_volume(case_data[f].image, dir / (stem + "_image.nfv"));
      save_volume(case_data[f].labels, dir / (stem + "_labels.nfv"));
    }
  }
  std::printf("wrote %u cases x %u frames to %s\n", cases, frames, out.string().c_str());
  return kOk;
}

struct FitArgs {
  std::string model = "siren";
  std::filesystem::path volume;
  std::uint32_t iters = 500;
  std::optional<double> lr;
  std::uint64_t seed = 0;
  std::uint32_t width = 256;
  std::uint32_t layers = 3;
  std::uint32_t batch = 4096;
  std::filesystem::path out;
  std::filesystem::path pred_out;
  std::filesystem::path trace_out;
};

int cmd_fit(const FitArgs& a) {
  const Volume target = load_volume(a.volume);
  if (target.kind != VolumeKind::Intensity || target.channels != 1) {
    throw FormatError(a.volume.string() + ": expected a single-channel intensity volume", 0);
  }
  if (target.dims.size() != 3) throw FormatError(a.volume.string() + ": expected a 3D volume", 0);
  const Arch arch = parse_arch(a.model);
  Task task;
  task.grid = GridSpec{target.dims, std::nullopt};
  task.target = target;
  ModelConfig mc = ModelConfig::defaults(arch, 3, 1);
  mc.hidden_width = a.width;
  mc.hidden_layers = a.layers;
  mc.seed = a.seed;
  FieldModel<float> model = build_model<float>(mc, &task.grid);
  TrainConfig tc;
  tc.iterations = a.iters;
  tc.lr = a.lr.value_or(TrainConfig::default_lr(arch));
  tc.batch_coords = a.batch;
  tc.seed = a.seed;

  const auto start = std::chrono::steady_clock::now();
  const FitTrace trace = fit_task(model, task, tc);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Volume pred = predict_intensity(model, task.grid);
  std::printf("psnr=%.6f\nssim=%.6f\nseconds=%.3f\n", psnr(pred, target), ssim(pred, target), seconds);
  if (!a.out.empty()) save_checkpoint(model, a.out);
  if (!a.pred_out.empty()) save_volume(pred, a.pred_out);
  if (!a.trace_out.empty()) {
    std::ofstream out(a.trace_out);
    write_trace_csv(trace, out);
  }
  return kOk;
}

struct ContinualArgs {
  std::string experiment = "domain";
  std::string models = "pe-relu,siren,finer,diner";
  std::string strategies = "baseline,distillation";
  double lambda = 1.0;
  std::uint32_t cases = 8;
  std::string dims = "32x32x8";
  std::uint32_t frames = 4;
  std::uint64_t seed = 0;
  std::uint32_t iters = 500;
  std::uint32_t width = 64;
  std::uint32_t layers = 3;
  std::uint32_t batch = 1024;
  std::optional<double> lr;
  std::uint32_t jobs = 1;
  bool no_checkpoints = false;
  std::filesystem::path out;
};

int cmd_continual(const ContinualArgs& a) {
  ExperimentConfig cfg;
  cfg.experiment = parse_experiment(a.experiment);
  cfg.models.clear();
  for (const auto& m : split_list(a.models)) cfg.models.push_back(parse_arch(m));
  cfg.strategies.clear();
  for (const auto& s : split_list(a.strategies)) cfg.strategies.push_back(parse_strategy(s));
  cfg.distill.lambda = a.lambda;
  cfg.cases = a.cases;
  cfg.dims = parse_dims(a.dims);
  cfg.frames = a.frames;
  cfg.seed = a.seed;
  cfg.iterations = a.iters;
  cfg.hidden_width = a.width;
  cfg.hidden_layers = a.layers;
  cfg.batch_coords = a.batch;
  cfg.lr = a.lr;
  cfg.jobs = a.jobs;
  cfg.write_checkpoints = !a.no_checkpoints;
  cfg.out_dir = a.out;
  validate(cfg);

  const auto start = std::chrono::steady_clock::now();
  const auto rows = run_experiment(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (cfg.experiment == Experiment::DomainExpansion && cfg.frames >= 2) {
    render_scatter(rows, ScatterMetric::Psnr, cfg.out_dir / "scatter_psnr.svg");
    render_scatter(rows, ScatterMetric::Ssim, cfg.out_dir / "scatter_ssim.svg");
  }
  for (const auto& s : aggregate(rows)) {
    std::printf("%-8s %-12s task%u %-6s", s.model.c_str(), s.strategy.c_str(), s.trained_through_task,
                s.eval_target.c_str());
    if (s.psnr) std::printf(" psnr=%.3f", *s.psnr);
    if (s.ssim) std::printf(" ssim=%.4f", *s.ssim);
    for (std::size_t c = 0; c < s.dice.size(); ++c) std::printf(" dice_c%zu=%.4f", c + 1, s.dice[c]);
    std::printf("\n");
  }
  std::fprintf(stderr, "%zu rows in %.1f s\n", rows.size(), seconds);
  return kOk;
}

int cmd_eval(const std::filesystem::path& pred_path, const std::filesystem::path& ref_path, bool labels) {
  const Volume pred = load_volume(pred_path);
  const Volume ref = load_volume(ref_path);
  if (labels) {
    std::uint8_t top = 0;
    for (auto v : ref.labels) top = std::max(top, v);
    for (std::uint8_t c = 1; c <= top; ++c) std::printf("dice_c%u=%.6f\n", c, dice(pred, ref, c));
  } else {
    std::printf("psnr=%.6f\nssim=%.6f\n", psnr(pred, ref), ssim(pred, ref));
  }
  return kOk;
}

int cmd_report(const std::filesystem::path& metrics, const std::string& metric, const std::filesystem::path& out) {
  std::ifstream in(metrics);
  if (!in) throw FormatError("cannot open " + metrics.string(), 0);
  std::vector<MetricsRow> rows;
  try {
    rows = read_metrics_csv(in);
  } catch (Error& e) {
    e.add_context(metrics.string());
    throw;
  }
  render_scatter(rows, parse_scatter_metric(metric), out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Continual-learning neural fields on a synthetic cardiac phantom"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::filesystem::path config_path;
  app.add_option("--config", config_path, "JSON file whose keys mirror the subcommand's flags");

  std::string dims = "32x32x8";
  std::uint32_t frames = 4, cases = 8;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  auto* phantom_cmd = app.add_subcommand("phantom", "Write phantom volumes and label maps as NFV files");
  phantom_cmd->add_option("--dims", dims, "Grid size AxBxC")->capture_default_str();
  phantom_cmd->add_option("--frames", frames)->capture_default_str();
  phantom_cmd->add_option("--cases", cases)->capture_default_str();
  phantom_cmd->add_option("--seed", seed)->capture_default_str();
  phantom_cmd->add_option("--out", out, "Output directory")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one intensity volume");
  fit_cmd->add_option("--model", fit.model, "pe-relu, siren, finer or diner")->capture_default_str();
  fit_cmd->add_option("--volume", fit.volume, "NFV intensity volume")->required();
  fit_cmd->add_option("--iters", fit.iters)->capture_default_str();
  fit_cmd->add_option("--lr", fit.lr, "Adam learning rate (default: per architecture)");
  fit_cmd->add_option("--seed", fit.seed)->capture_default_str();
  fit_cmd->add_option("--width", fit.width, "Hidden units per layer")->capture_default_str();
  fit_cmd->add_option("--layers", fit.layers, "Hidden layers")->capture_default_str();
  fit_cmd->add_option("--batch", fit.batch, "Coordinates per iteration")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Checkpoint path");
  fit_cmd->add_option("--pred-out", fit.pred_out, "Write the fitted volume as NFV");
  fit_cmd->add_option("--trace-out", fit.trace_out, "Write the loss trace as CSV");

  ContinualArgs cont;
  auto* cont_cmd = app.add_subcommand("continual", "Run a continual experiment over phantom cases");
  cont_cmd->add_option("--experiment", cont.experiment, "domain or signal")->capture_default_str();
  cont_cmd->add_option("--models", cont.models, "Comma-separated architectures")->capture_default_str();
  cont_cmd->add_option("--strategies", cont.strategies, "Comma-separated strategies")->capture_default_str();
  cont_cmd->add_option("--lambda", cont.lambda, "Distillation weight")->capture_default_str();
  cont_cmd->add_option("--cases", cont.cases)->capture_default_str();
  cont_cmd->add_option("--dims", cont.dims, "Grid size AxBxC")->capture_default_str();
  cont_cmd->add_option("--frames", cont.frames, "Frames of the domain sequence")->capture_default_str();
  cont_cmd->add_option("--seed", cont.seed)->capture_default_str();
  cont_cmd->add_option("--iters", cont.iters, "Iterations per task")->capture_default_str();
  cont_cmd->add_option("--width", cont.width, "Hidden units per layer")->capture_default_str();
  cont_cmd->add_option("--layers", cont.layers, "Hidden layers")->capture_default_str();
  cont_cmd->add_option("--batch", cont.batch, "Coordinates per iteration")->capture_default_str();
  cont_cmd->add_option("--lr", cont.lr, "Adam learning rate (default: per architecture)");
  cont_cmd->add_option("--jobs", cont.jobs, "Concurrent runs")->capture_default_str();
  cont_cmd->add_flag("--no-checkpoints", cont.no_checkpoints, "Skip per-task checkpoints");
  cont_cmd->add_option("--out", cont.out, "Output directory")->required();

  std::filesystem::path pred, ref;
  bool labels = false;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two NFV volumes");
  eval_cmd->add_option("--pred", pred)->required();
  eval_cmd->add_option("--ref", ref)->required();
  eval_cmd->add_flag("--labels", labels, "Per-class Dice instead of PSNR/SSIM");

  std::filesystem::path metrics_path;
  std::string metric = "psnr";
  auto* report_cmd = app.add_subcommand("report", "Render a first/last-frame scatter plot from metrics.csv");
  report_cmd->add_option("--metrics", metrics_path)->required();
  report_cmd->add_option("--metric", metric, "psnr or ssim")->capture_default_str();
  report_cmd->add_option("--out", out, "SVG path")->required();

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] != "--config") continue;
      // Config keys belong to the subcommand; splice them right after its name.
      auto tokens = config_tokens(args[i + 1]);
      auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& s) {
        return s == "phantom" || s == "fit" || s == "continual" || s == "eval" || s == "report";
      });
      if (sub != args.end()) args.insert(sub + 1, tokens.begin(), tokens.end());
      break;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*phantom_cmd) return cmd_phantom(dims, frames, cases, seed, out);
    if (*fit_cmd) return cmd_fit(fit);
    if (*cont_cmd) return cmd_continual(cont);
    if (*eval_cmd) return cmd_eval(pred, ref, labels);
    if (*report_cmd) return cmd_report(metrics_path, metric, out);
  } catch (const TrainingDivergedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
