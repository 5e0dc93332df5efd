#include "nfcl/experiment.hpp"

#include <cstdio>
#include <exception>
#include <fstream>

#include "nfcl/checkpoint.hpp"
#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

constexpr std::uint32_t kClasses = 4;  // background, RV, myocardium, LV

std::uint64_t mix(std::uint64_t base, std::uint32_t a, std::uint32_t b) {
  return task_seed(task_seed(base, a), b);
}

struct RunUnit {
  std::uint32_t case_index;
  Arch arch;
  Strategy strategy;
};

std::string run_label(const RunUnit& u) {
  return case_id(u.case_index) + "/" + std::string(arch_name(u.arch)) + "/" + std::string(strategy_name(u.strategy));
}

std::filesystem::path run_dir(const ExperimentConfig& cfg, const RunUnit& u) {
  return cfg.out_dir / "runs" /
         (case_id(u.case_index) + "_" + std::string(arch_name(u.arch)) + "_" + std::string(strategy_name(u.strategy)));
}

MetricsRow base_row(const RunUnit& u, std::uint32_t task, std::string target) {
  MetricsRow r;
  r.case_id = case_id(u.case_index);
  r.model = std::string(arch_name(u.arch));
  r.strategy = std::string(strategy_name(u.strategy));
  r.trained_through_task = task;
  r.eval_target = std::move(target);
  return r;
}

// Writes the trace and checkpoint of a finished task.
void persist(const ExperimentConfig& cfg, const RunUnit& u, std::uint32_t task_id, const FieldModel<float>& model,
             const FitTrace& trace) {
  if (cfg.out_dir.empty()) return;
  const auto dir = run_dir(cfg, u);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / ("trace_task" + std::to_string(task_id) + ".csv"));
  write_trace_csv(trace, out);
  if (cfg.write_checkpoints) save_checkpoint(model, dir / ("ckpt_task" + std::to_string(task_id) + ".bin"));
}

std::vector<MetricsRow> run_domain_unit(const ExperimentConfig& cfg, const RunUnit& u,
                                        const std::vector<PhantomFrame>& frames) {
  std::vector<Task> tasks;
  for (std::uint32_t f = 0; f < frames.size(); ++f) {
    Task t;
    t.id = f + 1;
    t.kind = TaskKind::DomainFrame;
    t.grid = GridSpec{cfg.dims, TimeAxis{cfg.frames, f}};
    t.target = frames[f].image;
    t.loss = LossKind::Huber;
    t.channels = {0, 1};
    tasks.push_back(std::move(t));
  }
  const ModelConfig mc = run_model_config(cfg, u.arch, u.case_index);
  FieldModel<float> model = build_model<float>(mc, &tasks.front().grid);

  std::vector<MetricsRow> rows;
  auto evaluate = [&](std::size_t k, const FieldModel<float>& m, const FitTrace& trace) {
    persist(cfg, u, tasks[k].id, m, trace);
    for (std::size_t f = 0; f <= k; ++f) {
      const Volume pred = predict_intensity(m, tasks[f].grid);
      MetricsRow r = base_row(u, tasks[k].id, "frame" + std::to_string(f + 1));
      r.psnr = psnr(pred, tasks[f].target);
      r.ssim = ssim(pred, tasks[f].target);
      rows.push_back(std::move(r));
    }
  };
  continual_fit<float>(model, tasks, u.strategy, run_train_config(cfg, u.arch, u.case_index), cfg.distill, evaluate);
  return rows;
}

std::vector<MetricsRow> run_signal_unit(const ExperimentConfig& cfg, const RunUnit& u, const PhantomFrame& frame) {
  const GridSpec grid{cfg.dims, std::nullopt};
  std::vector<Task> tasks(2);
  tasks[0].id = 1;
  tasks[0].kind = TaskKind::SignalLayer;
  tasks[0].grid = grid;
  tasks[0].target = frame.image;
  tasks[0].loss = LossKind::Huber;
  tasks[0].channels = {0, 1};
  tasks[1].id = 2;
  tasks[1].kind = TaskKind::SignalLayer;
  tasks[1].grid = grid;
  tasks[1].target = frame.labels;
  tasks[1].loss = LossKind::CrossEntropy;
  tasks[1].channels = {1, 1 + kClasses};

  const ModelConfig mc = run_model_config(cfg, u.arch, u.case_index);
  FieldModel<float> model = build_model<float>(mc, &grid);

  std::vector<MetricsRow> rows;
  auto evaluate = [&](std::size_t k, const FieldModel<float>& m, const FitTrace& trace) {
    persist(cfg, u, tasks[k].id, m, trace);
    const Volume pred = predict_intensity(m, grid);
    MetricsRow image = base_row(u, tasks[k].id, "image");
    image.psnr = psnr(pred, frame.image);
    image.ssim = ssim(pred, frame.image);
    rows.push_back(std::move(image));
    if (k >= 1) {
      const Volume labels = predict_labels(m, grid);
      MetricsRow mask = base_row(u, tasks[k].id, "mask");
      for (std::uint8_t c = 1; c < kClasses; ++c) mask.dice.push_back(dice(labels, frame.labels, c));
      rows.push_back(std::move(mask));
    }
  };
  continual_fit<float>(model, tasks, u.strategy, run_train_config(cfg, u.arch, u.case_index), cfg.distill, evaluate);
  return rows;
}

}  // namespace

std::string_view experiment_name(Experiment e) {
  return e == Experiment::DomainExpansion ? "domain" : "signal";
}

Experiment parse_experiment(std::string_view name) {
  if (name == "domain") return Experiment::DomainExpansion;
  if (name == "signal") return Experiment::SignalExpansion;
  throw ConfigError("unknown experiment '" + std::string(name) + "' (expected domain or signal)");
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.models.empty()) throw ConfigError("no models selected");
  if (cfg.strategies.empty()) throw ConfigError("no strategies selected");
  if (cfg.cases == 0) throw ConfigError("at least one case is required");
  if (cfg.dims.size() != 3) throw ConfigError("phantom grids are three-dimensional (AxBxC)");
  for (auto d : cfg.dims) {
    if (d < 2) throw ConfigError("grid axes need at least 2 points");
  }
  if (cfg.frames == 0) throw ConfigError("at least one frame is required");
  if (cfg.batch_coords == 0) throw ConfigError("batch size must be positive");
  if (cfg.hidden_width == 0 || cfg.hidden_layers == 0) throw ConfigError("network must have hidden units");
  if (!(cfg.distill.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (cfg.lr && !(*cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

std::string case_id(std::uint32_t case_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case%02u", case_index);
  return buf;
}

std::vector<PhantomFrame> case_frames(const ExperimentConfig& cfg, std::uint32_t case_index) {
  const std::uint64_t seed = cfg.seed + case_index;
  std::vector<PhantomFrame> frames;
  const std::uint32_t count = cfg.experiment == Experiment::DomainExpansion ? cfg.frames : 1;
  for (std::uint32_t f = 0; f < count; ++f) {
    const double t = TimeAxis{count, f}.value();
    frames.push_back(phantom(cfg.dims[0], cfg.dims[1], cfg.dims[2], t, seed));
  }
  std::vector<Volume> images;
  for (auto& fr : frames) images.push_back(std::move(fr.image));
  normalize_intensity(images);
  for (std::size_t f = 0; f < frames.size(); ++f) frames[f].image = std::move(images[f]);
  return frames;
}

ModelConfig run_model_config(const ExperimentConfig& cfg, Arch arch, std::uint32_t case_index) {
  const std::uint32_t in_dim = cfg.experiment == Experiment::DomainExpansion ? 4 : 3;
  ModelConfig mc = ModelConfig::defaults(arch, in_dim, 1);
  mc.hidden_layers = cfg.hidden_layers;
  mc.hidden_width = cfg.hidden_width;
  mc.seed = mix(cfg.seed, case_index, static_cast<std::uint32_t>(arch));
  return mc;
}

TrainConfig run_train_config(const ExperimentConfig& cfg, Arch arch, std::uint32_t case_index) {
  TrainConfig tc;
  tc.iterations = cfg.iterations;
  tc.lr = cfg.lr.value_or(TrainConfig::default_lr(arch));
  tc.batch_coords = cfg.batch_coords;
  tc.huber_delta = cfg.huber_delta;
  tc.seed = mix(cfg.seed ^ 0xf17ULL, case_index, static_cast<std::uint32_t>(arch));
  return tc;
}

Volume predict_intensity(const FieldModel<float>& model, const GridSpec& grid, std::uint32_t channel) {
  if (channel >= model.config().linear_count()) throw ContractError("channel is not a linear output");
  const Tensor<float> out = model.forward(make_grid<float>(grid));
  std::vector<float> values(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) values[i] = out(i, channel);
  return Volume::intensity(grid.dims, std::move(values));
}

Volume predict_labels(const FieldModel<float>& model, const GridSpec& grid) {
  const std::uint32_t begin = model.config().class_begin();
  const std::uint32_t end = model.config().out_channels;
  if (begin >= end) throw ContractError("model has no class channels");
  const Tensor<float> out = model.forward(make_grid<float>(grid));
  std::vector<std::uint8_t> labels(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::uint32_t best = begin;
    for (std::uint32_t c = begin + 1; c < end; ++c) {
      if (out(i, c) > out(i, best)) best = c;
    }
    labels[i] = static_cast<std::uint8_t>(best - begin);
  }
  return Volume::label_map(grid.dims, std::move(labels));
}

namespace {

std::vector<MetricsRow> run_units(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<RunUnit> units;
  for (std::uint32_t c = 0; c < cfg.cases; ++c) {
    for (Arch a : cfg.models) {
      for (Strategy s : cfg.strategies) units.push_back({c, a, s});
    }
  }
  std::vector<std::vector<PhantomFrame>> data(cfg.cases);
  for (std::uint32_t c = 0; c < cfg.cases; ++c) data[c] = case_frames(cfg, c);

  std::vector<std::vector<MetricsRow>> results(units.size());
  std::exception_ptr failure;
  const int jobs = static_cast<int>(std::max<std::uint32_t>(1, cfg.jobs));
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (std::size_t i = 0; i < units.size(); ++i) {
    bool skip = false;
#pragma omp critical(nfcl_experiment_failure)
    skip = static_cast<bool>(failure);
    if (skip) continue;
    const RunUnit& u = units[i];
    try {
      results[i] = cfg.experiment == Experiment::DomainExpansion ? run_domain_unit(cfg, u, data[u.case_index])
                                                                  : run_signal_unit(cfg, u, data[u.case_index][0]);
    } catch (Error& e) {
      e.add_context(run_label(u));
#pragma omp critical(nfcl_experiment_failure)
      if (!failure) failure = std::current_exception();
    } catch (...) {
#pragma omp critical(nfcl_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricsRow> rows;
  for (auto& r : results) rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  return rows;
}

}  // namespace

std::vector<MetricsRow> run_domain_expansion(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::DomainExpansion;
  return run_units(c);
}

std::vector<MetricsRow> run_signal_expansion(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment = Experiment::SignalExpansion;
  return run_units(c);
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  auto rows = cfg.experiment == Experiment::DomainExpansion ? run_domain_expansion(cfg) : run_signal_expansion(cfg);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "metrics.csv");
    write_metrics_csv(rows, out);
    if (!out) throw FormatError("failed writing metrics.csv", 0);
  }
  return rows;
}

}  // namespace nfcl
