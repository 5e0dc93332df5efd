#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfcl/continual.hpp"
#include "nfcl/metrics.hpp"
#include "nfcl/model.hpp"
#include "nfcl/phantom.hpp"

namespace nfcl {

enum class Experiment : std::uint8_t { DomainExpansion, SignalExpansion };

std::string_view experiment_name(Experiment e);
/// Accepts "domain" and "signal".
Experiment parse_experiment(std::string_view name);

struct ExperimentConfig {
  Experiment experiment = Experiment::DomainExpansion;
  std::vector<std::uint32_t> dims = {32, 32, 8};
  /// Time frames of the domain-expansion sequence, evenly spaced over [-1, 1].
  std::uint32_t frames = 4;
  std::uint32_t cases = 8;
  std::uint64_t seed = 0;
  std::vector<Arch> models = {Arch::PeRelu, Arch::Siren, Arch::Finer, Arch::Diner};
  std::vector<Strategy> strategies = {Strategy::Baseline, Strategy::Distillation};

  std::uint32_t hidden_layers = 3;
  std::uint32_t hidden_width = 64;
  std::uint32_t iterations = 500;
  std::uint32_t batch_coords = 1024;
  /// Overrides the per-architecture learning rate when set.
  std::optional<double> lr;
  double huber_delta = 1.0;
  DistillConfig distill;

  /// When non-empty, metrics.csv plus per-run traces and checkpoints go here.
  std::filesystem::path out_dir;
  bool write_checkpoints = true;
  /// Concurrent (case, model, strategy) runs.
  std::uint32_t jobs = 1;
};

/// Throws ConfigError for empty model/strategy sets and similar mistakes.
void validate(const ExperimentConfig& cfg);

std::string case_id(std::uint32_t case_index);

/// Phantom frames of one case at the sequence's time points, normalized
/// jointly to [0, 1].
std::vector<PhantomFrame> case_frames(const ExperimentConfig& cfg, std::uint32_t case_index);

/// Model configuration a run starts from (identical across strategies).
ModelConfig run_model_config(const ExperimentConfig& cfg, Arch arch, std::uint32_t case_index);
TrainConfig run_train_config(const ExperimentConfig& cfg, Arch arch, std::uint32_t case_index);

/// One frame per task, fitted in time order; after each task every frame
/// seen so far is evaluated (PSNR, SSIM).
std::vector<MetricsRow> run_domain_expansion(const ExperimentConfig& cfg);

/// Image first (Huber, linear head), then the aligned label map on four new
/// softmax channels; the image is evaluated after both tasks and the labels
/// (per-class Dice) after the second.
std::vector<MetricsRow> run_signal_expansion(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment and writes metrics.csv when out_dir is set.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

/// Intensity channel c of a model evaluated on a grid.
Volume predict_intensity(const FieldModel<float>& model, const GridSpec& grid, std::uint32_t channel = 0);
/// Argmax over the model's softmax channels; ties go to the lowest class.
Volume predict_labels(const FieldModel<float>& model, const GridSpec& grid);

}  // namespace nfcl
