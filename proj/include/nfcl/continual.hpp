#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "nfcl/model.hpp"
#include "nfcl/task.hpp"
#include "nfcl/trainer.hpp"

namespace nfcl {

enum class Strategy : std::uint8_t { Baseline, Distillation };

std::string_view strategy_name(Strategy s);
/// Accepts "baseline" and "distillation".
Strategy parse_strategy(std::string_view name);

struct DistillConfig {
  double lambda = 1.0;
  /// Distillation coordinates per iteration; 0 means "same as the fit batch".
  std::uint32_t n_distil = 0;
  /// Seed of the distillation stream, independent of the fitting stream.
  std::uint64_t rng_stream = 0x5eed;
};

/// Frozen copy of a model taken at a task boundary.
template <class T>
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const FieldModel<T>& model) : model_(std::make_shared<const FieldModel<T>>(model)) {}

  const FieldModel<T>& model() const noexcept { return *model_; }
  std::uint32_t channels() const noexcept { return model_->config().out_channels; }

 private:
  std::shared_ptr<const FieldModel<T>> model_;
};

template <class T>
TeacherSnapshot<T> snapshot_teacher(const FieldModel<T>& model) {
  return TeacherSnapshot<T>(model);
}

/// Uniform sampler over the union of prior task grids. Identical grids are
/// counted once, so every distinct grid point is equally likely.
template <class T>
class DistillSampler {
 public:
  explicit DistillSampler(std::span<const Task> prior_tasks);

  std::size_t domain_size() const noexcept { return domain_.rows(); }
  const Tensor<T>& domain() const noexcept { return domain_; }

  /// n grid-aligned coordinates, without replacement while n does not
  /// exceed the domain; larger requests cycle through fresh permutations.
  Tensor<T> sample(std::size_t n, std::mt19937_64& rng);

 private:
  Tensor<T> domain_;
  std::vector<std::uint32_t> order_;
};

template <class T>
Tensor<T> sample_distill_coords(std::span<const Task> prior_tasks, std::size_t n, std::mt19937_64& rng) {
  DistillSampler<T> sampler(prior_tasks);
  return sampler.sample(n, rng);
}

/// Teacher outputs (post-head) on the given coordinates, restricted to the
/// channels the teacher had when it was frozen.
template <class T>
Tensor<T> distill_targets(const TeacherSnapshot<T>& teacher, const Tensor<T>& coords);

/// Unweighted distillation loss of the student against teacher targets:
/// Huber over the teacher's linear channels plus cross-entropy against the
/// teacher's soft class probabilities.
template <class T>
Var distill_loss(Graph<T>& graph, const FieldModel<T>& student, const TeacherSnapshot<T>& teacher,
                 const Tensor<T>& coords, const Tensor<T>& targets, T huber_delta);

/// Seed of the fitting stream for one task of a sequence.
std::uint64_t task_seed(std::uint64_t base, std::uint32_t task_id);

template <class T>
using TaskCallback = std::function<void(std::size_t task_index, const FieldModel<T>& model, const FitTrace& trace)>;

/// Grows the model to what a task needs: output channels for a task that
/// supervises channels beyond the head, table rows for new DINER coordinates.
template <class T>
void prepare_for_task(FieldModel<T>& model, const Task& task);

/// Trains the tasks in order. Under DISTILLATION, every task after the first
/// adds lambda * L_distil against a teacher frozen at the previous task
/// boundary. One optimizer state persists across all tasks.
template <class T>
std::vector<FitTrace> continual_fit(FieldModel<T>& model, std::span<const Task> tasks, Strategy strategy,
                                    const TrainConfig& cfg, const DistillConfig& dcfg,
                                    const TaskCallback<T>& on_task_done = {});

}  // namespace nfcl
