#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "nfcl/adam.hpp"
#include "nfcl/graph.hpp"
#include "nfcl/model.hpp"
#include "nfcl/task.hpp"

namespace nfcl {

struct TrainConfig {
  std::uint32_t iterations = 500;
  double lr = 0.001;
  std::uint32_t batch_coords = 4096;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;

  /// Adam learning rate used for each architecture: 0.01 for DINER, 0.001 otherwise.
  static double default_lr(Arch arch) { return arch == Arch::Diner ? 0.01 : 0.001; }
};

struct TraceRow {
  std::uint32_t iteration = 0;
  double loss_fit = 0.0;
  double loss_distil = 0.0;
  double loss_total = 0.0;
};

struct FitTrace {
  std::vector<TraceRow> rows;
};

/// CSV with header iteration,loss_fit,loss_distil,loss_total.
void write_trace_csv(const FitTrace& trace, std::ostream& out);

/// An additional, already weighted loss term recorded on the training graph.
template <class T>
struct ExtraTerm {
  Var weighted;
  double raw = 0.0;
};

template <class T>
using ExtraLoss = std::function<std::optional<ExtraTerm<T>>(Graph<T>&, const FieldModel<T>&)>;

/// Fitting loss of a task over the pre-head outputs `raw`: Huber on the
/// task's linear channels or softmax cross-entropy on the model's class group.
template <class T>
Var fit_loss(Graph<T>& graph, const FieldModel<T>& model, Var raw, Tensor<T> targets, LossKind kind,
             ChannelRange channels, T huber_delta);

/// Draws index batches without replacement within an epoch, reshuffling
/// when fewer than a full batch remain. Grids no larger than a batch are
/// used whole every iteration.
class BatchSampler {
 public:
  BatchSampler(std::size_t population, std::size_t batch, std::uint64_t seed);
  const std::vector<std::uint32_t>& next();

 private:
  std::size_t batch_;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> current_;
  std::size_t cursor_ = 0;
};

/// Copies the selected rows of a matrix.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& source, const std::vector<std::uint32_t>& rows);

/// Runs cfg.iterations Adam steps on one task; each step fits a fresh batch
/// and adds the extra term when one is supplied. The optimizer state is
/// caller-owned so it can persist across tasks.
template <class T>
FitTrace fit_task(FieldModel<T>& model, const Task& task, const TrainConfig& cfg, AdamState<T>& adam,
                  const ExtraLoss<T>& extra = {});

template <class T>
FitTrace fit_task(FieldModel<T>& model, const Task& task, const TrainConfig& cfg) {
  AdamState<T> adam;
  return fit_task(model, task, cfg, adam);
}

}  // namespace nfcl
