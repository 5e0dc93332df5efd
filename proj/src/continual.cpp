#include "nfcl/continual.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "nfcl/errors.hpp"

namespace nfcl {

std::string_view strategy_name(Strategy s) {
  return s == Strategy::Baseline ? "baseline" : "distillation";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "baseline") return Strategy::Baseline;
  if (name == "distillation") return Strategy::Distillation;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (expected baseline or distillation)");
}

std::uint64_t task_seed(std::uint64_t base, std::uint32_t task_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), task_id};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

template <class T>
DistillSampler<T>::DistillSampler(std::span<const Task> prior_tasks) {
  if (prior_tasks.empty()) throw ContractError("distillation needs at least one prior task");
  std::vector<const GridSpec*> grids;
  for (const Task& t : prior_tasks) {
    const bool seen = std::any_of(grids.begin(), grids.end(), [&](const GridSpec* g) { return *g == t.grid; });
    if (!seen) grids.push_back(&t.grid);
  }
  std::size_t total = 0;
  for (const GridSpec* g : grids) total += g->point_count();
  if (total == 0) throw ContractError("prior tasks have an empty domain");
  const std::size_t cols = grids.front()->coord_dims();
  domain_ = Tensor<T>(total, cols);
  std::size_t row = 0;
  for (const GridSpec* g : grids) {
    const Tensor<T> coords = make_grid<T>(*g);
    if (coords.cols() != cols) throw DimensionError("prior task grids have different ranks");
    std::copy(coords.data(), coords.data() + coords.size(), domain_.data() + row * cols);
    row += coords.rows();
  }
  order_.resize(total);
  std::iota(order_.begin(), order_.end(), 0u);
}

template <class T>
Tensor<T> DistillSampler<T>::sample(std::size_t n, std::mt19937_64& rng) {
  const std::size_t total = order_.size();
  const std::size_t cols = domain_.cols();
  Tensor<T> out(n, cols);
  std::size_t filled = 0;
  while (filled < n) {
    const std::size_t take = std::min(n - filled, total);
    // Partial Fisher-Yates: the first `take` slots become a uniform draw
    // without replacement.
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(order_[i], order_[pick(rng)]);
    }
    for (std::size_t i = 0; i < take; ++i, ++filled) {
      const T* src = domain_.data() + static_cast<std::size_t>(order_[i]) * cols;
      std::copy(src, src + cols, out.data() + filled * cols);
    }
  }
  return out;
}

template <class T>
Tensor<T> distill_targets(const TeacherSnapshot<T>& teacher, const Tensor<T>& coords) {
  return teacher.model().forward(coords);
}

template <class T>
Var distill_loss(Graph<T>& graph, const FieldModel<T>& student, const TeacherSnapshot<T>& teacher,
                 const Tensor<T>& coords, const Tensor<T>& targets, T huber_delta) {
  const ModelConfig& tc = teacher.model().config();
  if (student.config().out_channels < tc.out_channels) {
    throw ContractError("student has fewer channels than its teacher");
  }
  if (targets.rows() != coords.rows() || targets.cols() != tc.out_channels) {
    throw DimensionError("distillation targets do not match the teacher's channels");
  }
  const Var raw = student.forward_raw(graph, coords);
  const std::uint32_t linear = tc.linear_count();
  const std::uint32_t channels = tc.out_channels;

  auto target_columns = [&](std::uint32_t begin, std::uint32_t end) {
    Tensor<T> out(targets.rows(), end - begin);
    for (std::size_t i = 0; i < targets.rows(); ++i) {
      for (std::uint32_t j = begin; j < end; ++j) out(i, j - begin) = targets(i, j);
    }
    return out;
  };
  auto student_columns = [&](std::uint32_t begin, std::uint32_t end) {
    return begin == 0 && end == student.config().out_channels ? raw : graph.columns(raw, begin, end);
  };

  std::optional<Var> loss;
  if (linear > 0) {
    loss = graph.huber(student_columns(0, linear), target_columns(0, linear), huber_delta);
  }
  if (channels > linear) {
    const Var xent = graph.softmax_cross_entropy(student_columns(linear, channels), target_columns(linear, channels));
    loss = loss ? graph.add(*loss, xent) : xent;
  }
  return *loss;
}

template <class T>
void prepare_for_task(FieldModel<T>& model, const Task& task) {
  const std::uint32_t out = model.config().out_channels;
  if (task.channels.end > out) {
    if (task.channels.begin != out) {
      throw ConfigError("a task may only add channels directly after the existing head");
    }
    expand_output_head(model, task.channels.end - out,
                       task.loss == LossKind::CrossEntropy ? Head::Softmax : Head::Linear);
  }
  if (model.config().arch == Arch::Diner) {
    const Tensor<T> coords = make_grid<T>(task.grid);
    const CoordinateIndex& index = model.coord_index();
    std::vector<std::uint32_t> missing;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      if (!index.contains(index.key_of(coords.data() + i * coords.cols()))) missing.push_back(static_cast<std::uint32_t>(i));
    }
    if (!missing.empty()) {
      std::mt19937_64 rng(task_seed(model.config().seed ^ 0x7ab1e5eedULL, task.id));
      expand_hash_table(model, gather_rows(coords, missing), rng);
    }
  }
}

template <class T>
std::vector<FitTrace> continual_fit(FieldModel<T>& model, std::span<const Task> tasks, Strategy strategy,
                                    const TrainConfig& cfg, const DistillConfig& dcfg,
                                    const TaskCallback<T>& on_task_done) {
  if (!(dcfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  AdamState<T> adam;
  std::vector<FitTrace> traces;
  traces.reserve(tasks.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& task = tasks[k];
    try {
      std::optional<TeacherSnapshot<T>> teacher;
      if (strategy == Strategy::Distillation && k > 0) teacher.emplace(snapshot_teacher(model));

      prepare_for_task(model, task);
      adam.expand_to(model.params());

      TrainConfig task_cfg = cfg;
      task_cfg.seed = task_seed(cfg.seed, task.id);

      ExtraLoss<T> extra;
      std::optional<DistillSampler<T>> sampler;
      std::mt19937_64 distill_rng(task_seed(dcfg.rng_stream, task.id));
      if (teacher) {
        sampler.emplace(tasks.subspan(0, k));
        const std::size_t n = dcfg.n_distil ? dcfg.n_distil : cfg.batch_coords;
        const T lambda = static_cast<T>(dcfg.lambda);
        const T delta = static_cast<T>(cfg.huber_delta);
        extra = [&, n, lambda, delta](Graph<T>& graph, const FieldModel<T>& student) -> std::optional<ExtraTerm<T>> {
          const Tensor<T> coords = sampler->sample(n, distill_rng);
          const Tensor<T> targets = distill_targets(*teacher, coords);
          const Var loss = distill_loss(graph, student, *teacher, coords, targets, delta);
          return ExtraTerm<T>{graph.scale(loss, lambda), static_cast<double>(graph.scalar(loss))};
        };
      }
      traces.push_back(fit_task(model, task, task_cfg, adam, extra));
      if (on_task_done) on_task_done(k, model, traces.back());
    } catch (Error& e) {
      e.add_context("task " + std::to_string(task.id));
      throw;
    }
  }
  return traces;
}

template class DistillSampler<float>;
template class DistillSampler<double>;
template Tensor<float> distill_targets<float>(const TeacherSnapshot<float>&, const Tensor<float>&);
template Tensor<double> distill_targets<double>(const TeacherSnapshot<double>&, const Tensor<double>&);
template Var distill_loss<float>(Graph<float>&, const FieldModel<float>&, const TeacherSnapshot<float>&,
                                 const Tensor<float>&, const Tensor<float>&, float);
template Var distill_loss<double>(Graph<double>&, const FieldModel<double>&, const TeacherSnapshot<double>&,
                                  const Tensor<double>&, const Tensor<double>&, double);
template void prepare_for_task<float>(FieldModel<float>&, const Task&);
template void prepare_for_task<double>(FieldModel<double>&, const Task&);
template std::vector<FitTrace> continual_fit<float>(FieldModel<float>&, std::span<const Task>, Strategy,
                                                    const TrainConfig&, const DistillConfig&,
                                                    const TaskCallback<float>&);
template std::vector<FitTrace> continual_fit<double>(FieldModel<double>&, std::span<const Task>, Strategy,
                                                     const TrainConfig&, const DistillConfig&,
                                                     const TaskCallback<double>&);

}  // namespace nfcl
