#include "nfcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "nfcl/errors.hpp"

namespace nfcl {

std::string_view loss_name(LossKind kind) {
  return kind == LossKind::Huber ? "huber" : "cross-entropy";
}

template <class T>
Tensor<T> task_targets(const Task& task) {
  const Volume& v = task.target;
  const std::size_t n = v.voxel_count();
  if (n != task.grid.point_count()) throw DimensionError("task target does not match its grid");
  const std::size_t width = task.channels.size();
  if (width == 0) throw ConfigError("task supervises no channels");
  Tensor<T> out(n, width);
  if (task.loss == LossKind::Huber) {
    if (v.kind != VolumeKind::Intensity) throw ConfigError("huber tasks need an intensity target");
    if (v.channels != width) throw DimensionError("target channel count does not match the task's channel range");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(v.intensities[i]);
  } else {
    if (v.kind != VolumeKind::Labels) throw ConfigError("cross-entropy tasks need a label target");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t label = v.labels[i];
      if (label >= width) {
        throw ConfigError("label " + std::to_string(label) + " outside the task's " + std::to_string(width) +
                          " classes");
      }
      out(i, label) = T(1);
    }
  }
  return out;
}

template Tensor<float> task_targets<float>(const Task&);
template Tensor<double> task_targets<double>(const Task&);

void write_trace_csv(const FitTrace& trace, std::ostream& out) {
  out << "iteration,loss_fit,loss_distil,loss_total\n";
  char line[128];
  for (const auto& r : trace.rows) {
    std::snprintf(line, sizeof line, "%u,%.9g,%.9g,%.9g\n", r.iteration, r.loss_fit, r.loss_distil, r.loss_total);
    out << line;
  }
}

template <class T>
Var fit_loss(Graph<T>& graph, const FieldModel<T>& model, Var raw, Tensor<T> targets, LossKind kind,
             ChannelRange channels, T huber_delta) {
  const ModelConfig& c = model.config();
  if (channels.begin >= channels.end || channels.end > c.out_channels) {
    throw ConfigError("task channels [" + std::to_string(channels.begin) + ", " + std::to_string(channels.end) +
                      ") outside the model's " + std::to_string(c.out_channels) + " outputs");
  }
  const Var slice = channels.begin == 0 && channels.end == c.out_channels ? raw
                                                                           : graph.columns(raw, channels.begin,
                                                                                           channels.end);
  if (kind == LossKind::Huber) {
    if (channels.end > c.linear_count()) throw ConfigError("huber loss applied to softmax channels");
    return graph.huber(slice, std::move(targets), huber_delta);
  }
  if (channels.begin != c.class_begin() || channels.end != c.out_channels) {
    throw ConfigError("cross-entropy must cover exactly the model's softmax channels");
  }
  return graph.softmax_cross_entropy(slice, std::move(targets));
}

BatchSampler::BatchSampler(std::size_t population, std::size_t batch, std::uint64_t seed)
    : batch_(batch), rng_(seed), order_(population) {
  if (population == 0) throw ContractError("cannot sample from an empty grid");
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  std::iota(order_.begin(), order_.end(), 0u);
  if (population <= batch) {
    current_ = order_;
  } else {
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
}

const std::vector<std::uint32_t>& BatchSampler::next() {
  if (order_.size() <= batch_) return current_;
  if (order_.size() - cursor_ < batch_) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  current_.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                  order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
  cursor_ += batch_;
  return current_;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& source, const std::vector<std::uint32_t>& rows) {
  const std::size_t width = source.cols();
  Tensor<T> out(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const T* src = source.data() + static_cast<std::size_t>(rows[i]) * width;
    std::copy(src, src + width, out.data() + i * width);
  }
  return out;
}

template <class T>
FitTrace fit_task(FieldModel<T>& model, const Task& task, const TrainConfig& cfg, AdamState<T>& adam,
                  const ExtraLoss<T>& extra) {
  FitTrace trace;
  if (cfg.iterations == 0) return trace;
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.huber_delta > 0.0)) throw ConfigError("huber delta must be positive");

  const Tensor<T> coords = make_grid<T>(task.grid);
  const Tensor<T> targets = task_targets<T>(task);
  if (coords.cols() != model.config().in_dim) {
    throw DimensionError("task grid has " + std::to_string(coords.cols()) + " coordinate columns, model expects " +
                         std::to_string(model.config().in_dim));
  }
  BatchSampler sampler(coords.rows(), cfg.batch_coords, cfg.seed);
  const T delta = static_cast<T>(cfg.huber_delta);
  trace.rows.reserve(cfg.iterations);

  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    const auto& batch = sampler.next();
    const Tensor<T> x = gather_rows(coords, batch);
    Tensor<T> y = gather_rows(targets, batch);

    Graph<T> graph(model.params());
    const Var raw = model.forward_raw(graph, x);
    const Var fit = fit_loss(graph, model, raw, std::move(y), task.loss, task.channels, delta);
    Var total = fit;
    double distil = 0.0;
    if (extra) {
      if (auto term = extra(graph, model)) {
        total = graph.add(fit, term->weighted);
        distil = term->raw;
      }
    }
    const double fit_value = graph.scalar(fit);
    const double total_value = graph.scalar(total);
    if (!std::isfinite(total_value) || !std::isfinite(distil)) throw TrainingDivergedError(it);

    const GradSet<T> grads = graph.backward(total);
    adam.update(model.params(), grads, cfg.lr);
    trace.rows.push_back({it, fit_value, distil, total_value});
  }
  return trace;
}

template Var fit_loss<float>(Graph<float>&, const FieldModel<float>&, Var, Tensor<float>, LossKind,
                             ChannelRange, float);
template Var fit_loss<double>(Graph<double>&, const FieldModel<double>&, Var, Tensor<double>, LossKind,
                              ChannelRange, double);
template Tensor<float> gather_rows<float>(const Tensor<float>&, const std::vector<std::uint32_t>&);
template Tensor<double> gather_rows<double>(const Tensor<double>&, const std::vector<std::uint32_t>&);
template FitTrace fit_task<float>(FieldModel<float>&, const Task&, const TrainConfig&, AdamState<float>&,
                                  const ExtraLoss<float>&);
template FitTrace fit_task<double>(FieldModel<double>&, const Task&, const TrainConfig&, AdamState<double>&,
                                   const ExtraLoss<double>&);

}  // namespace nfcl
