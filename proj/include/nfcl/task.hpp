#pragma once

#include <cstdint>
#include <string_view>

#include "nfcl/tensor.hpp"
#include "nfcl/volume.hpp"

namespace nfcl {

enum class TaskKind : std::uint8_t { DomainFrame, SignalLayer };
enum class LossKind : std::uint8_t { Huber, CrossEntropy };

/// Half-open range of output channels.
struct ChannelRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 1;

  std::uint32_t size() const { return end - begin; }
  friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

/// One unit of a continual sequence: a grid, the signal on it, the loss
/// that fits it, and the output channels it supervises.
struct Task {
  std::uint32_t id = 1;
  TaskKind kind = TaskKind::DomainFrame;
  GridSpec grid;
  Volume target;
  LossKind loss = LossKind::Huber;
  ChannelRange channels;
};

/// Supervision targets, one row per grid point: intensities for HUBER tasks,
/// one-hot rows over the task's channels for CROSS_ENTROPY tasks.
template <class T>
Tensor<T> task_targets(const Task& task);

std::string_view loss_name(LossKind kind);

}  // namespace nfcl
