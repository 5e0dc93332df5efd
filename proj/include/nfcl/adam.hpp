#pragma once

#include <cstdint>
#include <vector>

#include "nfcl/tensor.hpp"

namespace nfcl {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter plus the step counter. Moments
/// are allocated lazily on the first step.
template <class T>
class AdamState {
 public:
  explicit AdamState(AdamHyper hyper = {}) : hyper_(hyper) {}

  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t step() const noexcept { return step_; }
  const std::vector<Tensor<T>>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moment() const noexcept { return v_; }
  bool initialized() const noexcept { return !m_.empty(); }

  /// Grows the moments to match parameters that gained trailing rows; the
  /// new slots start at zero. Fresh states are left alone.
  void expand_to(const ParamSet<T>& params);

  void update(ParamSet<T>& params, const GradSet<T>& grads, double lr);

 private:
  AdamHyper hyper_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

template <class T>
void adam_step(ParamSet<T>& params, const GradSet<T>& grads, AdamState<T>& state, double lr) {
  state.update(params, grads, lr);
}

extern template class AdamState<float>;
extern template class AdamState<double>;

}  // namespace nfcl
