#include "nfcl/adam.hpp"

#include <algorithm>
#include <cmath>

#include "nfcl/errors.hpp"

namespace nfcl {

template <class T>
void AdamState<T>::expand_to(const ParamSet<T>& params) {
  if (!initialized()) return;
  if (params.size() != m_.size()) throw ContractError("optimizer state tracks a different parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& want = params[i].shape();
    const auto have = m_[i].shape();
    if (want == have) continue;
    const bool grows_rows = want.size() == have.size() && want[0] >= have[0] &&
                            std::equal(want.begin() + 1, want.end(), have.begin() + 1);
    if (!grows_rows) {
      throw ContractError("parameter '" + params.name(i) + "' changed shape other than by appending rows");
    }
    const std::size_t extra = want[0] - have[0];
    m_[i].append_rows(extra);
    v_[i].append_rows(extra);
  }
}

template <class T>
void AdamState<T>::update(ParamSet<T>& params, const GradSet<T>& grads, double lr) {
  if (!params.congruent(grads)) throw DimensionError("gradients are not congruent with parameters");
  if (!initialized()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].same_shape(m_[i])) throw DimensionError("optimizer moments are not congruent with parameters");
    }
  }
  ++step_;
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const T eps = static_cast<T>(hyper_.eps);
  const T tb1 = static_cast<T>(b1);
  const T tb2 = static_cast<T>(b2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* theta = params[i].data();
    const T* g = grads[i].data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = params[i].size();
#pragma omp parallel for if (n > (1u << 16)) schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = tb1 * m[k] + (T(1) - tb1) * g[k];
      v[k] = tb2 * v[k] + (T(1) - tb2) * g[k] * g[k];
      theta[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + eps);
    }
  }
}

template class AdamState<float>;
template class AdamState<double>;

}  // namespace nfcl
