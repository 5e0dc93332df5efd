#include "nfcl/losses.hpp"

#include <cmath>

#include "nfcl/errors.hpp"
#include "nfcl/kernels.hpp"

namespace nfcl {

template <class T>
double huber_loss(const Tensor<T>& pred, const Tensor<T>& target, T delta) {
  if (!(delta > T(0))) throw ContractError("huber delta must be positive");
  return kernels::huber_mean(pred, target, delta);
}

template <class T>
double cross_entropy_loss(const Tensor<T>& probs, const Tensor<T>& onehot) {
  if (!probs.same_shape(onehot)) throw DimensionError("cross-entropy: probability and target shapes differ");
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (onehot[i] != T(0)) total -= onehot[i] * std::log(static_cast<double>(probs[i]) + kernels::kLogEpsilon);
  }
  return total / static_cast<double>(probs.rows());
}

template double huber_loss<float>(const Tensor<float>&, const Tensor<float>&, float);
template double huber_loss<double>(const Tensor<double>&, const Tensor<double>&, double);
template double cross_entropy_loss<float>(const Tensor<float>&, const Tensor<float>&);
template double cross_entropy_loss<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace nfcl
