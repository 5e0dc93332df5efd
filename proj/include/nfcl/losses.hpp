#pragma once

#include "nfcl/tensor.hpp"

namespace nfcl {

/// Mean over elements of 0.5 r^2 (|r| <= delta) or delta (|r| - delta / 2).
template <class T>
double huber_loss(const Tensor<T>& pred, const Tensor<T>& target, T delta);

/// Mean over rows of -sum_c onehot_c log(probs_c + 1e-12).
template <class T>
double cross_entropy_loss(const Tensor<T>& probs, const Tensor<T>& onehot);

}  // namespace nfcl
