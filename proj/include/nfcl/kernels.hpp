#pragma once

// Numeric kernels behind the differentiation engine.
//
// Every kernel exists twice: a plain serial loop in `kernels::reference`, kept
// as the ground truth for tests and benchmarks, and the production version in
// `kernels`, which splits rows across OpenMP threads and hands dense products
// to Eigen. Both compute the same quantity; the fast path may differ in the
// last bits because of blocked summation order.

#include <cstddef>
#include <span>

#include "nfcl/tensor.hpp"

namespace nfcl::kernels {

/// c = a * b^T with a: m x k, b: n x k, c: m x n (overwritten).
template <class T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);
/// c = a * b with a: m x k, b: k x n, c: m x n (overwritten).
template <class T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);
/// c += a^T * b with a: m x p, b: m x q, c: p x q.
template <class T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);

/// Adds bias[j] to every row of c.
template <class T>
void add_row_bias(Tensor<T>& c, const Tensor<T>& bias);
/// out[j] += sum_i a(i, j).
template <class T>
void column_sums_acc(const Tensor<T>& a, Tensor<T>& out);

template <class T>
void relu_forward(std::span<const T> z, std::span<T> out);
/// dz += g where z > 0. The derivative at exactly 0 is 0.
template <class T>
void relu_backward(std::span<const T> z, std::span<const T> g, std::span<T> dz);

template <class T>
void sine_forward(std::span<const T> z, T omega0, std::span<T> out);
template <class T>
void sine_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz);

/// sin(omega0 * (|z| + 1) * z)
template <class T>
void finer_forward(std::span<const T> z, T omega0, std::span<T> out);
/// dz += g * omega0 * (2|z| + 1) * cos(omega0 * (|z| + 1) * z)
template <class T>
void finer_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz);

/// Row-wise softmax, stabilized by subtracting the row maximum.
template <class T>
void softmax_rows(const Tensor<T>& z, Tensor<T>& out);

/// Mean Huber penalty over all elements.
template <class T>
double huber_mean(const Tensor<T>& pred, const Tensor<T>& target, T delta);
/// dpred += scale * dHuber/dpred for the mean Huber loss.
template <class T>
void huber_grad_acc(const Tensor<T>& pred, const Tensor<T>& target, T delta, T scale, Tensor<T>& dpred);

/// Fused softmax + cross-entropy against (possibly soft) targets. Writes the
/// probabilities and returns the mean over rows of -sum_c y_c log(p_c + 1e-12).
template <class T>
double softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>& probs);

namespace reference {

template <class T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);
template <class T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);
template <class T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c);
template <class T>
void column_sums_acc(const Tensor<T>& a, Tensor<T>& out);
template <class T>
void sine_forward(std::span<const T> z, T omega0, std::span<T> out);
template <class T>
void sine_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz);
template <class T>
void finer_forward(std::span<const T> z, T omega0, std::span<T> out);
template <class T>
void finer_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz);
template <class T>
void softmax_rows(const Tensor<T>& z, Tensor<T>& out);

}  // namespace reference

inline constexpr double kLogEpsilon = 1e-12;

}  // namespace nfcl::kernels
