#include "nfcl/kernels.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "nfcl/errors.hpp"

namespace nfcl::kernels {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<const RowMat<T>> view(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <class T>
Eigen::Map<RowMat<T>> view(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

// Below this many scalar operations a kernel stays on the calling thread.
constexpr std::size_t kMinParallelWork = 1 << 15;

// Calls body(begin, end) over a static partition of [0, n). Nested calls from
// inside an active parallel region run serially.
template <class Body>
void parallel_range(std::size_t n, std::size_t work_per_item, Body&& body) {
  if (n == 0) return;
  if (n * work_per_item < kMinParallelWork || omp_in_parallel() || omp_get_max_threads() == 1) {
    body(std::size_t{0}, n);
    return;
  }
#pragma omp parallel
  {
    const auto threads = static_cast<std::size_t>(omp_get_num_threads());
    const auto id = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t chunk = (n + threads - 1) / threads;
    const std::size_t begin = std::min(n, id * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) body(begin, end);
  }
}

// Eigen peels an unaligned head off a mapped array onto its scalar path, so
// vectorized transcendentals would depend on buffer addresses. Elementwise
// kernels therefore work on index-anchored blocks copied to aligned scratch.
constexpr std::size_t kBlock = 512;

template <class T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>, Eigen::Aligned64> aligned(T* p, std::size_t n) {
  return {p, static_cast<Eigen::Index>(n)};
}

template <class T, class Op>
void blocked_map(std::size_t n, std::size_t work_per_item, Op&& op) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_range(blocks, kBlock * work_per_item, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t b = lo; b < hi; ++b) op(b * kBlock, std::min(kBlock, n - b * kBlock));
  });
}

// Narrow products (output heads) use plain dot products so a column's value
// does not depend on how many other columns there are.
constexpr std::size_t kNarrowColumns = 16;

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

template <class T>
void check_nt(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  require(a.cols() == b.cols(), "gemm_nt: inner dimensions differ");
  require(c.rows() == a.rows() && c.cols() == b.rows(), "gemm_nt: output shape mismatch");
}

template <class T>
void check_nn(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  require(a.cols() == b.rows(), "gemm_nn: inner dimensions differ");
  require(c.rows() == a.rows() && c.cols() == b.cols(), "gemm_nn: output shape mismatch");
}

template <class T>
void check_tn(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  require(a.rows() == b.rows(), "gemm_tn: inner dimensions differ");
  require(c.rows() == a.cols() && c.cols() == b.cols(), "gemm_tn: output shape mismatch");
}

template <class T>
void check_elementwise(std::size_t a, std::size_t b) {
  require(a == b, "elementwise kernel: length mismatch");
}

}  // namespace

template <class T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_nt(a, b, c);
  const auto A = view(a);
  const auto B = view(b);
  auto C = view(c);
  if (b.rows() <= kNarrowColumns) {
    const std::size_t k = a.cols(), n = b.rows();
    parallel_range(a.rows(), k * n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const T* x = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const T* w = b.data() + j * k;
          T s = 0;
          for (std::size_t p = 0; p < k; ++p) s += x[p] * w[p];
          c(i, j) = s;
        }
      }
    });
    return;
  }
  parallel_range(a.rows(), a.cols() * b.rows(), [&](std::size_t lo, std::size_t hi) {
    const auto n = static_cast<Eigen::Index>(hi - lo);
    C.middleRows(lo, n).noalias() = A.middleRows(lo, n) * B.transpose();
  });
}

template <class T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_nn(a, b, c);
  const auto A = view(a);
  const auto B = view(b);
  auto C = view(c);
  parallel_range(a.rows(), a.cols() * b.cols(), [&](std::size_t lo, std::size_t hi) {
    const auto n = static_cast<Eigen::Index>(hi - lo);
    C.middleRows(lo, n).noalias() = A.middleRows(lo, n) * B;
  });
}

template <class T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_tn(a, b, c);
  const auto A = view(a);
  const auto B = view(b);
  auto C = view(c);
  parallel_range(a.cols(), a.rows() * b.cols(), [&](std::size_t lo, std::size_t hi) {
    const auto n = static_cast<Eigen::Index>(hi - lo);
    C.middleRows(lo, n).noalias() += A.middleCols(lo, n).transpose() * B;
  });
}

template <class T>
void add_row_bias(Tensor<T>& c, const Tensor<T>& bias) {
  require(bias.size() == c.cols(), "add_row_bias: bias length mismatch");
  const std::size_t cols = c.cols();
  parallel_range(c.rows(), cols, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      T* row = c.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
    }
  });
}

template <class T>
void column_sums_acc(const Tensor<T>& a, Tensor<T>& out) {
  require(out.size() == a.cols(), "column_sums: output length mismatch");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  // Partitioned over columns so each output element has a single owner.
  parallel_range(cols, rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = 0; i < rows; ++i) {
      const T* row = a.data() + i * cols;
      for (std::size_t j = lo; j < hi; ++j) out[j] += row[j];
    }
  });
}

template <class T>
void relu_forward(std::span<const T> z, std::span<T> out) {
  check_elementwise<T>(z.size(), out.size());
  parallel_range(z.size(), 1, [&](std::size_t lo, std::size_t hi) {
    const T* zp = z.data();
    T* op = out.data();
#pragma omp simd
    for (std::size_t i = lo; i < hi; ++i) op[i] = zp[i] > T(0) ? zp[i] : T(0);
  });
}

template <class T>
void relu_backward(std::span<const T> z, std::span<const T> g, std::span<T> dz) {
  check_elementwise<T>(z.size(), g.size());
  check_elementwise<T>(z.size(), dz.size());
  parallel_range(z.size(), 1, [&](std::size_t lo, std::size_t hi) {
    const T* zp = z.data();
    const T* gp = g.data();
    T* dp = dz.data();
#pragma omp simd
    for (std::size_t i = lo; i < hi; ++i) dp[i] += zp[i] > T(0) ? gp[i] : T(0);
  });
}

template <class T>
void sine_forward(std::span<const T> z, T omega0, std::span<T> out) {
  check_elementwise<T>(z.size(), out.size());
  blocked_map<T>(z.size(), 16, [&](std::size_t at, std::size_t n) {
    alignas(64) T x[kBlock], y[kBlock];
    std::copy_n(z.data() + at, n, x);
    aligned(y, n) = (aligned(x, n) * omega0).sin();
    std::copy_n(y, n, out.data() + at);
  });
}

template <class T>
void sine_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz) {
  check_elementwise<T>(z.size(), g.size());
  check_elementwise<T>(z.size(), dz.size());
  blocked_map<T>(z.size(), 16, [&](std::size_t at, std::size_t n) {
    alignas(64) T x[kBlock], gb[kBlock], y[kBlock];
    std::copy_n(z.data() + at, n, x);
    std::copy_n(g.data() + at, n, gb);
    aligned(y, n) = aligned(gb, n) * omega0 * (aligned(x, n) * omega0).cos();
    for (std::size_t i = 0; i < n; ++i) dz[at + i] += y[i];
  });
}

template <class T>
void finer_forward(std::span<const T> z, T omega0, std::span<T> out) {
  check_elementwise<T>(z.size(), out.size());
  blocked_map<T>(z.size(), 16, [&](std::size_t at, std::size_t n) {
    alignas(64) T x[kBlock], y[kBlock];
    std::copy_n(z.data() + at, n, x);
    const auto xa = aligned(x, n);
    aligned(y, n) = (omega0 * (xa.abs() + T(1)) * xa).sin();
    std::copy_n(y, n, out.data() + at);
  });
}

template <class T>
void finer_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz) {
  check_elementwise<T>(z.size(), g.size());
  check_elementwise<T>(z.size(), dz.size());
  blocked_map<T>(z.size(), 16, [&](std::size_t at, std::size_t n) {
    alignas(64) T x[kBlock], gb[kBlock], y[kBlock];
    std::copy_n(z.data() + at, n, x);
    std::copy_n(g.data() + at, n, gb);
    const auto xa = aligned(x, n);
    aligned(y, n) = aligned(gb, n) * omega0 * (T(2) * xa.abs() + T(1)) * (omega0 * (xa.abs() + T(1)) * xa).cos();
    for (std::size_t i = 0; i < n; ++i) dz[at + i] += y[i];
  });
}

namespace {

template <class T>
void softmax_row(const T* z, T* out, std::size_t cols) {
  const T peak = *std::max_element(z, z + cols);
  T total = 0;
  for (std::size_t j = 0; j < cols; ++j) {
    out[j] = std::exp(z[j] - peak);
    total += out[j];
  }
  for (std::size_t j = 0; j < cols; ++j) out[j] /= total;
}

}  // namespace

template <class T>
void softmax_rows(const Tensor<T>& z, Tensor<T>& out) {
  require(z.same_shape(out), "softmax: output shape mismatch");
  require(z.cols() >= 1, "softmax: needs at least one class column");
  const std::size_t cols = z.cols();
  parallel_range(z.rows(), cols * 8, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) softmax_row(z.data() + i * cols, out.data() + i * cols, cols);
  });
}

template <class T>
double huber_mean(const Tensor<T>& pred, const Tensor<T>& target, T delta) {
  if (!pred.same_shape(target)) throw DimensionError("huber: prediction and target shapes differ");
  if (pred.size() == 0) return 0.0;
  const double d = delta;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
    total += r <= d ? 0.5 * r * r : d * (r - 0.5 * d);
  }
  return total / static_cast<double>(pred.size());
}

template <class T>
void huber_grad_acc(const Tensor<T>& pred, const Tensor<T>& target, T delta, T scale, Tensor<T>& dpred) {
  if (!pred.same_shape(target) || !pred.same_shape(dpred)) {
    throw DimensionError("huber: prediction and target shapes differ");
  }
  if (pred.size() == 0) return;
  const T k = scale / static_cast<T>(pred.size());
  parallel_range(pred.size(), 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const T r = pred[i] - target[i];
      const T g = std::abs(r) <= delta ? r : (r > 0 ? delta : -delta);
      dpred[i] += k * g;
    }
  });
}

template <class T>
double softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>& probs) {
  if (!logits.same_shape(targets)) throw DimensionError("cross-entropy: logits and target shapes differ");
  probs = Tensor<T>(logits.shape());
  softmax_rows(logits, probs);
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  if (rows == 0) return 0.0;
  std::vector<double> per_row(rows);
  parallel_range(rows, cols * 8, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double y = targets(i, j);
        if (y != 0.0) s -= y * std::log(static_cast<double>(probs(i, j)) + kLogEpsilon);
      }
      per_row[i] = s;
    }
  });
  double total = 0.0;
  for (double v : per_row) total += v;
  return total / static_cast<double>(rows);
}

namespace reference {

template <class T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_nt(a, b, c);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
  }
}

template <class T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_nn(a, b, c);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  }
}

template <class T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  check_tn(a, b, c);
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      T s = 0;
      for (std::size_t r = 0; r < m; ++r) s += a(r, i) * b(r, j);
      c(i, j) += s;
    }
  }
}

template <class T>
void column_sums_acc(const Tensor<T>& a, Tensor<T>& out) {
  require(out.size() == a.cols(), "column_sums: output length mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
  }
}

template <class T>
void sine_forward(std::span<const T> z, T omega0, std::span<T> out) {
  check_elementwise<T>(z.size(), out.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::sin(omega0 * z[i]);
}

template <class T>
void sine_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz) {
  check_elementwise<T>(z.size(), dz.size());
  for (std::size_t i = 0; i < z.size(); ++i) dz[i] += g[i] * omega0 * std::cos(omega0 * z[i]);
}

template <class T>
void finer_forward(std::span<const T> z, T omega0, std::span<T> out) {
  check_elementwise<T>(z.size(), out.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::sin(omega0 * (std::abs(z[i]) + T(1)) * z[i]);
}

template <class T>
void finer_backward(std::span<const T> z, T omega0, std::span<const T> g, std::span<T> dz) {
  check_elementwise<T>(z.size(), dz.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const T a = std::abs(z[i]);
    dz[i] += g[i] * omega0 * (T(2) * a + T(1)) * std::cos(omega0 * (a + T(1)) * z[i]);
  }
}

template <class T>
void softmax_rows(const Tensor<T>& z, Tensor<T>& out) {
  require(z.same_shape(out), "softmax: output shape mismatch");
  require(z.cols() >= 1, "softmax: needs at least one class column");
  for (std::size_t i = 0; i < z.rows(); ++i) softmax_row(z.data() + i * z.cols(), out.data() + i * z.cols(), z.cols());
}

}  // namespace reference

#define NFCL_INSTANTIATE_KERNELS(T)                                                                 \
  template void gemm_nt<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                         \
  template void gemm_nn<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                         \
  template void gemm_tn_acc<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                     \
  template void add_row_bias<T>(Tensor<T>&, const Tensor<T>&);                                      \
  template void column_sums_acc<T>(const Tensor<T>&, Tensor<T>&);                                   \
  template void relu_forward<T>(std::span<const T>, std::span<T>);                                  \
  template void relu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);             \
  template void sine_forward<T>(std::span<const T>, T, std::span<T>);                               \
  template void sine_backward<T>(std::span<const T>, T, std::span<const T>, std::span<T>);          \
  template void finer_forward<T>(std::span<const T>, T, std::span<T>);                              \
  template void finer_backward<T>(std::span<const T>, T, std::span<const T>, std::span<T>);         \
  template void softmax_rows<T>(const Tensor<T>&, Tensor<T>&);                                      \
  template double huber_mean<T>(const Tensor<T>&, const Tensor<T>&, T);                             \
  template void huber_grad_acc<T>(const Tensor<T>&, const Tensor<T>&, T, T, Tensor<T>&);            \
  template double softmax_xent<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                  \
  template void reference::gemm_nt<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);              \
  template void reference::gemm_nn<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);              \
  template void reference::gemm_tn_acc<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);          \
  template void reference::column_sums_acc<T>(const Tensor<T>&, Tensor<T>&);                        \
  template void reference::sine_forward<T>(std::span<const T>, T, std::span<T>);                    \
  template void reference::sine_backward<T>(std::span<const T>, T, std::span<const T>, std::span<T>); \
  template void reference::finer_forward<T>(std::span<const T>, T, std::span<T>);                   \
  template void reference::finer_backward<T>(std::span<const T>, T, std::span<const T>, std::span<T>); \
  template void reference::softmax_rows<T>(const Tensor<T>&, Tensor<T>&);

NFCL_INSTANTIATE_KERNELS(float)
NFCL_INSTANTIATE_KERNELS(double)

#undef NFCL_INSTANTIATE_KERNELS

}  // namespace nfcl::kernels
