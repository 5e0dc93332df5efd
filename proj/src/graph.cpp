#include "nfcl/graph.hpp"

#include <cmath>

#include "nfcl/errors.hpp"
#include "nfcl/kernels.hpp"

namespace nfcl {

namespace {

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class T>
T scalar_of(const Tensor<T>& t) {
  if (t.size() != 1) {
    throw ContractError("expected a scalar node, got shape " + shape_string(t.shape()));
  }
  return t[0];
}

}  // namespace

template <class T>
Graph<T>::Graph(const ParamSet<T>& params) : params_(&params) {
  nodes_.reserve(32);
}

template <class T>
Var Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return nodes_[v.id];
}

template <class T>
Var Graph<T>::param(std::size_t index) {
  if (index >= params_->size()) throw IndexError("parameter index out of range");
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.op = Op::Param;
  n.needs_grad = true;
  n.borrowed = &(*params_)[index];
  n.param_index = index;
  const Var v = push(std::move(n));
  param_nodes_.emplace(index, v.id);
  return v;
}

template <class T>
Var Graph<T>::param(const std::string& name) {
  return param(params_->index_of(name));
}

template <class T>
Var Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.op = Op::Constant;
  n.owned = std::move(value);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::affine(Var weight, Var bias, Var x) {
  const Tensor<T>& w = node(weight).value();
  const Tensor<T>& b = node(bias).value();
  const Tensor<T>& in = node(x).value();
  if (w.rank() != 2 || in.rank() != 2 || in.cols() != w.cols()) {
    throw DimensionError("affine: input " + shape_string(in.shape()) + " incompatible with weight " +
                         shape_string(w.shape()));
  }
  if (b.size() != w.rows()) throw DimensionError("affine: bias length does not match output width");
  Node n;
  n.op = Op::Affine;
  n.in[0] = weight.id;
  n.in[1] = bias.id;
  n.in[2] = x.id;
  n.needs_grad = node(weight).needs_grad || node(bias).needs_grad || node(x).needs_grad;
  n.owned = Tensor<T>(in.rows(), w.rows());
  kernels::gemm_nt(in, w, n.owned);
  kernels::add_row_bias(n.owned, b);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::relu(Var z) {
  const Tensor<T>& in = node(z).value();
  Node n;
  n.op = Op::Relu;
  n.in[0] = z.id;
  n.needs_grad = node(z).needs_grad;
  n.owned = Tensor<T>(in.shape());
  kernels::relu_forward<T>(in.values(), n.owned.values());
  return push(std::move(n));
}

template <class T>
Var Graph<T>::sine(Var z, T omega0) {
  if (!(omega0 > T(0))) throw ContractError("sine activation requires omega0 > 0");
  const Tensor<T>& in = node(z).value();
  Node n;
  n.op = Op::Sine;
  n.in[0] = z.id;
  n.factor = omega0;
  n.needs_grad = node(z).needs_grad;
  n.owned = Tensor<T>(in.shape());
  kernels::sine_forward<T>(in.values(), omega0, n.owned.values());
  return push(std::move(n));
}

template <class T>
Var Graph<T>::finer(Var z, T omega0) {
  if (!(omega0 > T(0))) throw ContractError("finer activation requires omega0 > 0");
  const Tensor<T>& in = node(z).value();
  Node n;
  n.op = Op::Finer;
  n.in[0] = z.id;
  n.factor = omega0;
  n.needs_grad = node(z).needs_grad;
  n.owned = Tensor<T>(in.shape());
  kernels::finer_forward<T>(in.values(), omega0, n.owned.values());
  return push(std::move(n));
}

template <class T>
Var Graph<T>::softmax(Var z) {
  const Tensor<T>& in = node(z).value();
  if (in.rank() != 2) throw DimensionError("softmax expects a matrix");
  Node n;
  n.op = Op::Softmax;
  n.in[0] = z.id;
  n.needs_grad = node(z).needs_grad;
  n.owned = Tensor<T>(in.shape());
  kernels::softmax_rows(in, n.owned);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::lookup(Var table, std::vector<std::uint32_t> rows) {
  const Tensor<T>& h = node(table).value();
  if (h.rank() != 2) throw DimensionError("lookup expects a matrix table");
  const std::size_t width = h.cols();
  Node n;
  n.op = Op::Lookup;
  n.in[0] = table.id;
  n.needs_grad = node(table).needs_grad;
  n.owned = Tensor<T>(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= h.rows()) {
      throw IndexError("lookup row " + std::to_string(rows[i]) + " out of range for table with " +
                       std::to_string(h.rows()) + " rows");
    }
    const T* src = h.data() + static_cast<std::size_t>(rows[i]) * width;
    std::copy(src, src + width, n.owned.data() + i * width);
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::columns(Var x, std::size_t begin, std::size_t end) {
  const Tensor<T>& in = node(x).value();
  if (in.rank() != 2 || begin >= end || end > in.cols()) {
    throw DimensionError("column slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + shape_string(in.shape()));
  }
  Node n;
  n.op = Op::Columns;
  n.in[0] = x.id;
  n.begin = begin;
  n.end = end;
  n.needs_grad = node(x).needs_grad;
  const std::size_t width = end - begin;
  n.owned = Tensor<T>(in.rows(), width);
  for (std::size_t i = 0; i < in.rows(); ++i) {
    for (std::size_t j = 0; j < width; ++j) n.owned(i, j) = in(i, begin + j);
  }
  return push(std::move(n));
}

template <class T>
Var Graph<T>::huber(Var pred, Tensor<T> target, T delta) {
  if (!(delta > T(0))) throw ContractError("huber delta must be positive");
  const Tensor<T>& p = node(pred).value();
  Node n;
  n.op = Op::Huber;
  n.in[0] = pred.id;
  n.factor = delta;
  n.needs_grad = node(pred).needs_grad;
  n.owned = Tensor<T>::vector({static_cast<T>(kernels::huber_mean(p, target, delta))});
  n.aux = std::move(target);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::softmax_cross_entropy(Var logits, Tensor<T> targets) {
  const Tensor<T>& z = node(logits).value();
  Node n;
  n.op = Op::SoftmaxXent;
  n.in[0] = logits.id;
  n.needs_grad = node(logits).needs_grad;
  Tensor<T> probs;
  const double loss = kernels::softmax_xent(z, targets, probs);
  n.owned = Tensor<T>::vector({static_cast<T>(loss)});
  // aux holds (probs - targets), the per-element gradient before the 1/rows factor.
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] -= targets[i];
  n.aux = std::move(probs);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::cross_entropy(Var probs, Tensor<T> targets) {
  const Tensor<T>& p = node(probs).value();
  if (!p.same_shape(targets)) throw DimensionError("cross-entropy: probability and target shapes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (targets[i] != T(0)) total -= targets[i] * std::log(static_cast<double>(p[i]) + kernels::kLogEpsilon);
  }
  Node n;
  n.op = Op::Xent;
  n.in[0] = probs.id;
  n.needs_grad = node(probs).needs_grad;
  n.owned = Tensor<T>::vector({static_cast<T>(p.rows() ? total / static_cast<double>(p.rows()) : 0.0)});
  n.aux = std::move(targets);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::sum(Var x) {
  const Tensor<T>& in = node(x).value();
  double total = 0.0;
  for (T v : in.values()) total += v;
  Node n;
  n.op = Op::Sum;
  n.in[0] = x.id;
  n.needs_grad = node(x).needs_grad;
  n.owned = Tensor<T>::vector({static_cast<T>(total)});
  return push(std::move(n));
}

template <class T>
Var Graph<T>::add(Var a, Var b) {
  const Tensor<T>& x = node(a).value();
  const Tensor<T>& y = node(b).value();
  if (!x.same_shape(y)) throw DimensionError("add: operand shapes differ");
  Node n;
  n.op = Op::Add;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.owned = x;
  add_into(n.owned, y);
  return push(std::move(n));
}

template <class T>
Var Graph<T>::scale(Var a, T factor) {
  Node n;
  n.op = Op::Scale;
  n.in[0] = a.id;
  n.factor = factor;
  n.needs_grad = node(a).needs_grad;
  n.owned = node(a).value();
  for (T& v : n.owned.values()) v *= factor;
  return push(std::move(n));
}

template <class T>
const Tensor<T>& Graph<T>::value(Var v) const {
  return node(v).value();
}

template <class T>
T Graph<T>::scalar(Var v) const {
  return scalar_of(node(v).value());
}

template <class T>
GradSet<T> Graph<T>::backward(Var loss) const {
  scalar_of(node(loss).value());
  GradSet<T> out = params_->zeros_like();
  if (!node(loss).needs_grad) return out;

  std::vector<Tensor<T>> grads(nodes_.size());
  grads[loss.id] = Tensor<T>(node(loss).value().shape(), T(1));

  // Returns the gradient buffer of an input, allocating zeros on first use.
  auto buffer = [&](std::uint32_t id) -> Tensor<T>& {
    if (grads[id].empty() && !nodes_[id].value().empty()) grads[id] = Tensor<T>(nodes_[id].value().shape());
    return grads[id];
  };
  auto accumulate = [&](std::uint32_t id, Tensor<T>&& contribution) {
    if (grads[id].empty()) {
      grads[id] = std::move(contribution);
    } else {
      add_into(grads[id], contribution);
    }
  };

  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const Node& n = nodes_[k];
    if (!n.needs_grad || grads[k].empty()) continue;
    const Tensor<T>& g = grads[k];
    switch (n.op) {
      case Op::Param:
        add_into(out[n.param_index], g);
        break;
      case Op::Constant:
        break;
      case Op::Affine: {
        const Node& w = nodes_[n.in[0]];
        const Node& b = nodes_[n.in[1]];
        const Node& x = nodes_[n.in[2]];
        if (w.needs_grad) kernels::gemm_tn_acc(g, x.value(), buffer(n.in[0]));
        if (b.needs_grad) kernels::column_sums_acc(g, buffer(n.in[1]));
        if (x.needs_grad) {
          Tensor<T> dx(x.value().rows(), x.value().cols());
          kernels::gemm_nn(g, w.value(), dx);
          accumulate(n.in[2], std::move(dx));
        }
        break;
      }
      case Op::Relu:
        kernels::relu_backward<T>(nodes_[n.in[0]].value().values(), g.values(), buffer(n.in[0]).values());
        break;
      case Op::Sine:
        kernels::sine_backward<T>(nodes_[n.in[0]].value().values(), n.factor, g.values(),
                                  buffer(n.in[0]).values());
        break;
      case Op::Finer:
        kernels::finer_backward<T>(nodes_[n.in[0]].value().values(), n.factor, g.values(),
                                   buffer(n.in[0]).values());
        break;
      case Op::Softmax: {
        const Tensor<T>& p = n.owned;
        Tensor<T> dz(p.shape());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          T dot = 0;
          for (std::size_t j = 0; j < p.cols(); ++j) dot += g(i, j) * p(i, j);
          for (std::size_t j = 0; j < p.cols(); ++j) dz(i, j) = p(i, j) * (g(i, j) - dot);
        }
        accumulate(n.in[0], std::move(dz));
        break;
      }
      case Op::Lookup: {
        Tensor<T>& dh = buffer(n.in[0]);
        const std::size_t width = dh.cols();
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          T* dst = dh.data() + static_cast<std::size_t>(n.rows[i]) * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += g(i, j);
        }
        break;
      }
      case Op::Columns: {
        Tensor<T>& dx = buffer(n.in[0]);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) dx(i, n.begin + j) += g(i, j);
        }
        break;
      }
      case Op::Huber:
        kernels::huber_grad_acc(nodes_[n.in[0]].value(), n.aux, n.factor, g[0], buffer(n.in[0]));
        break;
      case Op::SoftmaxXent: {
        Tensor<T>& dz = buffer(n.in[0]);
        const std::size_t rows = n.aux.rows();
        if (rows == 0) break;
        const T k = g[0] / static_cast<T>(rows);
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += k * n.aux[i];
        break;
      }
      case Op::Xent: {
        const Tensor<T>& p = nodes_[n.in[0]].value();
        Tensor<T>& dp = buffer(n.in[0]);
        const std::size_t rows = p.rows();
        if (rows == 0) break;
        const T k = g[0] / static_cast<T>(rows);
        for (std::size_t i = 0; i < p.size(); ++i) {
          dp[i] -= k * n.aux[i] / (p[i] + static_cast<T>(kernels::kLogEpsilon));
        }
        break;
      }
      case Op::Sum: {
        Tensor<T>& dx = buffer(n.in[0]);
        for (T& v : dx.values()) v += g[0];
        break;
      }
      case Op::Add:
        if (nodes_[n.in[0]].needs_grad) add_into(buffer(n.in[0]), g);
        if (nodes_[n.in[1]].needs_grad) add_into(buffer(n.in[1]), g);
        break;
      case Op::Scale: {
        Tensor<T>& dx = buffer(n.in[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += n.factor * g[i];
        break;
      }
    }
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace nfcl
