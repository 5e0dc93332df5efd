#pragma once

// Reverse-mode differentiation over a per-iteration tape.
//
// A Graph is built fresh for every forward evaluation: each primitive appends
// a node holding its output value, and backward() walks the tape in reverse,
// accumulating exact gradients into a GradSet congruent with the ParamSet the
// graph was created over. Only the primitives the field models and their
// losses need are provided; shapes are explicit and the only broadcast is the
// bias add inside affine().

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfcl/tensor.hpp"

namespace nfcl {

/// Handle to a node in a Graph.
struct Var {
  std::uint32_t id = 0;
};

template <class T>
class Graph {
 public:
  explicit Graph(const ParamSet<T>& params);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf bound to a parameter tensor. Repeated calls return the same node.
  Var param(std::size_t index);
  Var param(const std::string& name);
  /// Leaf that receives no gradient.
  Var constant(Tensor<T> value);

  /// y = x W^T + b, with x: n x in, W: out x in, b: out.
  Var affine(Var weight, Var bias, Var x);
  Var relu(Var z);
  Var sine(Var z, T omega0);
  Var finer(Var z, T omega0);
  Var softmax(Var z);
  /// Gathers rows of a table; backward scatter-adds into those rows only.
  Var lookup(Var table, std::vector<std::uint32_t> rows);
  /// Columns [begin, end) of a matrix.
  Var columns(Var x, std::size_t begin, std::size_t end);

  /// Mean Huber loss against a constant target (scalar node).
  Var huber(Var pred, Tensor<T> target, T delta);
  /// Softmax over the logits followed by cross-entropy against constant
  /// (one-hot or soft) targets; scalar node, mean over rows.
  Var softmax_cross_entropy(Var logits, Tensor<T> targets);
  /// Cross-entropy of probabilities against constant targets; scalar node.
  Var cross_entropy(Var probs, Tensor<T> targets);

  Var sum(Var x);
  Var add(Var a, Var b);
  Var scale(Var a, T factor);

  const Tensor<T>& value(Var v) const;
  /// Value of a one-element node.
  T scalar(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Exact gradients of a scalar node with respect to every parameter.
  /// Parameters the loss does not depend on receive zeros.
  GradSet<T> backward(Var loss) const;

 private:
  enum class Op : std::uint8_t {
    Param,
    Constant,
    Affine,
    Relu,
    Sine,
    Finer,
    Softmax,
    Lookup,
    Columns,
    Huber,
    SoftmaxXent,
    Xent,
    Sum,
    Add,
    Scale,
  };

  struct Node {
    Op op = Op::Constant;
    std::uint32_t in[3] = {0, 0, 0};
    bool needs_grad = false;
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    std::size_t param_index = 0;
    T factor = T(0);
    Tensor<T> aux;  // target or cached probabilities
    std::vector<std::uint32_t> rows;
    std::size_t begin = 0;
    std::size_t end = 0;

    const Tensor<T>& value() const { return borrowed ? *borrowed : owned; }
  };

  Var push(Node node);
  const Node& node(Var v) const;

  const ParamSet<T>* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace nfcl
