#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "siddm/tensor.hpp"

namespace siddm {

class Graph;

/// Handle to a value recorded on a Graph. Cheap to copy; valid while the
/// graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const;
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  Constant,
  Param,
  Frozen,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddRow,
  LeakyRelu,
  Sigmoid,
  Log,
  LogSigmoid,
  Sum,
  Mean,
  RowSqNorm,
  ConcatCols,
  StopGradient,
  Custom,
};

const char* op_name(OpKind op);

/// Accumulates input gradients given the output gradient. One span per input,
/// in input order; spans for inputs that need no gradient are empty.
using CustomBackward = std::function<void(std::span<const double> grad_out,
                                          std::span<std::span<double>> grad_in)>;

/// Tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. backward() walks it once in reverse.
///
/// Bound tensors: param() leaves receive dloss/dparam in their grad buffer on
/// backward (overwritten, zeros when unreachable). frozen() leaves feed their
/// values forward but never carry gradient; their grad buffers are zeroed on
/// backward so a frozen network can be inspected for leakage.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Tensor& tensor);
  Var frozen(Tensor& tensor);
  Var custom(std::vector<Var> inputs, Tensor value, CustomBackward backward,
             std::string name = "custom");

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Smallest |input| over all leaky-rectifier nodes. Finite-difference checks
  /// use it to stay away from the kink.
  double min_kink_margin() const;

  // Op constructors; the free functions below forward here.
  Var record(OpKind op, std::vector<Var> inputs, Tensor value, double arg = 0.0);

 private:
  struct Node {
    OpKind op = OpKind::Constant;
    std::vector<std::size_t> inputs;
    Tensor owned;
    Tensor* bound = nullptr;
    double arg = 0.0;
    bool requires_grad = false;
    CustomBackward custom;
    std::string name;
  };

  Var bind(Tensor& tensor, OpKind kind);
  void check_finite(const Tensor& value, const std::string& op) const;
  void backward_node(const Node& node, std::span<const double> grad_out,
                     std::vector<std::vector<double>>& grads);

  // A deque keeps value() references valid as the tape grows.
  std::deque<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// (n, m) + (1, m): the row is broadcast over the batch.
Var add_row(Var a, Var row);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var log(Var a);
/// log(sigmoid(a)) evaluated without overflow.
Var log_sigmoid(Var a);
Var sum(Var a);
Var mean(Var a);
/// Per-row squared L2 norm: (n, m) -> (n, 1).
Var row_sq_norm(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace siddm
