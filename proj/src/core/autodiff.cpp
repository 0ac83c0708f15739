#include "siddm/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "siddm/error.hpp"

namespace siddm {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Graph& same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) {
    fail(ErrorKind::InvalidArgument,
         std::string(op) + ": operands belong to different graphs");
  }
  return a.graph();
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    fail(ErrorKind::Shape, std::string(op) + ": expected a matrix, got " +
                               shape_string(t.shape()));
  }
}

double stable_log_sigmoid(double a) {
  return std::min(a, 0.0) - std::log1p(std::exp(-std::abs(a)));
}

double stable_sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

template <typename F>
Tensor map_values(const Tensor& in, F&& f) {
  Tensor out(in.shape());
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Constant: return "constant";
    case OpKind::Param: return "param";
    case OpKind::Frozen: return "frozen";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddRow: return "add_row";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Log: return "log";
    case OpKind::LogSigmoid: return "log_sigmoid";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::RowSqNorm: return "row_sq_norm";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::StopGradient: return "stop_gradient";
    case OpKind::Custom: return "custom";
  }
  return "?";
}

Graph& Var::graph() const {
  if (!graph_) fail(ErrorKind::InvalidArgument, "use of an unbound Var");
  return *graph_;
}

const Tensor& Var::value() const { return graph().value(id_); }

const Tensor& Graph::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.bound ? *node.bound : node.owned;
}

void Graph::check_finite(const Tensor& value, const std::string& op) const {
  if (!value.all_finite()) {
    fail(ErrorKind::NonFinite, "non-finite output from op '" + op + "' (node " +
                                   std::to_string(nodes_.size()) + ")");
  }
}

Var Graph::constant(Tensor value) {
  check_finite(value, "constant");
  Node node;
  node.op = OpKind::Constant;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::bind(Tensor& tensor, OpKind kind) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].bound == &tensor) {
      if (nodes_[i].op != kind) {
        fail(ErrorKind::InvalidArgument,
             "tensor bound both as trainable and frozen on one graph");
      }
      return Var(this, i);
    }
  }
  check_finite(tensor, op_name(kind));
  Node node;
  node.op = kind;
  node.bound = &tensor;
  node.requires_grad = kind == OpKind::Param;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Tensor& tensor) { return bind(tensor, OpKind::Param); }
Var Graph::frozen(Tensor& tensor) { return bind(tensor, OpKind::Frozen); }

Var Graph::record(OpKind op, std::vector<Var> inputs, Tensor value,
                  double arg) {
  check_finite(value, op_name(op));
  Node node;
  node.op = op;
  node.owned = std::move(value);
  node.arg = arg;
  for (const Var& in : inputs) {
    if (&in.graph() != this) {
      fail(ErrorKind::InvalidArgument,
           std::string(op_name(op)) + ": input from another graph");
    }
    node.inputs.push_back(in.id());
    if (op != OpKind::StopGradient && nodes_[in.id()].requires_grad) {
      node.requires_grad = true;
    }
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::custom(std::vector<Var> inputs, Tensor value,
                  CustomBackward backward, std::string name) {
  Var out = record(OpKind::Custom, std::move(inputs), std::move(value));
  nodes_.back().custom = std::move(backward);
  nodes_.back().name = std::move(name);
  return out;
}

double Graph::min_kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const Node& node : nodes_) {
    if (node.op != OpKind::LeakyRelu) continue;
    for (double v : value(node.inputs[0]).data()) {
      margin = std::min(margin, std::abs(v));
    }
  }
  return margin;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) {
    fail(ErrorKind::InvalidArgument, "backward: loss from another graph");
  }
  const Tensor& loss_value = loss.value();
  if (loss_value.size() != 1) {
    fail(ErrorKind::Shape, "backward: loss must be a scalar, got shape " +
                               shape_string(loss_value.shape()));
  }

  // Only nodes that actually receive gradient get a buffer; anything cut off
  // by stop_gradient stays empty and is skipped.
  std::vector<std::vector<double>> grads(nodes_.size());
  if (nodes_[loss.id()].requires_grad) grads[loss.id()].assign(1, 1.0);

  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    if (grads[k].empty()) continue;
    const Node& node = nodes_[k];
    if (node.inputs.empty()) continue;
    for (std::size_t in : node.inputs) {
      if (nodes_[in].requires_grad && grads[in].empty()) {
        grads[in].assign(value(in).size(), 0.0);
      }
    }
    backward_node(node, grads[k], grads);
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (!node.bound) continue;
    auto& out = node.bound->grad();
    if (node.op == OpKind::Param && !grads[i].empty()) {
      for (double g : grads[i]) {
        if (!std::isfinite(g)) {
          fail(ErrorKind::NonFinite, "backward: non-finite parameter gradient");
        }
      }
      out = std::move(grads[i]);
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
  }
}

void Graph::backward_node(const Node& node, std::span<const double> g,
                          std::vector<std::vector<double>>& grads) {
  auto grad_of = [&](std::size_t slot) -> std::vector<double>* {
    const std::size_t id = node.inputs[slot];
    return nodes_[id].requires_grad ? &grads[id] : nullptr;
  };
  auto input = [&](std::size_t slot) -> const Tensor& {
    return value(node.inputs[slot]);
  };

  switch (node.op) {
    case OpKind::Constant:
    case OpKind::Param:
    case OpKind::Frozen:
    case OpKind::StopGradient:
      return;
    case OpKind::MatMul: {
      const Tensor& a = input(0);
      const Tensor& b = input(1);
      ConstMap am(a.data().data(), a.rows(), a.cols());
      ConstMap bm(b.data().data(), b.rows(), b.cols());
      ConstMap gm(g.data(), a.rows(), b.cols());
      if (auto* ga = grad_of(0)) {
        MutMap(ga->data(), a.rows(), a.cols()).noalias() += gm * bm.transpose();
      }
      if (auto* gb = grad_of(1)) {
        MutMap(gb->data(), b.rows(), b.cols()).noalias() += am.transpose() * gm;
      }
      return;
    }
    case OpKind::Add:
    case OpKind::Sub: {
      const double sign = node.op == OpKind::Sub ? -1.0 : 1.0;
      if (auto* ga = grad_of(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = grad_of(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
      }
      return;
    }
    case OpKind::Mul: {
      const auto a = input(0).data();
      const auto b = input(1).data();
      if (auto* ga = grad_of(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b[i];
      }
      if (auto* gb = grad_of(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a[i];
      }
      return;
    }
    case OpKind::Scale: {
      if (auto* ga = grad_of(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += node.arg * g[i];
      }
      return;
    }
    case OpKind::AddRow: {
      const std::size_t cols = input(0).cols();
      if (auto* ga = grad_of(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gr = grad_of(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gr)[i % cols] += g[i];
      }
      return;
    }
    case OpKind::LeakyRelu: {
      if (auto* ga = grad_of(0)) {
        const auto a = input(0).data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*ga)[i] += a[i] > 0 ? g[i] : node.arg * g[i];
        }
      }
      return;
    }
    case OpKind::Sigmoid: {
      if (auto* ga = grad_of(0)) {
        const auto y = node.owned.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
        }
      }
      return;
    }
    case OpKind::Log: {
      if (auto* ga = grad_of(0)) {
        const auto a = input(0).data();
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / a[i];
      }
      return;
    }
    case OpKind::LogSigmoid: {
      if (auto* ga = grad_of(0)) {
        const auto a = input(0).data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*ga)[i] += g[i] * stable_sigmoid(-a[i]);
        }
      }
      return;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      if (auto* ga = grad_of(0)) {
        const double w =
            node.op == OpKind::Mean ? g[0] / static_cast<double>(ga->size())
                                    : g[0];
        for (double& v : *ga) v += w;
      }
      return;
    }
    case OpKind::RowSqNorm: {
      if (auto* ga = grad_of(0)) {
        const Tensor& a = input(0);
        const std::size_t cols = a.cols();
        const auto av = a.data();
        for (std::size_t i = 0; i < av.size(); ++i) {
          (*ga)[i] += 2.0 * av[i] * g[i / cols];
        }
      }
      return;
    }
    case OpKind::ConcatCols: {
      const std::size_t rows = node.owned.rows();
      const std::size_t total = node.owned.cols();
      std::size_t offset = 0;
      for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
        const std::size_t cols = input(slot).cols();
        if (auto* gp = grad_of(slot)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              (*gp)[r * cols + c] += g[r * total + offset + c];
            }
          }
        }
        offset += cols;
      }
      return;
    }
    case OpKind::Custom: {
      std::vector<std::span<double>> spans;
      spans.reserve(node.inputs.size());
      for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
        auto* gp = grad_of(slot);
        spans.emplace_back(gp ? std::span<double>(*gp) : std::span<double>());
      }
      node.custom(g, spans);
      return;
    }
  }
}

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) {
    fail(ErrorKind::Shape, "matmul: shapes " + shape_string(av.shape()) +
                               " and " + shape_string(bv.shape()) +
                               " are incompatible");
  }
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  MutMap(out.data().data(), av.rows(), bv.cols()).noalias() =
      ConstMap(av.data().data(), av.rows(), av.cols()) *
      ConstMap(bv.data().data(), bv.rows(), bv.cols());
  return g.record(OpKind::MatMul, {a, b}, std::move(out));
}

namespace {

template <typename F>
Var binary(Var a, Var b, OpKind op, F&& f) {
  Graph& g = same_graph(a, b, op_name(op));
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check_same_shape(av.shape(), bv.shape(), op_name(op));
  Tensor out(av.shape());
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = f(av[i], bv[i]);
  return g.record(op, {a, b}, std::move(out));
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, OpKind::Add, [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
  return binary(a, b, OpKind::Sub, [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
  return binary(a, b, OpKind::Mul, [](double x, double y) { return x * y; });
}

Var scale(Var a, double s) {
  Tensor out = map_values(a.value(), [s](double v) { return s * v; });
  return a.graph().record(OpKind::Scale, {a}, std::move(out), s);
}

Var add_row(Var a, Var row) {
  Graph& g = same_graph(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_rank2(av, "add_row");
  if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != av.cols()) {
    fail(ErrorKind::Shape, "add_row: shapes " + shape_string(av.shape()) +
                               " and " + shape_string(rv.shape()) +
                               " are incompatible");
  }
  Tensor out(av.shape());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + rv[i % cols];
  return g.record(OpKind::AddRow, {a, row}, std::move(out));
}

Var leaky_relu(Var a, double slope) {
  Tensor out =
      map_values(a.value(), [slope](double v) { return v > 0 ? v : slope * v; });
  return a.graph().record(OpKind::LeakyRelu, {a}, std::move(out), slope);
}

Var sigmoid(Var a) {
  Tensor out = map_values(a.value(), stable_sigmoid);
  return a.graph().record(OpKind::Sigmoid, {a}, std::move(out));
}

Var log(Var a) {
  Tensor out = map_values(a.value(), [](double v) { return std::log(v); });
  return a.graph().record(OpKind::Log, {a}, std::move(out));
}

Var log_sigmoid(Var a) {
  Tensor out = map_values(a.value(), stable_log_sigmoid);
  return a.graph().record(OpKind::LogSigmoid, {a}, std::move(out));
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph().record(OpKind::Sum, {a}, Tensor::scalar(total));
}

Var mean(Var a) {
  double total = 0.0;
  const Tensor& av = a.value();
  for (double v : av.data()) total += v;
  return a.graph().record(OpKind::Mean, {a},
                          Tensor::scalar(total / static_cast<double>(av.size())));
}

Var row_sq_norm(Var a) {
  const Tensor& av = a.value();
  require_rank2(av, "row_sq_norm");
  Tensor out = Tensor::matrix(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) acc += av(r, c) * av(r, c);
    out[r] = acc;
  }
  return a.graph().record(OpKind::RowSqNorm, {a}, std::move(out));
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::InvalidArgument, "concat_cols: no inputs");
  Graph& g = parts.front().graph();
  const std::size_t rows = parts.front().value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_graph(parts.front(), p, "concat_cols");
    const Tensor& pv = p.value();
    require_rank2(pv, "concat_cols");
    if (pv.rows() != rows) {
      fail(ErrorKind::Shape, "concat_cols: shapes " +
                                 shape_string(parts.front().shape()) + " and " +
                                 shape_string(pv.shape()) +
                                 " differ in row count");
    }
    total += pv.cols();
  }
  Tensor out = Tensor::matrix(rows, total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, offset + c) = pv(r, c);
    }
    offset += pv.cols();
  }
  return g.record(OpKind::ConcatCols, parts, std::move(out));
}

Var stop_gradient(Var a) {
  Tensor copy(a.value().shape(),
              std::vector<double>(a.value().data().begin(),
                                  a.value().data().end()));
  return a.graph().record(OpKind::StopGradient, {a}, std::move(copy));
}

}  // namespace siddm
