#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "hpf/autodiff/tensor.hpp"

namespace hpf::ad {

enum class Op {
  leaf,
  constant,
  matmul,
  add,
  sub,
  multiply,
  scale,
  add_scalar,
  concat,
  slice,
  reshape,
  relu,
  elu,
  tanh,
  sigmoid,
  abs,
  exp,
  log,
  sum,
  sum_axis,
  mean,
  max_over_axis,
  softmax_over_axis,
  log_softmax_over_axis,
  gather_along_axis,
  squared_error,
  stop_gradient,
  gru_cell,
};

std::string_view op_name(Op op);

inline constexpr float kLogEpsilon = 1e-10f;

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const;
  float item() const { return value().item(); }
  bool requires_grad() const;
};

/// Define-by-run tape. Nodes are appended in evaluation order, so every
/// node's inputs precede it; backward walks the tape in reverse.
class Graph {
 public:
  /// With `track_gradients == false` no node requires a gradient and
  /// backward() is unavailable; parameters are read in place.
  explicit Graph(bool track_gradients = true);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. backward() accumulates into `p.grad`.
  Var param(Parameter& p);

  /// Reverse pass from a scalar node.
  void backward(Var loss);

  bool tracking() const { return track_; }
  std::size_t size() const { return nodes_.size(); }
  Op op(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }
  const std::vector<int>& inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }
  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  // Op implementation interface: the free functions below build nodes and
  // append them through push().
  struct Node {
    Op op = Op::constant;
    std::vector<int> inputs;
    Tensor value;
    Parameter* param = nullptr;
    bool needs_grad = false;
    // Saved for backward: axis / slice start / matmul layout, gathered or
    // arg-max indices, and scalar operands.
    int axis = 0;
    int start = 0;
    std::vector<int> index;
    float scalar = 0.0f;
    bool swapped = false;
    // Intermediate activations of fused ops.
    std::vector<float> saved;
  };

  Var push(Node node);

 private:
  Node& node(Var v);
  const Node& node(Var v) const;
  void backward_node(std::size_t id, std::vector<std::vector<float>>& grads);

  bool track_;
  std::vector<Node> nodes_;
};

/// Batched matrix product. `a` is [..., m, k]; `b` is either [k, n]
/// (shared across the batch) or [..., k, n] with identical leading axes.
Var matmul(Var a, Var b);

// Elementwise binary ops. Shapes must match, or one operand's shape must be
// a suffix of the other's (broadcast over leading axes), or it must be a
// single element.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var multiply(Var a, Var b);

Var scale(Var a, float s);
Var add_scalar(Var a, float s);

Var concat(std::span<const Var> parts, int axis);
Var slice(Var a, int axis, int start, int length);
Var reshape(Var a, Shape shape);

Var unary(Var a, Op op);
inline Var relu(Var a) { return unary(a, Op::relu); }
inline Var elu(Var a) { return unary(a, Op::elu); }
inline Var tanh(Var a) { return unary(a, Op::tanh); }
inline Var sigmoid(Var a) { return unary(a, Op::sigmoid); }
inline Var abs(Var a) { return unary(a, Op::abs); }
inline Var exp(Var a) { return unary(a, Op::exp); }
/// log(max(x, 1e-10)).
inline Var log(Var a) { return unary(a, Op::log); }

/// Sum of all elements, shape [1].
Var sum(Var a);
/// Sum over one axis; the axis is removed from the shape.
Var sum_axis(Var a, int axis);
Var mean(Var a);
/// Maximum over one axis (axis removed). The gradient goes to the first
/// maximal element.
Var max_over_axis(Var a, int axis);
Var softmax_over_axis(Var a, int axis);
Var log_softmax_over_axis(Var a, int axis);
/// Picks one element along `axis` per remaining position; `index` has one
/// entry per element of the output (row-major over the remaining axes).
Var gather_along_axis(Var a, std::span<const int> index, int axis);
/// Elementwise (a - b)^2; shapes must match.
Var squared_error(Var a, Var b);
Var stop_gradient(Var a);
/// Fused GRU step. x is [..., in], h is [..., hidden] with the same leading
/// axes; weights are [in, 3*hidden] and [hidden, 3*hidden] with gate blocks
/// (reset, update, candidate), biases [3*hidden]. Returns
/// (1 - z) * h + z * n with n = tanh(x_n + r * h_n).
Var gru_cell(Var x, Var h, Var w_input, Var w_hidden, Var b_input, Var b_hidden);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return multiply(a, b); }

/// Extra arguments for the generic forward() entry point.
struct OpArgs {
  int axis = -1;
  int start = 0;
  int length = 0;
  float scalar = 0.0f;
  std::vector<int> index;
  Shape shape;
};

/// Applies `op` to `inputs`; the tag-dispatched form of the functions above.
Var forward(Op op, std::span<const Var> inputs, const OpArgs& args = {});

}  // namespace hpf::ad
