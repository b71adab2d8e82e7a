#pragma once

// Dense float64 tensors with a tape-based reverse-mode differentiation graph.
//
// A Graph owns every intermediate value it produces. Ops are appended in
// execution order, so reverse index order is a valid topological order for
// the backward pass. Graphs are single-threaded objects; independent graphs
// share no state and may live on different threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace permseq {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Row-major access into the trailing two axes of a rank-2 tensor.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_.back() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_.back() + c]; }

  double item() const;
  bool all_finite() const noexcept;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

enum class OpKind : std::uint8_t {
  kInput,
  kParameter,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddBias,
  kScale,
  kRelu,
  kExp,
  kLog,
  kSquare,
  kSum,
  kMean,
  kRowSum,
  kColSum,
  kRowNormalize,
  kColNormalize,
  kLogRowNormalize,
  kLogColNormalize,
  kSoftmax,
  kLogSoftmax,
  kMulConst,
  kReshape,
  kShiftSteps,
  kRepeatSteps,
  kRepeatBatch,
};

const char* op_name(OpKind kind);

// Handle to a node inside a Graph.
struct Var {
  std::size_t index = 0;
  friend bool operator==(Var, Var) = default;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves. Inputs never receive gradients; parameters always do.
  Var input(Tensor value);
  Var parameter(Tensor value);

  // a[m,k] x b[k,n]
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // x[..., n] + bias[n] on every trailing row.
  Var add_bias(Var x, Var bias);
  Var scale(Var x, double factor);
  // Subgradient at 0 is 0.
  Var relu(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var square(Var x);
  Var sum(Var x);
  Var mean(Var x);

  // Matrix ops act on the trailing two axes; leading axes are a batch.
  Var row_sum(Var x);
  Var col_sum(Var x);
  Var row_normalize(Var x);
  Var col_normalize(Var x);
  Var log_row_normalize(Var x);
  Var log_col_normalize(Var x);

  // Over the last axis.
  Var softmax(Var x);
  Var log_softmax(Var x);

  // Elementwise product with a constant tensor (masks, one-hot selections).
  Var mul_const(Var x, const Tensor& factor);
  Var reshape(Var x, Shape shape);

  // x[B,T,C] -> y[B,T,C] with y[:,t] = x[:,t-offset], zero for t < offset.
  Var shift_steps(Var x, std::size_t offset);
  // x[B,C] -> y[B,T,C] with every step equal to x.
  Var repeat_steps(Var x, std::size_t steps);
  // x[T,C] -> y[B,T,C] with every batch entry equal to x.
  Var repeat_batch(Var x, std::size_t batch);

  // Accumulates d(loss)/d(node) into every node that requires a gradient.
  // Repeated calls accumulate; call zero_grad() between passes.
  void backward(Var loss);
  void zero_grad();

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  // Zero tensor of the node's shape when no gradient has reached it.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  OpKind kind(Var v) const { return nodes_.at(v.index).kind; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t backward_visits() const noexcept { return backward_visits_; }

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    Tensor aux;
    double scalar = 0.0;
    std::size_t param = 0;
    bool requires_grad = false;
  };

  Var push(OpKind kind, std::vector<std::size_t> inputs, Tensor value);
  const Node& node(Var v) const { return nodes_.at(v.index); }
  Tensor& grad_buffer(std::size_t index);
  // exp(value) when the node keeps it (log-normalisation outputs), else nullptr.
  const double* stored_exp(Var v) const;
  void backward_node(std::size_t index);

  std::vector<Node> nodes_;
  std::size_t backward_visits_ = 0;
};

// Builds a scalar function of a single tensor argument inside a fresh graph.
using ScalarFunction = std::function<Var(Graph&, Var)>;

// Max over coordinates of |analytic - central| / (|central| + 1e-8).
// epsilon must lie in [1e-8, 1e-3].
double finite_difference_check(const ScalarFunction& f, const Tensor& point, double epsilon);

}  // namespace permseq
