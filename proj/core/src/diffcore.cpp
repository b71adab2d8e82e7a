#include "permseq/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace permseq {

std::size_t element_count(const Shape& shape) {
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  return count;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(element_count(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + to_string(shape_));
  }
  if (element_count(shape_) != values_.size()) {
    throw std::invalid_argument("tensor shape " + to_string(shape_) + " does not hold " +
                                std::to_string(values_.size()) + " values");
  }
}

double Tensor::item() const {
  if (values_.size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + to_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kColSum: return "col_sum";
    case OpKind::kRowNormalize: return "row_normalize";
    case OpKind::kColNormalize: return "col_normalize";
    case OpKind::kLogRowNormalize: return "log_row_normalize";
    case OpKind::kLogColNormalize: return "log_col_normalize";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kMulConst: return "mul_const";
    case OpKind::kReshape: return "reshape";
    case OpKind::kShiftSteps: return "shift_steps";
    case OpKind::kRepeatSteps: return "repeat_steps";
    case OpKind::kRepeatBatch: return "repeat_batch";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(kind)) + ": shape mismatch " + to_string(a) + " vs " +
                              to_string(b));
}

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const std::string& why) {
  throw std::invalid_argument(std::string(op_name(kind)) + ": " + why + ", got " + to_string(a));
}

void require_finite(OpKind kind, const Tensor& t) {
  if (!t.all_finite()) throw std::domain_error(std::string(op_name(kind)) + ": produced a non-finite value");
}

// Trailing-matrix geometry of a rank >= 2 tensor.
struct MatrixDims {
  std::size_t batch;
  std::size_t rows;
  std::size_t cols;
};

MatrixDims matrix_dims(OpKind kind, const Shape& shape) {
  if (shape.size() < 2) shape_error(kind, shape, "needs rank >= 2");
  std::size_t rows = shape[shape.size() - 2];
  std::size_t cols = shape.back();
  return {element_count(shape) / (rows * cols), rows, cols};
}


// out = x - logsumexp(x) along one strided line; probs = exp(out), kept for
// the backward pass. When exp(x) is already known (x is itself a log-
// normalised tensor, so every entry is <= 0) the exps are reused; lines whose
// mass underflows fall back to the max-shifted form.
void log_normalize_line(const double* x, const double* exp_x, double* out, double* probs, std::size_t count,
                        std::size_t stride) {
  if (exp_x != nullptr) {
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) total += exp_x[i * stride];
    if (total > 1e-200) {
      const double lse = std::log(total);
      const double inv = 1.0 / total;
      for (std::size_t i = 0; i < count; ++i) {
        out[i * stride] = x[i * stride] - lse;
        probs[i * stride] = exp_x[i * stride] * inv;
      }
      return;
    }
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) peak = std::max(peak, x[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) total += (probs[i * stride] = std::exp(x[i * stride] - peak));
  const double lse = peak + std::log(total);
  const double inv = 1.0 / total;
  for (std::size_t i = 0; i < count; ++i) {
    out[i * stride] = x[i * stride] - lse;
    probs[i * stride] *= inv;
  }
}

}  // namespace

Var Graph::push(OpKind kind, std::vector<std::size_t> inputs, Tensor value) {
  Node n;
  n.kind = kind;
  n.requires_grad = kind == OpKind::kParameter;
  for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const double* Graph::stored_exp(Var v) const {
  const Node& n = node(v);
  const bool stored = n.kind == OpKind::kLogRowNormalize || n.kind == OpKind::kLogColNormalize;
  return stored && n.aux.size() == n.value.size() ? n.aux.data() : nullptr;
}

Var Graph::input(Tensor value) { return push(OpKind::kInput, {}, std::move(value)); }

Var Graph::parameter(Tensor value) { return push(OpKind::kParameter, {}, std::move(value)); }

Var Graph::matmul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) shape_error(OpKind::kMatMul, x.shape(), y.shape());
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor out({m, n});
  const double* xp = x.data();
  const double* yp = y.data();
  double* op = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = op + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xp[i * k + p];
      if (s == 0.0) continue;
      const double* yrow = yp + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * yrow[j];
    }
  }
  return push(OpKind::kMatMul, {a.index, b.index}, std::move(out));
}

Var Graph::add(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  if (x.shape() != y.shape()) shape_error(OpKind::kAdd, x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return push(OpKind::kAdd, {a.index, b.index}, std::move(out));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  if (x.shape() != y.shape()) shape_error(OpKind::kSub, x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return push(OpKind::kSub, {a.index, b.index}, std::move(out));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  if (x.shape() != y.shape()) shape_error(OpKind::kMul, x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return push(OpKind::kMul, {a.index, b.index}, std::move(out));
}

Var Graph::add_bias(Var xv, Var bv) {
  const Tensor& x = node(xv).value;
  const Tensor& b = node(bv).value;
  if (b.rank() != 1 || x.shape().back() != b.size()) shape_error(OpKind::kAddBias, x.shape(), b.shape());
  Tensor out = x;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
  return push(OpKind::kAddBias, {xv.index, bv.index}, std::move(out));
}

Var Graph::scale(Var xv, double factor) {
  Tensor out = node(xv).value;
  for (double& v : out.values()) v *= factor;
  Var r = push(OpKind::kScale, {xv.index}, std::move(out));
  nodes_.back().scalar = factor;
  return r;
}

Var Graph::relu(Var xv) {
  Tensor out = node(xv).value;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(OpKind::kRelu, {xv.index}, std::move(out));
}

Var Graph::exp(Var xv) {
  Tensor out = node(xv).value;
  for (double& v : out.values()) v = std::exp(v);
  require_finite(OpKind::kExp, out);
  return push(OpKind::kExp, {xv.index}, std::move(out));
}

Var Graph::log(Var xv) {
  Tensor out = node(xv).value;
  for (double& v : out.values()) {
    if (!(v > 0.0)) throw std::domain_error("log: argument must be strictly positive");
    v = std::log(v);
  }
  return push(OpKind::kLog, {xv.index}, std::move(out));
}

Var Graph::square(Var xv) {
  Tensor out = node(xv).value;
  for (double& v : out.values()) v *= v;
  return push(OpKind::kSquare, {xv.index}, std::move(out));
}

Var Graph::sum(Var xv) {
  double total = 0.0;
  for (double v : node(xv).value.values()) total += v;
  return push(OpKind::kSum, {xv.index}, Tensor::scalar(total));
}

Var Graph::mean(Var xv) {
  const Tensor& x = node(xv).value;
  double total = 0.0;
  for (double v : x.values()) total += v;
  return push(OpKind::kMean, {xv.index}, Tensor::scalar(total / static_cast<double>(x.size())));
}

Var Graph::row_sum(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kRowSum, x.shape());
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  Tensor out(shape);
  for (std::size_t r = 0; r < d.batch * d.rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) total += x[r * d.cols + c];
    out[r] = total;
  }
  return push(OpKind::kRowSum, {xv.index}, std::move(out));
}

Var Graph::col_sum(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kColSum, x.shape());
  Shape shape(x.shape().begin(), x.shape().end() - 2);
  shape.push_back(d.cols);
  Tensor out(shape);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t r = 0; r < d.rows; ++r) {
      for (std::size_t c = 0; c < d.cols; ++c) out[b * d.cols + c] += x[(b * d.rows + r) * d.cols + c];
    }
  }
  return push(OpKind::kColSum, {xv.index}, std::move(out));
}

Var Graph::row_normalize(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kRowNormalize, x.shape());
  Tensor out = x;
  for (std::size_t r = 0; r < d.batch * d.rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) total += x[r * d.cols + c];
    if (!(total > 0.0)) throw std::domain_error("row_normalize: row " + std::to_string(r) + " has non-positive sum");
    for (std::size_t c = 0; c < d.cols; ++c) out[r * d.cols + c] /= total;
  }
  return push(OpKind::kRowNormalize, {xv.index}, std::move(out));
}

Var Graph::col_normalize(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kColNormalize, x.shape());
  Tensor out = x;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.cols; ++c) {
      double total = 0.0;
      for (std::size_t r = 0; r < d.rows; ++r) total += x[(b * d.rows + r) * d.cols + c];
      if (!(total > 0.0)) {
        throw std::domain_error("col_normalize: column " + std::to_string(c) + " has non-positive sum");
      }
      for (std::size_t r = 0; r < d.rows; ++r) out[(b * d.rows + r) * d.cols + c] /= total;
    }
  }
  return push(OpKind::kColNormalize, {xv.index}, std::move(out));
}

Var Graph::log_row_normalize(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kLogRowNormalize, x.shape());
  const double* known = stored_exp(xv);
  Tensor out(x.shape());
  Tensor probs(x.shape());
  for (std::size_t r = 0; r < d.batch * d.rows; ++r) {
    const std::size_t at = r * d.cols;
    log_normalize_line(x.data() + at, known ? known + at : nullptr, out.data() + at, probs.data() + at, d.cols, 1);
  }
  require_finite(OpKind::kLogRowNormalize, out);
  Var v = push(OpKind::kLogRowNormalize, {xv.index}, std::move(out));
  nodes_.back().aux = std::move(probs);
  return v;
}

Var Graph::log_col_normalize(Var xv) {
  const Tensor& x = node(xv).value;
  const auto d = matrix_dims(OpKind::kLogColNormalize, x.shape());
  const double* known = stored_exp(xv);
  Tensor out(x.shape());
  Tensor probs(x.shape());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.cols; ++c) {
      const std::size_t at = b * d.rows * d.cols + c;
      log_normalize_line(x.data() + at, known ? known + at : nullptr, out.data() + at, probs.data() + at, d.rows,
                         d.cols);
    }
  }
  require_finite(OpKind::kLogColNormalize, out);
  Var v = push(OpKind::kLogColNormalize, {xv.index}, std::move(out));
  nodes_.back().aux = std::move(probs);
  return v;
}

Var Graph::softmax(Var xv) {
  const Tensor& x = node(xv).value;
  const std::size_t n = x.shape().back();
  Tensor out = x;
  for (std::size_t r = 0; r < x.size() / n; ++r) {
    double* row = out.data() + r * n;
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += (row[c] = std::exp(row[c] - peak));
    for (std::size_t c = 0; c < n; ++c) row[c] /= total;
  }
  return push(OpKind::kSoftmax, {xv.index}, std::move(out));
}

Var Graph::log_softmax(Var xv) {
  const Tensor& x = node(xv).value;
  const std::size_t n = x.shape().back();
  Tensor out(x.shape());
  Tensor probs(x.shape());
  for (std::size_t r = 0; r < x.size() / n; ++r) {
    log_normalize_line(x.data() + r * n, nullptr, out.data() + r * n, probs.data() + r * n, n, 1);
  }
  require_finite(OpKind::kLogSoftmax, out);
  Var v = push(OpKind::kLogSoftmax, {xv.index}, std::move(out));
  nodes_.back().aux = std::move(probs);
  return v;
}

Var Graph::mul_const(Var xv, const Tensor& factor) {
  const Tensor& x = node(xv).value;
  if (x.shape() != factor.shape()) shape_error(OpKind::kMulConst, x.shape(), factor.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
  Var r = push(OpKind::kMulConst, {xv.index}, std::move(out));
  nodes_.back().aux = factor;
  return r;
}

Var Graph::reshape(Var xv, Shape shape) {
  const Tensor& x = node(xv).value;
  if (element_count(shape) != x.size()) shape_error(OpKind::kReshape, x.shape(), shape);
  std::vector<double> values(x.values().begin(), x.values().end());
  return push(OpKind::kReshape, {xv.index}, Tensor(std::move(shape), std::move(values)));
}

Var Graph::shift_steps(Var xv, std::size_t offset) {
  const Tensor& x = node(xv).value;
  if (x.rank() != 3) shape_error(OpKind::kShiftSteps, x.shape(), "needs [batch, steps, channels]");
  const std::size_t batch = x.dim(0), steps = x.dim(1), channels = x.dim(2);
  Tensor out(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = offset; t < steps; ++t) {
      std::copy_n(x.data() + (b * steps + t - offset) * channels, channels, out.data() + (b * steps + t) * channels);
    }
  }
  Var r = push(OpKind::kShiftSteps, {xv.index}, std::move(out));
  nodes_.back().param = offset;
  return r;
}

Var Graph::repeat_steps(Var xv, std::size_t steps) {
  const Tensor& x = node(xv).value;
  if (x.rank() != 2) shape_error(OpKind::kRepeatSteps, x.shape(), "needs [batch, channels]");
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  Tensor out({batch, steps, channels});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(x.data() + b * channels, channels, out.data() + (b * steps + t) * channels);
    }
  }
  return push(OpKind::kRepeatSteps, {xv.index}, std::move(out));
}

Var Graph::repeat_batch(Var xv, std::size_t batch) {
  const Tensor& x = node(xv).value;
  if (x.rank() != 2) shape_error(OpKind::kRepeatBatch, x.shape(), "needs [steps, channels]");
  Tensor out({batch, x.dim(0), x.dim(1)});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(x.data(), x.size(), out.data() + b * x.size());
  return push(OpKind::kRepeatBatch, {xv.index}, std::move(out));
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Tensor(n.value.shape());
  return n.grad;
}

Tensor& Graph::grad_buffer(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_buffer(loss.index)[0] += 1.0;
  backward_visits_ = 0;
  // Gradients of interior nodes are scratch: clear them after use so a second
  // backward() accumulates only into parameters.
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    ++backward_visits_;
    if (n.kind != OpKind::kParameter) {
      backward_node(i);
      nodes_[i].grad = Tensor();
    }
  }
}

void Graph::backward_node(std::size_t index) {
  // grad_buffer() only touches earlier nodes' tensors, never nodes_ itself.
  const Node& n = nodes_[index];
  const Tensor& g = n.grad;
  const Tensor& y = n.value;
  auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].requires_grad; };
  auto in = [&](std::size_t slot) -> const Tensor& { return nodes_[n.inputs[slot]].value; };

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      return;
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      if (wants(0)) {
        Tensor& ga = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * cols;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.data() + p * cols;
            // Four partial sums let the compiler keep several lanes busy.
            double acc[4] = {0.0, 0.0, 0.0, 0.0};
            std::size_t j = 0;
            for (; j + 4 <= cols; j += 4) {
              for (std::size_t l = 0; l < 4; ++l) acc[l] += grow[j + l] * brow[j + l];
            }
            for (; j < cols; ++j) acc[0] += grow[j] * brow[j];
            ga[i * k + p] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
          }
        }
      }
      if (wants(1)) {
        Tensor& gb = grad_buffer(n.inputs[1]);
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * cols;
          for (std::size_t p = 0; p < k; ++p) {
            const double s = a[i * k + p];
            if (s == 0.0) continue;
            double* gbrow = gb.data() + p * cols;
            for (std::size_t j = 0; j < cols; ++j) gbrow[j] += s * grow[j];
          }
        }
      }
      return;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const double sign = n.kind == OpKind::kAdd ? 1.0 : -1.0;
      if (wants(0)) {
        Tensor& ga = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_buffer(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      return;
    }
    case OpKind::kMul: {
      if (wants(0)) {
        const Tensor& b = in(1);
        Tensor& ga = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        const Tensor& a = in(0);
        Tensor& gb = grad_buffer(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }
    case OpKind::kAddBias: {
      if (wants(0)) {
        Tensor& gx = grad_buffer(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_buffer(n.inputs[1]);
        const std::size_t width = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % width] += g[i];
      }
      return;
    }
    case OpKind::kScale: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.scalar * g[i];
      return;
    }
    case OpKind::kRelu: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (y[i] > 0.0) gx[i] += g[i];
      }
      return;
    }
    case OpKind::kExp: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
      return;
    }
    case OpKind::kLog: {
      const Tensor& x = in(0);
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
      return;
    }
    case OpKind::kSquare: {
      const Tensor& x = in(0);
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.0 * x[i] * g[i];
      return;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      double share = g[0];
      if (n.kind == OpKind::kMean) share /= static_cast<double>(gx.size());
      for (double& v : gx.values()) v += share;
      return;
    }
    case OpKind::kRowSum: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t cols = gx.shape().back();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / cols];
      return;
    }
    case OpKind::kColSum: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const auto d = matrix_dims(n.kind, gx.shape());
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t r = 0; r < d.rows; ++r) {
          for (std::size_t c = 0; c < d.cols; ++c) gx[(b * d.rows + r) * d.cols + c] += g[b * d.cols + c];
        }
      }
      return;
    }
    case OpKind::kRowNormalize: {
      const Tensor& x = in(0);
      Tensor& gx = grad_buffer(n.inputs[0]);
      const auto d = matrix_dims(n.kind, x.shape());
      for (std::size_t r = 0; r < d.batch * d.rows; ++r) {
        const std::size_t base = r * d.cols;
        double total = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < d.cols; ++c) {
          total += x[base + c];
          dot += g[base + c] * y[base + c];
        }
        for (std::size_t c = 0; c < d.cols; ++c) gx[base + c] += (g[base + c] - dot) / total;
      }
      return;
    }
    case OpKind::kColNormalize: {
      const Tensor& x = in(0);
      Tensor& gx = grad_buffer(n.inputs[0]);
      const auto d = matrix_dims(n.kind, x.shape());
      for (std::size_t b = 0; b < d.batch; ++b) {
        const std::size_t base = b * d.rows * d.cols;
        for (std::size_t c = 0; c < d.cols; ++c) {
          double total = 0.0, dot = 0.0;
          for (std::size_t r = 0; r < d.rows; ++r) {
            const std::size_t i = base + r * d.cols + c;
            total += x[i];
            dot += g[i] * y[i];
          }
          for (std::size_t r = 0; r < d.rows; ++r) {
            const std::size_t i = base + r * d.cols + c;
            gx[i] += (g[i] - dot) / total;
          }
        }
      }
      return;
    }
    case OpKind::kLogRowNormalize:
    case OpKind::kLogSoftmax: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t cols = y.shape().back();
      for (std::size_t r = 0; r < y.size() / cols; ++r) {
        const std::size_t base = r * cols;
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += g[base + c];
        for (std::size_t c = 0; c < cols; ++c) gx[base + c] += g[base + c] - n.aux[base + c] * total;
      }
      return;
    }
    case OpKind::kLogColNormalize: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const auto d = matrix_dims(n.kind, y.shape());
      std::vector<double> totals(d.cols);
      for (std::size_t b = 0; b < d.batch; ++b) {
        const std::size_t base = b * d.rows * d.cols;
        std::fill(totals.begin(), totals.end(), 0.0);
        for (std::size_t r = 0; r < d.rows; ++r) {
          for (std::size_t c = 0; c < d.cols; ++c) totals[c] += g[base + r * d.cols + c];
        }
        for (std::size_t r = 0; r < d.rows; ++r) {
          for (std::size_t c = 0; c < d.cols; ++c) {
            const std::size_t i = base + r * d.cols + c;
            gx[i] += g[i] - n.aux[i] * totals[c];
          }
        }
      }
      return;
    }
    case OpKind::kSoftmax: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t cols = y.shape().back();
      for (std::size_t r = 0; r < y.size() / cols; ++r) {
        const std::size_t base = r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[base + c] * y[base + c];
        for (std::size_t c = 0; c < cols; ++c) gx[base + c] += y[base + c] * (g[base + c] - dot);
      }
      return;
    }
    case OpKind::kMulConst: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.aux[i];
      return;
    }
    case OpKind::kReshape: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      return;
    }
    case OpKind::kShiftSteps: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t batch = y.dim(0), steps = y.dim(1), channels = y.dim(2);
      const std::size_t offset = n.param;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = offset; t < steps; ++t) {
          const double* src = g.data() + (b * steps + t) * channels;
          double* dst = gx.data() + (b * steps + t - offset) * channels;
          for (std::size_t c = 0; c < channels; ++c) dst[c] += src[c];
        }
      }
      return;
    }
    case OpKind::kRepeatSteps: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t batch = y.dim(0), steps = y.dim(1), channels = y.dim(2);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t c = 0; c < channels; ++c) gx[b * channels + c] += g[(b * steps + t) * channels + c];
        }
      }
      return;
    }
    case OpKind::kRepeatBatch: {
      Tensor& gx = grad_buffer(n.inputs[0]);
      const std::size_t block = gx.size();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i % block] += g[i];
      return;
    }
  }
}

double finite_difference_check(const ScalarFunction& f, const Tensor& point, double epsilon) {
  if (!(epsilon >= 1e-8 && epsilon <= 1e-3)) {
    throw std::invalid_argument("finite_difference_check: epsilon must lie in [1e-8, 1e-3]");
  }
  Tensor analytic;
  {
    Graph g;
    Var x = g.parameter(point);
    Var loss = f(g, x);
    if (!std::isfinite(g.value(loss).item())) throw std::domain_error("finite_difference_check: non-finite value");
    g.backward(loss);
    analytic = g.grad(x);
  }
  auto evaluate = [&](const Tensor& at) {
    Graph g;
    Var x = g.input(at);
    const double value = g.value(f(g, x)).item();
    if (!std::isfinite(value)) throw std::domain_error("finite_difference_check: non-finite value");
    return value;
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + epsilon;
    const double up = evaluate(probe);
    probe[i] = point[i] - epsilon;
    const double down = evaluate(probe);
    probe[i] = point[i];
    const double central = (up - down) / (2.0 * epsilon);
    worst = std::max(worst, std::abs(analytic[i] - central) / (std::abs(central) + 1e-8));
  }
  return worst;
}

}  // namespace permseq
