#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dkstn/tensor.hpp"

namespace dkstn {

/// A trainable tensor with its gradient accumulator. The gradient always has
/// the shape of the value.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
};

/// Records operations in execution order so the backward sweep can visit them
/// in reverse. Every recorded op's inputs precede it, which makes the reverse
/// index order a valid topological order.
class Tape {
 public:
  /// Called during backward with the node's own id; must add into the grads of
  /// inputs that require them (see grad_for()).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);  // requires_grad leaf whose gradient is read via grad()
  Var param(Parameter& p);  // gradient is added into p.grad after backward()

  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient slot of a node, allocated on first use. Returns nullptr when the
  /// node does not require a gradient.
  Tensor* grad_for(std::size_t id);

  /// Gradient of a node after backward(); zeros if never reached.
  Tensor grad(Var v) const;

  /// Seeds d(root)/d(root) with ones (or the supplied seed) and sweeps.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);

  /// Number of times each node was visited by the last backward sweep.
  const std::vector<std::size_t>& visit_counts() const noexcept { return visits_; }

  /// Debug mode: every recorded value is checked for NaN/Inf.
  void set_check_finite(bool enabled) noexcept { check_finite_ = enabled; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<std::size_t> visits_;
  bool check_finite_ = false;
  bool swept_ = false;
};

// Broadcasting elementwise ops: trailing dimensions must match or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

Var scale(Var a, double factor);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_lastdim(Var a);

Var sum(Var a);   // -> [1]
Var mean(Var a);  // -> [1]

Var matmul(Var a, Var b);  // [m,k] x [k,n]
Var bmm(Var a, Var b);     // [B,m,k] x [B,k,n]
Var linear(Var x, Var weight, Var bias);  // x[N,in] * W[in,out] + b[out]

Var reshape(Var a, Shape shape);
Var permute(Var a, std::vector<std::size_t> axes);
Var transpose_last2(Var a);

Var concat_lastdim(const std::vector<Var>& parts);
Var slice_lastdim(Var a, std::size_t begin, std::size_t length);
Var stack_axis1(const std::vector<Var>& parts);  // k x [B,D] -> [B,k,D]
Var select_axis1(Var a, std::size_t index);        // [B,k,D] -> [B,D]

/// Cross-correlation with zero padding. x is [C,H,W] or [N,C,H,W]; kernel is
/// [Cout,C,kh,kw] with odd kh, kw; bias, when given, is [Cout].
Var conv2d(Var x, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t padding);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

namespace kernels {

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);
// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

}  // namespace kernels

}  // namespace dkstn
