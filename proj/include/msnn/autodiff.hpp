#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "msnn/tensor.hpp"

namespace msnn::autodiff {

class Tape;

/// Handle to a recorded node. Cheap to copy; only meaningful together with
/// the tape that produced it.
struct Var {
  int id = -1;
  int rows = 0;
  int cols = 1;
  bool valid() const { return id >= 0; }
  int size() const { return rows * cols; }
};

struct Gradients {
  std::vector<int> leaf_ids;
  std::vector<Tensor> grads;  // same order as leaf_ids
  const Tensor& at(Var leaf) const;
};

/// Reverse-mode tape over dense tensors. Nodes are recorded in execution
/// order (inputs always precede consumers) and the backward pass visits them
/// in exact reverse order, so adjoint accumulation is deterministic.
///
/// Values live in one flat arena that survives reset(), keeping repeated
/// record/backward cycles allocation-free in steady state. A tape is
/// single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  Var leaf(const Tensor& t);
  Var leaf(std::span<const double> v, int rows, int cols);
  Var constant(const Tensor& t);
  Var constant(std::span<const double> v, int rows, int cols);
  Var constant_scalar(double v);

  // Elementwise; shapes must match.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);  // errors when any |denominator| < 1e-30

  Var neg(Var a);
  Var exp(Var a);
  Var log(Var a);  // errors on non-positive input
  Var logistic(Var a);

  /// c0 * a + c1 elementwise, constants folded into the node.
  Var affine(Var a, double c0, double c1);
  Var scale(Var a, double c0) { return affine(a, c0, 0.0); }

  /// w is (n x m), v is (m); result (n).
  Var matvec(Var w, Var v);

  /// Scalar sum of all elements.
  Var sum(Var a);

  /// Concatenates vectors/scalars into one vector.
  Var stack(std::span<const Var> parts);

  /// log(sum(exp(a))) over a vector, computed with the usual max shift.
  /// Adjoint is softmax(a).
  Var logsumexp(Var a);

  std::span<const double> value(Var v) const;
  double scalar_value(Var v) const;

  /// dLoss/dLeaf for each requested leaf. The tape itself is unchanged and
  /// re-runnable; repeated calls give bit-identical results. Throws
  /// NonFiniteError when a requested gradient is NaN/Inf.
  Gradients backward(Var loss, std::span<const Var> leaves) const;

  void reset();
  size_t node_count() const { return nodes_.size(); }
  size_t value_count() const { return vals_.size(); }

 private:
  enum class Op : uint8_t {
    Const,
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Logistic,
    Affine,
    Matvec,
    Sum,
    Stack,
    LogSumExp,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    int off = 0;   // value offset into the arena
    int rows = 0;
    int cols = 1;
    int extra = -1;  // varargs_ start for Stack (count = b)
  };

  Var push(Op op, int rows, int cols, int a, int b, double c0 = 0.0, double c1 = 0.0,
           int extra = -1);
  std::span<double> slot(const Node& n) { return {vals_.data() + n.off, static_cast<size_t>(n.rows) * n.cols}; }
  std::span<const double> slot(const Node& n) const {
    return {vals_.data() + n.off, static_cast<size_t>(n.rows) * n.cols};
  }
  Var binary_elementwise(Op op, Var a, Var b);
  void check_same_shape(Var a, Var b) const;

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<int> varargs_;
  mutable std::vector<double> adj_;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  int worst_leaf = -1;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// f records a scalar loss for the given leaf variables. Compares backward()
/// against central finite differences (f(x+eps) - f(x-eps)) / (2 eps), with
/// relative error |a - n| / max(|a|, |n|, 1e-12).
using RecordedFn = std::function<Var(Tape&, std::span<const Var>)>;
GradcheckReport gradcheck(const RecordedFn& f, const std::vector<Tensor>& leaf_values,
                          double eps = 1e-6, double tol = 1e-4);

}  // namespace msnn::autodiff
