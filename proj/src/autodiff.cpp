#include "msnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "msnn/errors.hpp"
#include "msnn/kernels.hpp"
#include "msnn/mathfn.hpp"

namespace msnn::autodiff {

namespace {
constexpr double kDivGuard = 1e-30;
}  // namespace

const Tensor& Gradients::at(Var leaf) const {
  for (size_t i = 0; i < leaf_ids.size(); ++i)
    if (leaf_ids[i] == leaf.id) return grads[i];
  throw ShapeError("Gradients::at: leaf was not requested in backward()");
}

Var Tape::push(Op op, int rows, int cols, int a, int b, double c0, double c1, int extra) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c0 = c0;
  n.c1 = c1;
  n.rows = rows;
  n.cols = cols;
  n.extra = extra;
  n.off = static_cast<int>(vals_.size());
  vals_.resize(vals_.size() + static_cast<size_t>(rows) * cols);
  nodes_.push_back(n);
  return Var{static_cast<int>(nodes_.size()) - 1, rows, cols};
}

void Tape::check_same_shape(Var a, Var b) const {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError("tape: shape mismatch (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
}

Var Tape::leaf(const Tensor& t) { return leaf(t.data, t.rows, t.cols); }

Var Tape::leaf(std::span<const double> v, int rows, int cols) {
  Var out = push(Op::Leaf, rows, cols, -1, -1);
  std::copy(v.begin(), v.end(), slot(nodes_.back()).begin());
  return out;
}

Var Tape::constant(const Tensor& t) { return constant(t.data, t.rows, t.cols); }

Var Tape::constant(std::span<const double> v, int rows, int cols) {
  Var out = push(Op::Const, rows, cols, -1, -1);
  std::copy(v.begin(), v.end(), slot(nodes_.back()).begin());
  return out;
}

Var Tape::constant_scalar(double v) {
  Var out = push(Op::Const, 1, 1, -1, -1);
  vals_[static_cast<size_t>(nodes_.back().off)] = v;
  return out;
}

Var Tape::binary_elementwise(Op op, Var a, Var b) {
  check_same_shape(a, b);
  Var out = push(op, a.rows, a.cols, a.id, b.id);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vb = slot(nodes_[static_cast<size_t>(b.id)]);
  auto vo = slot(nodes_.back());
  const size_t n = vo.size();
  switch (op) {
    case Op::Add:
      for (size_t i = 0; i < n; ++i) vo[i] = va[i] + vb[i];
      break;
    case Op::Sub:
      for (size_t i = 0; i < n; ++i) vo[i] = va[i] - vb[i];
      break;
    case Op::Mul:
      for (size_t i = 0; i < n; ++i) vo[i] = va[i] * vb[i];
      break;
    case Op::Div:
      for (size_t i = 0; i < n; ++i) {
        if (std::abs(vb[i]) < kDivGuard)
          throw DomainError("tape div: |denominator| below guard 1e-30");
        vo[i] = va[i] / vb[i];
      }
      break;
    default:
      throw ShapeError("tape: not a binary elementwise op");
  }
  return out;
}

Var Tape::add(Var a, Var b) { return binary_elementwise(Op::Add, a, b); }
Var Tape::sub(Var a, Var b) { return binary_elementwise(Op::Sub, a, b); }
Var Tape::mul(Var a, Var b) { return binary_elementwise(Op::Mul, a, b); }
Var Tape::div(Var a, Var b) { return binary_elementwise(Op::Div, a, b); }

Var Tape::neg(Var a) {
  Var out = push(Op::Neg, a.rows, a.cols, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vo = slot(nodes_.back());
  for (size_t i = 0; i < vo.size(); ++i) vo[i] = -va[i];
  return out;
}

Var Tape::exp(Var a) {
  Var out = push(Op::Exp, a.rows, a.cols, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vo = slot(nodes_.back());
  for (size_t i = 0; i < vo.size(); ++i) vo[i] = std::exp(va[i]);
  return out;
}

Var Tape::log(Var a) {
  Var out = push(Op::Log, a.rows, a.cols, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vo = slot(nodes_.back());
  for (size_t i = 0; i < vo.size(); ++i) {
    if (!(va[i] > 0.0)) throw DomainError("tape log: non-positive input");
    vo[i] = std::log(va[i]);
  }
  return out;
}

Var Tape::logistic(Var a) {
  Var out = push(Op::Logistic, a.rows, a.cols, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vo = slot(nodes_.back());
  for (size_t i = 0; i < vo.size(); ++i) vo[i] = logistic_fn(va[i]);
  return out;
}

Var Tape::affine(Var a, double c0, double c1) {
  Var out = push(Op::Affine, a.rows, a.cols, a.id, -1, c0, c1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  auto vo = slot(nodes_.back());
  for (size_t i = 0; i < vo.size(); ++i) vo[i] = c0 * va[i] + c1;
  return out;
}

Var Tape::matvec(Var w, Var v) {
  if (v.cols != 1) throw ShapeError("matvec: v must be a column vector");
  if (w.cols != v.rows)
    throw ShapeError("matvec: inner dimensions differ (" + std::to_string(w.cols) + " vs " +
                     std::to_string(v.rows) + ")");
  Var out = push(Op::Matvec, w.rows, 1, w.id, v.id);
  auto vw = slot(nodes_[static_cast<size_t>(w.id)]);
  auto vv = slot(nodes_[static_cast<size_t>(v.id)]);
  kernels::serial::matvec(vw, w.rows, w.cols, vv, slot(nodes_.back()));
  return out;
}

Var Tape::sum(Var a) {
  Var out = push(Op::Sum, 1, 1, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  double acc = 0.0;
  for (double x : va) acc += x;
  vals_[static_cast<size_t>(nodes_.back().off)] = acc;
  return out;
}

Var Tape::stack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack: needs at least one input");
  int total = 0;
  for (Var p : parts) {
    if (p.cols != 1) throw ShapeError("stack: inputs must be vectors or scalars");
    total += p.rows;
  }
  const int extra = static_cast<int>(varargs_.size());
  for (Var p : parts) varargs_.push_back(p.id);
  Var out = push(Op::Stack, total, 1, -1, static_cast<int>(parts.size()), 0.0, 0.0, extra);
  auto vo = slot(nodes_.back());
  size_t at = 0;
  for (Var p : parts) {
    auto vp = slot(nodes_[static_cast<size_t>(p.id)]);
    std::copy(vp.begin(), vp.end(), vo.begin() + at);
    at += vp.size();
  }
  return out;
}

Var Tape::logsumexp(Var a) {
  if (a.cols != 1) throw ShapeError("logsumexp: input must be a vector");
  Var out = push(Op::LogSumExp, 1, 1, a.id, -1);
  auto va = slot(nodes_[static_cast<size_t>(a.id)]);
  double m = va[0];
  for (double x : va) m = std::max(m, x);
  double s = 0.0;
  for (double x : va) s += std::exp(x - m);
  vals_[static_cast<size_t>(nodes_.back().off)] = m + std::log(s);
  return out;
}

std::span<const double> Tape::value(Var v) const {
  return slot(nodes_[static_cast<size_t>(v.id)]);
}

double Tape::scalar_value(Var v) const {
  if (v.size() != 1) throw ShapeError("scalar_value: node is not a scalar");
  return value(v)[0];
}

void Tape::reset() {
  nodes_.clear();
  vals_.clear();
  varargs_.clear();
}

Gradients Tape::backward(Var loss, std::span<const Var> leaves) const {
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar");
  for (Var l : leaves) {
    if (l.id < 0 || l.id >= static_cast<int>(nodes_.size()))
      throw ShapeError("backward: leaf not on this tape");
    if (nodes_[static_cast<size_t>(l.id)].op != Op::Leaf)
      throw ShapeError("backward: requested node is not a leaf");
  }

  adj_.assign(vals_.size(), 0.0);
  auto adj = [&](const Node& n) {
    return std::span<double>(adj_.data() + n.off, static_cast<size_t>(n.rows) * n.cols);
  };

  adj_[static_cast<size_t>(nodes_[static_cast<size_t>(loss.id)].off)] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    auto gy = adj(n);
    switch (n.op) {
      case Op::Const:
      case Op::Leaf:
        break;
      case Op::Add: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto gb = adj(nodes_[static_cast<size_t>(n.b)]);
        for (size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case Op::Sub: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto gb = adj(nodes_[static_cast<size_t>(n.b)]);
        for (size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] -= gy[i];
        }
        break;
      }
      case Op::Mul: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto gb = adj(nodes_[static_cast<size_t>(n.b)]);
        auto va = slot(nodes_[static_cast<size_t>(n.a)]);
        auto vb = slot(nodes_[static_cast<size_t>(n.b)]);
        for (size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i] * vb[i];
          gb[i] += gy[i] * va[i];
        }
        break;
      }
      case Op::Div: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto gb = adj(nodes_[static_cast<size_t>(n.b)]);
        auto vb = slot(nodes_[static_cast<size_t>(n.b)]);
        auto vy = slot(n);
        for (size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i] / vb[i];
          gb[i] -= gy[i] * vy[i] / vb[i];
        }
        break;
      }
      case Op::Neg: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] -= gy[i];
        break;
      }
      case Op::Exp: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto vy = slot(n);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * vy[i];
        break;
      }
      case Op::Log: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto va = slot(nodes_[static_cast<size_t>(n.a)]);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] / va[i];
        break;
      }
      case Op::Logistic: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto vy = slot(n);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * vy[i] * (1.0 - vy[i]);
        break;
      }
      case Op::Affine: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += n.c0 * gy[i];
        break;
      }
      case Op::Matvec: {
        const Node& wn = nodes_[static_cast<size_t>(n.a)];
        const Node& vn = nodes_[static_cast<size_t>(n.b)];
        kernels::serial::outer_acc(adj(wn), wn.rows, wn.cols, gy, slot(vn));
        kernels::serial::matvec_t_acc(slot(wn), wn.rows, wn.cols, gy, adj(vn));
        break;
      }
      case Op::Sum: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        const double g = gy[0];
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        break;
      }
      case Op::Stack: {
        size_t at = 0;
        for (int k = 0; k < n.b; ++k) {
          const Node& part = nodes_[static_cast<size_t>(varargs_[static_cast<size_t>(n.extra + k)])];
          auto gp = adj(part);
          for (size_t i = 0; i < gp.size(); ++i) gp[i] += gy[at + i];
          at += gp.size();
        }
        break;
      }
      case Op::LogSumExp: {
        auto ga = adj(nodes_[static_cast<size_t>(n.a)]);
        auto va = slot(nodes_[static_cast<size_t>(n.a)]);
        const double lse = slot(n)[0];
        const double g = gy[0];
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g * std::exp(va[i] - lse);
        break;
      }
    }
  }

  Gradients out;
  out.leaf_ids.reserve(leaves.size());
  out.grads.reserve(leaves.size());
  for (Var l : leaves) {
    const Node& n = nodes_[static_cast<size_t>(l.id)];
    Tensor g(n.rows, n.cols);
    auto ga = adj(n);
    std::copy(ga.begin(), ga.end(), g.data.begin());
    if (!g.all_finite())
      throw NonFiniteError("backward: non-finite gradient for leaf node " + std::to_string(l.id));
    out.leaf_ids.push_back(l.id);
    out.grads.push_back(std::move(g));
  }
  return out;
}

GradcheckReport gradcheck(const RecordedFn& f, const std::vector<Tensor>& leaf_values,
                          double eps, double tol) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(leaf_values.size());
  for (const Tensor& t : leaf_values) leaves.push_back(tape.leaf(t));
  Var loss = f(tape, leaves);
  Gradients analytic = tape.backward(loss, leaves);

  auto eval = [&](const std::vector<Tensor>& vals) {
    Tape t2;
    std::vector<Var> ls;
    ls.reserve(vals.size());
    for (const Tensor& t : vals) ls.push_back(t2.leaf(t));
    return t2.scalar_value(f(t2, ls));
  };

  GradcheckReport rep;
  rep.tol = tol;
  std::vector<Tensor> work = leaf_values;
  for (size_t li = 0; li < leaf_values.size(); ++li) {
    for (int k = 0; k < leaf_values[li].size(); ++k) {
      const double saved = work[li].data[static_cast<size_t>(k)];
      work[li].data[static_cast<size_t>(k)] = saved + eps;
      const double lp = eval(work);
      work[li].data[static_cast<size_t>(k)] = saved - eps;
      const double lm = eval(work);
      work[li].data[static_cast<size_t>(k)] = saved;

      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic.grads[li].data[static_cast<size_t>(k)];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-12});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_leaf = static_cast<int>(li);
        rep.worst_index = k;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace msnn::autodiff
