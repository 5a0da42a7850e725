/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Reverse-mode differentiation over rank <= 2 tensors.
//
// A Tape owns every node of one computation. Nodes are appended in evaluation
// order, so node indices already form a topological order and backward() is a
// single reverse sweep. Gradients of intermediates live only for the duration of
// a sweep; leaves accumulate (+=) into persistent buffers until zero_grad().

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "greedlab/errors.hpp"
#include "greedlab/tensor.hpp"

namespace greedlab {

enum class Op {
  kLeaf,
  kMatmul,
  kTranspose,
  kAdd,  // same shape, or matrix + row vector (bias)
  kSub,
  kMul,
  kScale,
  kNeg,
  kRelu,
  kSigmoid,
  kLog,
  kClamp,
  kMean,
};

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kNeg: return "neg";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kClamp: return "clamp";
    case Op::kMean: return "mean";
  }
  return "?";
}

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(Tensor value, bool requires_grad = true) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.grad = Tensor(node.value.shape());
    return push(std::move(node));
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  Op op(Var v) const { return nodes_[check(v)].op; }
  std::size_t size() const { return nodes_.size(); }

  void zero_grad() {
    for (auto& node : nodes_) {
      if (node.op == Op::kLeaf && node.requires_grad) node.grad.fill(0.0);
    }
  }

  /// Generic entry point for every primitive. `arg0`/`arg1` carry the scalar
  /// parameters of scale (factor) and clamp (lo, hi).
  Var apply(Op op, std::span<const Var> inputs, double arg0 = 0.0, double arg1 = 0.0);

  /// Accumulates d(root)/d(leaf) into every requires_grad leaf reachable from root.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // leaves only
    Op op = Op::kLeaf;
    std::array<std::size_t, 2> parents{0, 0};
    std::size_t arity = 0;
    double arg0 = 0.0;
    double arg1 = 0.0;
    bool requires_grad = false;
  };

  std::size_t check(Var v) const {
    if (v.tape_ != this || v.index_ >= nodes_.size()) {
      throw ContractError("autodiff: variable does not belong to this tape");
    }
    return v.index_;
  }

  Var push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  Tensor forward(Op op, const Tensor& a, const Tensor* b, double arg0, double arg1) const;
  void propagate(const Node& node, const Tensor& upstream, std::vector<Tensor>& work) const;

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

namespace detail {

[[noreturn]] inline void shape_mismatch(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + a.str() + " vs " + b.str());
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void accumulate(Tensor& dst, const Tensor& src) {
  dst.mat() += src.mat();
}

inline Tensor& slot(std::vector<Tensor>& work, std::size_t index, const Shape& shape) {
  if (work[index].shape() != shape || work[index].size() != shape.size()) {
    work[index] = Tensor(shape);
  }
  return work[index];
}

}  // namespace detail

inline Tensor Tape::forward(Op op, const Tensor& a, const Tensor* b, double arg0,
                            double arg1) const {
  const auto unary = [&](auto&& f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
  };
  switch (op) {
    case Op::kMatmul: {
      if (a.shape().rank() != 2 || b->shape().rank() != 2 || a.cols() != b->rows()) {
        detail::shape_mismatch(op, a.shape(), b->shape());
      }
      Tensor out(Shape::matrix(a.rows(), b->cols()));
      out.mat().noalias() = a.mat() * b->mat();
      return out;
    }
    case Op::kTranspose: {
      if (a.shape().rank() != 2) {
        throw ShapeError("transpose: expected a matrix, got " + a.shape().str());
      }
      Tensor out(Shape::matrix(a.cols(), a.rows()));
      out.mat() = a.mat().transpose();
      return out;
    }
    case Op::kAdd: {
      if (a.shape() == b->shape()) {
        Tensor out(a.shape());
        out.mat() = a.mat() + b->mat();
        return out;
      }
      if (a.shape().rank() == 2 && b->shape().rank() == 1 && b->cols() == a.cols()) {
        Tensor out(a.shape());
        out.mat() = a.mat().rowwise() + b->mat().row(0);
        return out;
      }
      detail::shape_mismatch(op, a.shape(), b->shape());
    }
    case Op::kSub: {
      if (a.shape() != b->shape()) detail::shape_mismatch(op, a.shape(), b->shape());
      Tensor out(a.shape());
      out.mat() = a.mat() - b->mat();
      return out;
    }
    case Op::kMul: {
      if (a.shape() != b->shape()) detail::shape_mismatch(op, a.shape(), b->shape());
      Tensor out(a.shape());
      out.mat() = a.mat().cwiseProduct(b->mat());
      return out;
    }
    case Op::kScale: return unary([arg0](double x) { return arg0 * x; });
    case Op::kNeg: return unary([](double x) { return -x; });
    case Op::kRelu: return unary([](double x) { return x > 0.0 ? x : 0.0; });
    case Op::kSigmoid: return unary(detail::stable_sigmoid);
    case Op::kLog: {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0)) {
          throw DomainError("log: non-positive input " + std::to_string(a[i]) + " at index " +
                            std::to_string(i) + " of " + a.shape().str());
        }
      }
      return unary([](double x) { return std::log(x); });
    }
    case Op::kClamp:
      return unary([arg0, arg1](double x) { return std::min(std::max(x, arg0), arg1); });
    case Op::kMean: {
      if (a.size() == 0) throw ShapeError("mean: empty tensor " + a.shape().str());
      return Tensor::scalar(a.mat().sum() / static_cast<double>(a.size()));
    }
    case Op::kLeaf: break;
  }
  throw ContractError("autodiff: leaf is not an operation");
}

inline Var Tape::apply(Op op, std::span<const Var> inputs, double arg0, double arg1) {
  const bool binary = op == Op::kMatmul || op == Op::kAdd || op == Op::kSub || op == Op::kMul;
  const std::size_t arity = binary ? 2 : 1;
  if (op == Op::kLeaf || inputs.size() != arity) {
    throw ContractError(std::string(op_name(op)) + ": expected " + std::to_string(arity) +
                        " inputs, got " + std::to_string(inputs.size()));
  }
  if (op == Op::kClamp && !(arg0 <= arg1)) {
    throw ContractError("clamp: lower bound exceeds upper bound");
  }
  Node node;
  node.op = op;
  node.arity = arity;
  node.arg0 = arg0;
  node.arg1 = arg1;
  for (std::size_t i = 0; i < arity; ++i) {
    node.parents[i] = check(inputs[i]);
    node.requires_grad = node.requires_grad || nodes_[node.parents[i]].requires_grad;
  }
  const Tensor& a = nodes_[node.parents[0]].value;
  const Tensor* b = binary ? &nodes_[node.parents[1]].value : nullptr;
  node.value = forward(op, a, b, arg0, arg1);
  return push(std::move(node));
}

inline void Tape::propagate(const Node& node, const Tensor& up, std::vector<Tensor>& work) const {
  const std::size_t ia = node.parents[0];
  const std::size_t ib = node.parents[1];
  const Node& pa = nodes_[ia];
  const bool need_a = pa.requires_grad;
  const bool need_b = node.arity == 2 && nodes_[ib].requires_grad;
  const Tensor& a = pa.value;

  const auto grad_a = [&]() -> Tensor& { return detail::slot(work, ia, a.shape()); };
  const auto grad_b = [&]() -> Tensor& { return detail::slot(work, ib, nodes_[ib].value.shape()); };
  const auto elementwise = [&](auto&& df) {
    Tensor& ga = grad_a();
    for (std::size_t i = 0; i < a.size(); ++i) ga[i] += up[i] * df(a[i], node.value[i]);
  };

  switch (node.op) {
    case Op::kMatmul: {
      const Tensor& b = nodes_[ib].value;
      if (need_a) grad_a().mat().noalias() += up.mat() * b.mat().transpose();
      if (need_b) grad_b().mat().noalias() += a.mat().transpose() * up.mat();
      break;
    }
    case Op::kTranspose:
      if (need_a) grad_a().mat() += up.mat().transpose();
      break;
    case Op::kAdd:
      if (need_a) detail::accumulate(grad_a(), up);
      if (need_b) {
        Tensor& gb = grad_b();
        if (gb.shape() == up.shape()) {
          detail::accumulate(gb, up);
        } else {
          gb.mat().row(0) += up.mat().colwise().sum();
        }
      }
      break;
    case Op::kSub:
      if (need_a) detail::accumulate(grad_a(), up);
      if (need_b) grad_b().mat() -= up.mat();
      break;
    case Op::kMul: {
      const Tensor& b = nodes_[ib].value;
      if (need_a) grad_a().mat() += up.mat().cwiseProduct(b.mat());
      if (need_b) grad_b().mat() += up.mat().cwiseProduct(a.mat());
      break;
    }
    case Op::kScale:
      if (need_a) grad_a().mat() += node.arg0 * up.mat();
      break;
    case Op::kNeg:
      if (need_a) grad_a().mat() -= up.mat();
      break;
    case Op::kRelu:
      if (need_a) elementwise([](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
      break;
    case Op::kSigmoid:
      if (need_a) elementwise([](double, double s) { return s * (1.0 - s); });
      break;
    case Op::kLog:
      if (need_a) elementwise([](double x, double) { return 1.0 / x; });
      break;
    case Op::kClamp: {
      const double lo = node.arg0;
      const double hi = node.arg1;
      if (need_a) elementwise([lo, hi](double x, double) { return x >= lo && x <= hi ? 1.0 : 0.0; });
      break;
    }
    case Op::kMean:
      if (need_a) grad_a().mat().array() += up[0] / static_cast<double>(a.size());
      break;
    case Op::kLeaf: break;
  }
}

inline void Tape::backward(Var root) {
  const std::size_t r = check(root);
  if (nodes_[r].value.size() != 1) {
    throw ContractError("backward: root must be a scalar, got shape " + nodes_[r].value.shape().str());
  }
  if (!nodes_[r].requires_grad) return;

  std::vector<char> reachable(r + 1, 0);
  reachable[r] = 1;
  for (std::size_t i = r + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    const Node& node = nodes_[i];
    for (std::size_t p = 0; p < node.arity; ++p) reachable[node.parents[p]] = 1;
  }

  std::vector<Tensor> work(r + 1);
  detail::slot(work, r, nodes_[r].value.shape()).fill(1.0);
  for (std::size_t i = r + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!reachable[i] || !node.requires_grad) continue;
    if (node.op == Op::kLeaf) {
      if (work[i].size() == node.grad.size() && work[i].shape() == node.grad.shape()) {
        detail::accumulate(node.grad, work[i]);
      }
      continue;
    }
    if (work[i].shape() != node.value.shape() || work[i].size() != node.value.size()) continue;
    propagate(node, work[i], work);
    work[i] = Tensor();  // release intermediate gradient memory early
  }
}

// Named wrappers over Tape::apply.

namespace detail {
inline Var apply(Op op, std::initializer_list<Var> inputs, double arg0 = 0.0, double arg1 = 0.0) {
  const Var first = *inputs.begin();
  for (const Var& v : inputs) {
    if (&v.tape() != &first.tape()) {
      throw ContractError(std::string(op_name(op)) + ": operands live on different tapes");
    }
  }
  return first.tape().apply(op, std::span<const Var>(inputs.begin(), inputs.size()), arg0, arg1);
}
}  // namespace detail

inline Var matmul(Var a, Var b) { return detail::apply(Op::kMatmul, {a, b}); }
inline Var transpose(Var a) { return detail::apply(Op::kTranspose, {a}); }
inline Var add(Var a, Var b) { return detail::apply(Op::kAdd, {a, b}); }
inline Var sub(Var a, Var b) { return detail::apply(Op::kSub, {a, b}); }
inline Var mul(Var a, Var b) { return detail::apply(Op::kMul, {a, b}); }
inline Var scale(Var a, double factor) { return detail::apply(Op::kScale, {a}, factor); }
inline Var neg(Var a) { return detail::apply(Op::kNeg, {a}); }
inline Var relu(Var a) { return detail::apply(Op::kRelu, {a}); }
inline Var sigmoid(Var a) { return detail::apply(Op::kSigmoid, {a}); }
inline Var log(Var a) { return detail::apply(Op::kLog, {a}); }
inline Var clamp(Var a, double lo, double hi) { return detail::apply(Op::kClamp, {a}, lo, hi); }
inline Var mean(Var a) { return detail::apply(Op::kMean, {a}); }

/// 1 - a, built from a constant and sub.
inline Var one_minus(Var a) {
  return sub(a.tape().constant(Tensor(a.shape(), 1.0)), a);
}

}  // namespace greedlab
