#include "alseg/tensor.h"

#include <string>

#include "alseg/errors.h"

namespace alseg {

Matrix& Tensor::grad() {
  if (!has_grad_) zero_grad();
  return grad_;
}

const Matrix& Tensor::grad() const {
  if (!has_grad_) throw ContractError("tensor has no gradient");
  return grad_;
}

void Tensor::zero_grad() {
  grad_ = Matrix::Zero(value_.rows(), value_.cols());
  has_grad_ = true;
}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    throw ContractError("scalar() on a " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + " value");
  }
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Matrix Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  const Matrix& v = value();
  return Matrix::Zero(v.rows(), v.cols());
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::constant_ref(const Matrix& value) { return leaf(value, nullptr); }

Var Tape::watch(Tensor& t) { return leaf(t.value(), &t.grad()); }

Var Tape::leaf(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.external = &value;
  n.grad_sink = grad_sink;
  n.requires_grad = grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_tape(std::span<const Var> inputs) const {
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("operation mixes vars from different tapes");
  }
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  check_same_tape(inputs);
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
  return record_source(std::move(value), needs, std::move(backward));
}

Var Tape::record_source(Matrix value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var output) {
  if (output.tape() != this) throw ContractError("backward on a var from another tape");
  const Matrix& out = value(output.id());
  if (out.size() != 1) {
    throw ContractError("backward needs a scalar output, got " + std::to_string(out.rows()) +
                        "x" + std::to_string(out.cols()));
  }
  if (!nodes_[output.id()].requires_grad) return;
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[output.id()].grad = Matrix::Ones(1, 1);
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this);
    if (n.grad_sink) {
      Matrix& sink = *n.grad_sink;
      if (sink.size() == 0) {
        sink = n.grad;
      } else {
        sink += n.grad;
      }
    }
  }
}

}  // namespace alseg
