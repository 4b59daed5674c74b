#include "alseg/params.h"

#include <cmath>

#include "alseg/errors.h"

namespace alseg {

void Gradients::zero() {
  for (auto& g : grads) g.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.grads.size() != grads.size()) throw ContractError("gradient sets differ");
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += other.grads[i];
  return *this;
}

Gradients& Gradients::operator*=(double factor) {
  for (auto& g : grads) g *= factor;
  return *this;
}

double Gradients::squared_norm() const {
  double s = 0;
  for (const auto& g : grads) s += g.squaredNorm();
  return s;
}

int ParameterSet::add(std::string name, Matrix init, bool pad_row) {
  if (index_of(name) >= 0) throw ContractError("duplicate parameter " + name);
  if (pad_row && init.rows() > 0) init.row(0).setZero();
  params_.push_back({std::move(name), Tensor(std::move(init)), pad_row});
  return static_cast<int>(params_.size()) - 1;
}

int ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Parameter& ParameterSet::at(const std::string& name) {
  const int i = index_of(name);
  if (i < 0) throw ContractError("unknown parameter " + name);
  return params_[i];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ContractError("unknown parameter " + name);
  return params_[i];
}

Gradients ParameterSet::make_gradients() const {
  Gradients g;
  g.grads.reserve(params_.size());
  for (const auto& p : params_) g.grads.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  return g;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.size());
  return n;
}

namespace init {

Matrix uniform(Index rows, Index cols, double limit, Rng& rng) {
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = alseg::uniform(rng, -limit, limit);
  return m;
}

Matrix xavier(Index fan_in, Index fan_out, Rng& rng) {
  return uniform(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Matrix embedding(Index vocab, Index dim, Rng& rng) {
  Matrix m = uniform(vocab, dim, 0.1, rng);
  if (vocab > 0) m.row(0).setZero();
  return m;
}

}  // namespace init

}  // namespace alseg
