#pragma once

#include <string>
#include <vector>

#include "alseg/rng.h"
#include "alseg/tensor.h"

namespace alseg {

struct Parameter {
  std::string name;
  Tensor tensor;
  // Embedding tables: row 0 is the padding row, pinned to zero.
  bool pad_row = false;
};

// Per-parameter gradient buffers, aligned with a ParameterSet. Each training
// worker owns one; they are reduced before the optimiser step.
struct Gradients {
  std::vector<Matrix> grads;

  void zero();
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor);
  double squared_norm() const;
};

// Named parameters in registration order. The order is the checkpoint order.
class ParameterSet {
 public:
  int add(std::string name, Matrix init, bool pad_row = false);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  int index_of(const std::string& name) const;  // -1 when absent
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Gradients make_gradients() const;
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
};

namespace init {

Matrix uniform(Index rows, Index cols, double limit, Rng& rng);
// Glorot/Xavier uniform: limit = sqrt(6 / (fan_in + fan_out)).
Matrix xavier(Index fan_in, Index fan_out, Rng& rng);
// U(-0.1, 0.1) with a zero padding row.
Matrix embedding(Index vocab, Index dim, Rng& rng);

}  // namespace init

}  // namespace alseg
