#pragma once

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace alseg {

// Row-major so that a matrix's flat storage is the row-major value array.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Dense rank-2 tensor (scalars are 1x1, vectors 1xn) with an optional
// gradient slot of identical shape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Index rows, Index cols) : value_(Matrix::Zero(rows, cols)) {}
  explicit Tensor(Matrix value) : value_(std::move(value)) {}

  std::vector<Index> shape() const { return {value_.rows(), value_.cols()}; }
  Index rows() const { return value_.rows(); }
  Index cols() const { return value_.cols(); }
  Index size() const { return value_.size(); }

  Matrix& value() { return value_; }
  const Matrix& value() const { return value_; }
  std::span<double> values() { return {value_.data(), static_cast<std::size_t>(value_.size())}; }
  std::span<const double> values() const {
    return {value_.data(), static_cast<std::size_t>(value_.size())};
  }

  bool has_grad() const { return has_grad_; }
  Matrix& grad();
  const Matrix& grad() const;
  void zero_grad();
  void clear_grad() {
    grad_.resize(0, 0);
    has_grad_ = false;
  }

 private:
  Matrix value_;
  Matrix grad_;
  bool has_grad_ = false;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;
  // Zero matrix if backward never reached this node.
  Matrix grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node list
// is already topologically sorted; backward walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  // References `value` without copying; it must outlive the tape.
  Var constant_ref(const Matrix& value);
  // Leaf whose gradient is added to `t.grad()` by backward().
  Var watch(Tensor& t);
  // Leaf over external storage; backward adds its gradient into `grad_sink`
  // (no gradient tracked when the sink is null).
  Var leaf(const Matrix& value, Matrix* grad_sink);

  // Records an operation. `backward` is dropped when no input needs a grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);
  // Node with no tape inputs that still propagates (e.g. embedding gathers
  // scattering straight into a gradient buffer).
  Var record_source(Matrix value, bool requires_grad, BackwardFn backward);

  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }

  template <typename Expr>
  void accumulate(int id, const Expr& contribution) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = contribution;
    } else {
      n.grad += contribution;
    }
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Matrix* grad_sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  void check_same_tape(std::span<const Var> inputs) const;

  std::vector<Node> nodes_;
};

}  // namespace alseg
