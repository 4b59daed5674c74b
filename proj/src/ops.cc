#include "alseg/ops.h"

#include <cmath>
#include <memory>
#include <string>

#include "alseg/errors.h"

namespace alseg::ops {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                        shape_str(b));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Var matmul(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.rows()) {
    throw ContractError("matmul: " + shape_str(A) + " x " + shape_str(B));
  }
  const int ia = a.id(), ib = b.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(A * B, {a, b}, [ia, ib, io](Tape& tp) {
    const Matrix& g = tp.grad(io);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  const int ia = a.id(), ib = b.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  if (B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols()) {
    Matrix y = A.rowwise() + B.row(0);
    return t.record(std::move(y), {a, b}, [ia, ib, io](Tape& tp) {
      const Matrix& g = tp.grad(io);
      tp.accumulate(ia, g);
      tp.accumulate(ib, g.colwise().sum());
    });
  }
  require_same_shape("add", A, B);
  return t.record(A + B, {a, b}, [ia, ib, io](Tape& tp) {
    tp.accumulate(ia, tp.grad(io));
    tp.accumulate(ib, tp.grad(io));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(a.value() - b.value(), {a, b}, [ia, ib, io](Tape& tp) {
    tp.accumulate(ia, tp.grad(io));
    tp.accumulate(ib, -tp.grad(io));
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib, io](Tape& tp) {
    const Matrix& g = tp.grad(io);
    tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

Var scale(Var a, double factor) {
  const int ia = a.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(a.value() * factor, {a},
                  [ia, io, factor](Tape& tp) { tp.accumulate(ia, tp.grad(io) * factor); });
}

Var transpose(Var a) {
  const int ia = a.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(a.value().transpose(), {a},
                  [ia, io](Tape& tp) { tp.accumulate(ia, tp.grad(io).transpose()); });
}

namespace {

// Elementwise op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var elementwise(Var a, Fwd fwd, Deriv deriv) {
  const int ia = a.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(a.value().unaryExpr(fwd), {a}, [ia, io, deriv](Tape& tp) {
    const Matrix& x = tp.value(ia);
    const Matrix& y = tp.value(io);
    const Matrix& g = tp.grad(io);
    Matrix d(x.rows(), x.cols());
    for (Index k = 0; k < x.size(); ++k) {
      d.data()[k] = g.data()[k] * deriv(x.data()[k], y.data()[k]);
    }
    tp.accumulate(ia, d);
  });
}

}  // namespace

Var sigmoid(Var a) {
  return elementwise(
      a, [](double x) { return sigmoid(x); }, [](double, double y) { return y * (1 - y); });
}

Var tanh(Var a) {
  return elementwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1 - y * y; });
}

Var softplus(Var a) {
  return elementwise(
      a, [](double x) { return softplus(x); }, [](double x, double) { return sigmoid(x); });
}

Var exp(Var a) {
  return elementwise(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  if ((a.value().array() <= 0).any()) throw ContractError("log: non-positive input");
  return elementwise(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax_rows(Var a) {
  const Matrix& X = a.value();
  Matrix Y(X.rows(), X.cols());
  for (Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    Y.row(r) = (X.row(r).array() - m).exp();
    Y.row(r) /= Y.row(r).sum();
  }
  const int ia = a.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(Y), {a}, [ia, io](Tape& tp) {
    const Matrix& y = tp.value(io);
    const Matrix& g = tp.grad(io);
    Matrix d = y.cwiseProduct(g);
    const Eigen::VectorXd dots = d.rowwise().sum();
    d -= y.cwiseProduct(dots.replicate(1, y.cols()));
    tp.accumulate(ia, d);
  });
}

Var concat_cols(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.rows() != B.rows()) {
    throw ContractError("concat_cols: " + shape_str(A) + " vs " + shape_str(B));
  }
  Matrix y(A.rows(), A.cols() + B.cols());
  y << A, B;
  const int ia = a.id(), ib = b.id();
  const Index ca = A.cols(), cb = B.cols();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(y), {a, b}, [ia, ib, io, ca, cb](Tape& tp) {
    const Matrix& g = tp.grad(io);
    tp.accumulate(ia, g.leftCols(ca));
    tp.accumulate(ib, g.rightCols(cb));
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no inputs");
  const Index cols = rows[0].cols();
  Index total = 0;
  for (const Var& r : rows) {
    if (r.cols() != cols) throw ContractError("stack_rows: column mismatch");
    total += r.rows();
  }
  Matrix y(total, cols);
  std::vector<std::pair<int, Index>> parts;
  Index at = 0;
  for (const Var& r : rows) {
    y.middleRows(at, r.rows()) = r.value();
    parts.emplace_back(r.id(), r.rows());
    at += r.rows();
  }
  Tape& t = *rows[0].tape();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(y), rows, [parts = std::move(parts), io](Tape& tp) {
    const Matrix& g = tp.grad(io);
    Index at = 0;
    for (const auto& [id, n] : parts) {
      tp.accumulate(id, g.middleRows(at, n));
      at += n;
    }
  });
}

Var slice_cols(Var a, Index begin, Index count) {
  const Matrix& A = a.value();
  if (begin < 0 || count < 0 || begin + count > A.cols()) {
    throw ContractError("slice_cols: range out of bounds for " + shape_str(A));
  }
  const int ia = a.id();
  const Index rows = A.rows(), cols = A.cols();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(A.middleCols(begin, count), {a},
                  [ia, io, rows, cols, begin, count](Tape& tp) {
                    Matrix d = Matrix::Zero(rows, cols);
                    d.middleCols(begin, count) = tp.grad(io);
                    tp.accumulate(ia, d);
                  });
}

Var slice_rows(Var a, Index begin, Index count) {
  const Matrix& A = a.value();
  if (begin < 0 || count < 0 || begin + count > A.rows()) {
    throw ContractError("slice_rows: range out of bounds for " + shape_str(A));
  }
  const int ia = a.id();
  const Index rows = A.rows(), cols = A.cols();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(A.middleRows(begin, count), {a},
                  [ia, io, rows, cols, begin, count](Tape& tp) {
                    Matrix d = Matrix::Zero(rows, cols);
                    d.middleRows(begin, count) = tp.grad(io);
                    tp.accumulate(ia, d);
                  });
}

Var dropout(Var a, double rate, bool train, Rng& rng) {
  if (rate < 0 || rate >= 1) throw ContractError("dropout: rate must lie in [0, 1)");
  if (!train || rate == 0) return a;
  const Matrix& A = a.value();
  Matrix mask(A.rows(), A.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Index k = 0; k < mask.size(); ++k) {
    mask.data()[k] = uniform01(rng) < rate ? 0.0 : keep_scale;
  }
  Matrix y = A.cwiseProduct(mask);
  const int ia = a.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(std::move(y), {a}, [ia, io, mask = std::move(mask)](Tape& tp) {
    tp.accumulate(ia, tp.grad(io).cwiseProduct(mask));
  });
}

Var sum(Var a) {
  const int ia = a.id();
  const Index rows = a.rows(), cols = a.cols();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia, io, rows, cols](Tape& tp) {
    tp.accumulate(ia, Matrix::Constant(rows, cols, tp.grad(io)(0, 0)));
  });
}

Var mean(Var a) {
  const Index n = a.value().size();
  if (n == 0) throw ContractError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_rows(Var a) {
  const Matrix& A = a.value();
  if (A.rows() == 0) throw ContractError("mean_rows: no rows");
  const int ia = a.id();
  const Index rows = A.rows();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(A.colwise().mean(), {a}, [ia, io, rows](Tape& tp) {
    tp.accumulate(ia, tp.grad(io).replicate(rows, 1) / static_cast<double>(rows));
  });
}

Var squared_error(Var a, Var b) {
  require_same_shape("squared_error", a.value(), b.value());
  Matrix diff = a.value() - b.value();
  const double v = diff.squaredNorm();
  const int ia = a.id(), ib = b.id();
  Tape& t = *a.tape();
  const int io = static_cast<int>(t.size());
  return t.record(Matrix::Constant(1, 1, v), {a, b},
                  [ia, ib, io, diff = std::move(diff)](Tape& tp) {
                    const double g = tp.grad(io)(0, 0);
                    tp.accumulate(ia, 2.0 * g * diff);
                    tp.accumulate(ib, -2.0 * g * diff);
                  });
}

Var stop_gradient(Var a) { return a.tape()->constant(a.value()); }

}  // namespace alseg::ops
